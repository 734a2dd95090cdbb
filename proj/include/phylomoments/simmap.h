#pragma once

#include <span>
#include <vector>

#include "phylomoments/ctmc.h"
#include "phylomoments/moments.h"
#include "phylomoments/rng.h"
#include "phylomoments/stats.h"

namespace phylomoments {

// Jumps of a CTMC path on [0, t): times strictly increasing, states[k] entered at times[k].
struct BranchPath {
  int start = 0;
  double length = 0.0;
  std::vector<double> times;
  std::vector<int> states;

  auto end() const -> int { return states.empty() ? start : states.back(); }
};

struct MappingSample {
  std::vector<int> node_states;  // every node, tips included
  std::vector<BranchPath> paths;  // per branch
};

// Value of the summary on one path.
auto path_summary(const BranchPath& path, const SummaryLabel& label) -> double;

// H_omega for a full mapping.
auto mapping_summary(const MappingSample& mapping, const SummaryLabel& label, const BranchSet& omega) -> double;

// Endpoint-conditioned paths by uniformization: the number of candidate jumps of the
// dominating chain is drawn given both endpoints, then the jump chain is bridged.
class PathSampler {
 public:
  explicit PathSampler(const RateModel& model);

  auto sample(int from, int to, double t, Rng& rng) const -> BranchPath;

 private:
  int m_;
  double mu_;
  std::vector<double> r_;  // I + Q / mu, row-major
};

auto sample_branch_path(int from, int to, double t, const RateModel& model, Rng& rng) -> BranchPath;

// Forward simulation repeated until the path ends in `to`.  Slow; used to cross-check.
auto sample_branch_path_rejection(int from, int to, double t, const RateModel& model, Rng& rng,
                                  long max_attempts = 10'000'000) -> BranchPath;

// Node states drawn from their joint posterior given the tips (ambiguous tips are
// resolved as well).  `cache` needs transition matrices only.
auto sample_internal_states(const Phylogeny& phylo, const BranchMomentCache& cache, const TipData& tips, Rng& rng)
    -> std::vector<int>;

auto sample_mapping(const Phylogeny& phylo, const BranchMomentCache& cache, const PathSampler& paths,
                    const TipData& tips, Rng& rng) -> MappingSample;

struct McEstimate {
  int reps = 0;
  double mean = 0.0;
  double variance = 0.0;
  double se_mean = 0.0;
  double se_variance = 0.0;
};

// H_omega[k] for each of `reps` posterior mappings, one row per omega.
auto mc_summary_draws(const Phylogeny& phylo, const BranchMomentCache& cache, const RateModel& model,
                      std::span<const BranchSet> omegas, const TipData& tips, const SummaryLabel& label, int reps,
                      Rng& rng) -> std::vector<std::vector<double>>;

auto mc_moments(const Phylogeny& phylo, const BranchMomentCache& cache, const RateModel& model,
                const BranchSet& omega, const TipData& tips, const SummaryLabel& label, int reps, Rng& rng)
    -> McEstimate;

// Averages of exact conditional moments over tip data simulated from the model.
struct ExpectedConditional {
  int num_datasets = 0;
  SampleSummary variance1;   // Var(H1 | D) across datasets
  SampleSummary variance2;   // Var(H2 | D)
  SampleSummary covariance;  // Cov(H1, H2 | D)
  SampleSummary mean1;       // E(H1 | D)
  SampleSummary mean2;       // E(H2 | D)
};

// `cache` must be build_cache(model, phylo, label).  The two-set form runs the
// covariance traversal; the one-set form leaves the second-set fields empty.
auto expected_conditional_moments(const Phylogeny& phylo, const BranchMomentCache& cache, const RateModel& model,
                                  const BranchSet& omega, int num_datasets, Rng& rng) -> ExpectedConditional;
auto expected_conditional_moments(const Phylogeny& phylo, const BranchMomentCache& cache, const RateModel& model,
                                  const BranchSet& omega1, const BranchSet& omega2, int num_datasets, Rng& rng)
    -> ExpectedConditional;

}  // namespace phylomoments
