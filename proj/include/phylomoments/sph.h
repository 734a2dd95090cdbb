#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "phylomoments/ctmc.h"
#include "phylomoments/moments.h"
#include "phylomoments/rng.h"
#include "phylomoments/simmap.h"

namespace phylomoments {

class SphError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// "original" variants use normal approximations with the prior variance of the
// substitution count; "modified" variants use the variance of the statistic itself.
enum class SphVariant {
  all_original,
  all_modified,
  sub_marginal_original,
  sub_marginal_modified,
  sub_conditional_original,
  ratio_modified,
};

auto variant_name(SphVariant v) -> std::string;
auto parse_variant(const std::string& name) -> SphVariant;
auto needs_subtree(SphVariant v) -> bool;

// Sums over columns of E(H | D_i) for all branches, for the subtree below b, and their ratio.
auto stat_all(std::span<const TipData> columns, const Phylogeny& phylo, const BranchMomentCache& cache) -> double;
auto stat_sub(std::span<const TipData> columns, const Phylogeny& phylo, const BranchMomentCache& cache, BranchIndex b)
    -> double;
auto stat_ratio(std::span<const TipData> columns, const Phylogeny& phylo, const BranchMomentCache& cache,
                BranchIndex b) -> double;

// Per-site moments of H_all and H_sub under one scaled tree, with optional Monte
// Carlo averages of the conditional moments over simulated columns.
struct NullMoments {
  int num_datasets = 0;  // 0 when no conditional part was simulated
  double mean_all = 0.0, variance_all = 0.0;
  double mean_sub = 0.0, variance_sub = 0.0, covariance = 0.0;
  double cond_variance_all = 0.0, cond_variance_all_se = 0.0;
  double cond_variance_sub = 0.0, cond_variance_sub_se = 0.0;
  double cond_covariance = 0.0, cond_covariance_se = 0.0;
};

// Prior parts are exact.  `subtree` may be none(); then the subtree fields stay zero.
auto null_moments(const Phylogeny& phylo, const RateModel& model, const BranchSet& subtree, int num_datasets,
                  Rng* rng) -> NullMoments;

// Normal null for one variant.  mean and variance are for the statistic over L sites
// (for the ratio, of the ratio itself).
struct NullDistribution {
  SphVariant variant = SphVariant::all_modified;
  int sites = 0;
  double mean = 0.0;
  double variance = 0.0;
  double variance_se = 0.0;  // propagated from the Monte Carlo part
  bool approximate = false;  // sub_conditional_original
  NullMoments moments;
};

// For sub_conditional_original, `observed_all` is the observed T_all it conditions on.
auto make_null(SphVariant variant, const NullMoments& moments, int sites, double observed_all = 0.0)
    -> NullDistribution;

auto null_all(const RateModel& model, const Phylogeny& phylo, int sites, int m_mc, Rng& rng) -> NullDistribution;
auto null_all_original(const RateModel& model, const Phylogeny& phylo, int sites) -> NullDistribution;

struct RhoEstimate {
  double rho = 1.0;
  double log_likelihood = 0.0;
  bool at_boundary = false;
};

// argmax over [0, 1] of the log-likelihood of the columns under all lengths times rho.
auto estimate_rho(std::span<const TipData> columns, const Phylogeny& phylo, const RateModel& model) -> RhoEstimate;

struct TestResult {
  SphVariant variant = SphVariant::all_modified;
  double statistic = 0.0;
  double p_value = 1.0;
  std::optional<double> rho_hat;
  NullDistribution null;
};

struct TestOptions {
  BranchIndex subtree_branch = k_no_index;
  int m_mc = 1000;
};

auto test_conservation(std::span<const TipData> columns, const Phylogeny& phylo, const RateModel& model,
                       SphVariant variant, const TestOptions& options, Rng& rng) -> TestResult;

// All requested variants on one alignment, sharing rho-hat and the simulated null
// moments.  `all_null` (moments under the unscaled tree, with conditional part) is
// reused across calls when given.
auto test_variants(std::span<const TipData> columns, const Phylogeny& phylo, const RateModel& model,
                   std::span<const SphVariant> variants, const TestOptions& options, Rng& rng,
                   const NullMoments* all_null = nullptr) -> std::vector<TestResult>;

struct PowerConfig {
  std::vector<int> sites;
  std::vector<double> rhos;
  std::vector<double> lambdas{1.0};
  BranchIndex subtree_branch = k_no_index;
  std::vector<SphVariant> variants;
  int reps = 100;
  int m_mc = 1000;
  int m_mc_all = 0;  // datasets for the shared unscaled null; 0 means m_mc
  std::uint64_t seed = 1;
  int threads = 1;
};

struct PowerCell {
  int sites = 0;
  double rho = 1.0;
  double lambda = 1.0;
  SphVariant variant = SphVariant::all_modified;
  std::vector<double> p_values;
  int failures = 0;  // replicates whose null was degenerate; counted as p = 1
};

// Replicate r of grid point g simulates from make_rng(seed, g * 2^32 + r).
auto power_simulation(const Phylogeny& phylo, const RateModel& model, const PowerConfig& config)
    -> std::vector<PowerCell>;

// Fraction of p-values at or below alpha.
auto rejection_rate(std::span<const double> p_values, double alpha) -> double;

}  // namespace phylomoments
