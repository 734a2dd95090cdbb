#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "phylomoments/ctmc.h"
#include "phylomoments/phylogeny.h"

namespace phylomoments {

// Bit i set means state i is compatible with the observation.
using StateSet = std::uint32_t;

inline constexpr int k_max_states = 32;

inline auto single_state(int state) -> StateSet { return StateSet{1} << state; }
inline auto all_states(int num_states) -> StateSet {
  return num_states >= 32 ? ~StateSet{0} : (StateSet{1} << num_states) - 1;
}

// Observations at the tips for one alignment column, in the phylogeny's tip order.
struct TipData {
  std::vector<StateSet> states;

  static auto observed(std::span<const int> states) -> TipData;
  static auto missing(int num_tips, int num_states) -> TipData;

  auto num_tips() const -> int { return static_cast<int>(states.size()); }
};

class ImpossibleDataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class MomentError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Per-branch P(t_b), first and second restricted moment matrices, stored row-major.
class BranchMomentCache {
 public:
  // `second_is_factorial` says whether the second-moment slot holds E[h(h-1)...]
  // (substitution counts) rather than the raw E[h^2 ...] (dwelling times).
  static auto from_matrices(const Vector& stationary, std::span<const BranchMoments> per_branch,
                            bool second_is_factorial) -> BranchMomentCache;

  auto num_states() const -> int { return num_states_; }
  auto num_branches() const -> int { return num_branches_; }
  auto second_is_factorial() const -> bool { return second_is_factorial_; }
  auto has_moments() const -> bool { return has_moments_; }
  auto stationary() const -> std::span<const double> { return pi_; }

  auto transition(BranchIndex b) const -> std::span<const double> { return slice(transition_, b); }
  auto first(BranchIndex b) const -> std::span<const double> { return slice(first_, b); }
  auto second(BranchIndex b) const -> std::span<const double> { return slice(second_, b); }

  auto transition_matrix(BranchIndex b) const -> Matrix { return to_matrix(transition_, b); }
  auto first_matrix(BranchIndex b) const -> Matrix { return to_matrix(first_, b); }
  auto second_matrix(BranchIndex b) const -> Matrix { return to_matrix(second_, b); }

 private:
  friend auto build_transition_cache(const RateModel&, const Phylogeny&) -> BranchMomentCache;

  auto slice(const std::vector<double>& v, BranchIndex b) const -> std::span<const double> {
    const auto mm = static_cast<std::size_t>(num_states_) * num_states_;
    return {v.data() + b * mm, mm};
  }
  auto to_matrix(const std::vector<double>& v, BranchIndex b) const -> Matrix;

  int num_states_ = 0;
  int num_branches_ = 0;
  bool second_is_factorial_ = true;
  bool has_moments_ = true;
  std::vector<double> pi_;
  std::vector<double> transition_;
  std::vector<double> first_;
  std::vector<double> second_;
};

auto build_cache(const RateModel& model, const Phylogeny& phylo, const SummaryLabel& label) -> BranchMomentCache;

// Transition matrices only; enough for likelihoods and simulation.
auto build_transition_cache(const RateModel& model, const Phylogeny& phylo) -> BranchMomentCache;

struct MomentResult {
  double likelihood = 1.0;       // P(D); 1 in prior mode
  double log_likelihood = 0.0;
  double mean = 0.0;
  double variance = 0.0;
  // E(H 1_D) and E(H^2 1_D); these underflow together with P(D) on large trees.
  double restricted_first = 0.0;
  double restricted_second = 0.0;
};

struct CovarianceResult {
  double likelihood = 1.0;
  double log_likelihood = 0.0;
  double mean1 = 0.0;
  double mean2 = 0.0;
  double variance1 = 0.0;
  double variance2 = 0.0;
  double covariance = 0.0;
  double restricted_product = 0.0;  // E(H1 H2 1_D)
};

struct TraversalOptions {
  // Branch vectors are renormalised when the largest directional likelihood drops below this.
  // Two sibling vectors get multiplied before the check, so this must stay well above
  // sqrt(DBL_MIN).
  double rescale_threshold = 1e-100;
};

auto posterior_moments(const Phylogeny& phylo, const BranchMomentCache& cache, const BranchSet& omega,
                       const TipData& tips, const TraversalOptions& options = {}) -> MomentResult;

auto prior_moments(const Phylogeny& phylo, const BranchMomentCache& cache, const BranchSet& omega)
    -> MomentResult;

auto posterior_covariance(const Phylogeny& phylo, const BranchMomentCache& cache, const BranchSet& omega1,
                          const BranchSet& omega2, const TipData& tips, const TraversalOptions& options = {})
    -> CovarianceResult;

auto prior_covariance(const Phylogeny& phylo, const BranchMomentCache& cache, const BranchSet& omega1,
                      const BranchSet& omega2) -> CovarianceResult;

// Column-by-column posterior_moments.  Errors carry the failing column index.
// Results do not depend on `threads`.
auto per_site_moments(const Phylogeny& phylo, const BranchMomentCache& cache, const BranchSet& omega,
                      std::span<const TipData> columns, int threads = 1) -> std::vector<MomentResult>;

auto per_site_covariances(const Phylogeny& phylo, const BranchMomentCache& cache, const BranchSet& omega1,
                          const BranchSet& omega2, std::span<const TipData> columns, int threads = 1)
    -> std::vector<CovarianceResult>;

// Felsenstein pruning on the cached transition matrices; returns log P(D).
auto log_likelihood(const Phylogeny& phylo, const BranchMomentCache& cache, const TipData& tips) -> double;

}  // namespace phylomoments
