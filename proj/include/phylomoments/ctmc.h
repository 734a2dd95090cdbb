#pragma once

#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "phylomoments/linalg.h"
#include "phylomoments/phylogeny.h"

namespace phylomoments {

class ModelError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Reversible continuous-time Markov chain on m states.
class RateModel {
 public:
  // Validates: nonnegative off-diagonal rates, zero row sums, pi a positive
  // probability vector, detailed balance, and stationarity.
  static auto from_rates(Matrix rates, Vector stationary) -> RateModel;

  auto num_states() const -> int { return static_cast<int>(q_.rows()); }
  auto rates() const -> const Matrix& { return q_; }
  auto stationary() const -> const Vector& { return pi_; }

  // Expected number of substitutions per unit time at stationarity, -sum_i pi_i q_ii.
  auto mean_rate() const -> double;

  // Decomposition of the symmetrised generator diag(pi)^1/2 Q diag(pi)^-1/2.
  auto eigenvalues() const -> const Vector& { return eigenvalues_; }
  auto eigenvectors() const -> const Matrix& { return eigenvectors_; }

 private:
  RateModel() = default;

  Matrix q_;
  Vector pi_;
  Vector eigenvalues_;
  Matrix eigenvectors_;
};

// Exchangeabilities are ordered AC, AG, AT, CG, CT, GT; frequencies A, C, G, T.
// With `normalize`, Q is rescaled to one expected substitution per unit length.
auto build_gtr(std::span<const double> exchangeabilities, std::span<const double> base_freqs,
               bool normalize = true) -> RateModel;

// Q = [[-alpha, alpha], [beta, -beta]].
auto build_two_state(double alpha, double beta) -> RateModel;

// Equal exchangeabilities, uniform frequencies, normalised.
auto build_jc69() -> RateModel;

// P(t) = exp(Qt) through the Pade route.
auto transition_matrix(const RateModel& model, double t) -> Matrix;

// P(t) through the eigendecomposition of the symmetrised generator.
auto transition_matrix_spectral(const RateModel& model, double t) -> Matrix;

enum class SummaryKind { substitution_count, dwelling_time };

// Which summary a stochastic mapping is reduced to on each branch: the number of
// substitutions whose (from, to) pair is labelled, or the time spent in the
// flagged states.
struct SummaryLabel {
  SummaryKind kind = SummaryKind::substitution_count;
  std::vector<std::pair<int, int>> pairs;  // 0-based states; kind == substitution_count
  std::vector<int> state_mask;             // 0/1 per state; kind == dwelling_time

  static auto counts(std::vector<std::pair<int, int>> pairs) -> SummaryLabel;
  static auto all_substitutions(int num_states) -> SummaryLabel;
  static auto dwelling(std::vector<int> state_mask) -> SummaryLabel;

  // Throws ModelError when the label does not fit an m-state chain.
  void validate(int num_states) const;

  // Q restricted to labelled pairs (counts) or diag(mask) (dwelling times).
  auto reward_matrix(const RateModel& model) const -> Matrix;
};

// Per-branch moment triple.  For substitution counts `second` holds the factorial
// moment E[h(h-1) 1{X_t=j} | X_0=i]; for dwelling times it holds the raw second
// moment E[h^2 1{X_t=j} | X_0=i].
struct BranchMoments {
  Matrix transition;
  Matrix first;
  Matrix second;
};

// One exponential of the 3m x 3m block generator [[Q,B,0],[0,Q,B],[0,0,Q]] t.
auto branch_moments(const RateModel& model, const SummaryLabel& label, double t) -> BranchMoments;

struct RestrictedMoments {
  Matrix first;
  Matrix second;
};

auto restricted_moment_matrices(const RateModel& model, const SummaryLabel& label, double t)
    -> RestrictedMoments;

// psi(rho, lambda; subtree): every length times rho, lengths inside `subtree`
// additionally times lambda.  `subtree` must be a full subtree, or empty with lambda == 1.
auto scale_phylogeny(const Phylogeny& phylo, double rho, double lambda, const BranchSet& subtree)
    -> Phylogeny;

// Sets entries in (-tol * scale, 0) to zero and throws on anything more negative,
// where scale = max(1, max |entry|).
void clamp_roundoff(Matrix& m, const char* what, double tol = 1e-14);

}  // namespace phylomoments
