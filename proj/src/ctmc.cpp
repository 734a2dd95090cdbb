#include "phylomoments/ctmc.h"

#include <cmath>
#include <string>

namespace phylomoments {

auto RateModel::from_rates(Matrix rates, Vector stationary) -> RateModel {
  const auto m = rates.rows();
  if (m < 2 || rates.cols() != m || stationary.size() != m) {
    throw ModelError("rate matrix must be m x m with m >= 2 and pi of length m");
  }
  if (!rates.allFinite() || !stationary.allFinite()) {
    throw ModelError("rate model has non-finite entries");
  }
  const auto scale = std::max(1.0, rates.cwiseAbs().maxCoeff());
  for (auto i = 0; i < m; ++i) {
    for (auto j = 0; j < m; ++j) {
      if (i != j && rates(i, j) < 0.0) {
        throw ModelError("negative off-diagonal rate q[" + std::to_string(i) + "][" + std::to_string(j) + "]");
      }
    }
    if (std::abs(rates.row(i).sum()) > 1e-12 * scale) {
      throw ModelError("row " + std::to_string(i) + " of the rate matrix does not sum to zero");
    }
    if (!(stationary[i] > 0.0)) {
      throw ModelError("stationary probabilities must be positive");
    }
  }
  if (std::abs(stationary.sum() - 1.0) > 1e-12) {
    throw ModelError("stationary probabilities must sum to one");
  }
  for (auto i = 0; i < m; ++i) {
    for (auto j = i + 1; j < m; ++j) {
      if (std::abs(stationary[i] * rates(i, j) - stationary[j] * rates(j, i)) > 1e-10 * scale) {
        throw ModelError("rate matrix is not reversible with respect to pi");
      }
    }
  }
  if ((stationary.transpose() * rates).cwiseAbs().maxCoeff() > 1e-10 * scale) {
    throw ModelError("pi is not stationary for the rate matrix");
  }

  auto model = RateModel{};
  model.q_ = std::move(rates);
  model.pi_ = std::move(stationary);

  const Vector sqrt_pi = model.pi_.cwiseSqrt();
  Matrix sym = sqrt_pi.asDiagonal() * model.q_ * sqrt_pi.cwiseInverse().asDiagonal();
  sym = 0.5 * (sym + sym.transpose()).eval();
  auto solver = Eigen::SelfAdjointEigenSolver<Matrix>{sym};
  if (solver.info() != Eigen::Success) {
    throw ModelError("eigendecomposition of the symmetrised generator failed");
  }
  model.eigenvalues_ = solver.eigenvalues();
  model.eigenvectors_ = solver.eigenvectors();
  return model;
}

auto RateModel::mean_rate() const -> double {
  return -(pi_.array() * q_.diagonal().array()).sum();
}

auto build_gtr(std::span<const double> exchangeabilities, std::span<const double> base_freqs, bool normalize)
    -> RateModel {
  if (exchangeabilities.size() != 6 || base_freqs.size() != 4) {
    throw ModelError("GTR needs 6 exchangeabilities and 4 base frequencies");
  }
  auto freq_sum = 0.0;
  for (auto f : base_freqs) {
    if (!(f > 0.0) || !std::isfinite(f)) {
      throw ModelError("base frequencies must be positive");
    }
    freq_sum += f;
  }
  if (std::abs(freq_sum - 1.0) > 1e-8) {
    throw ModelError("base frequencies must sum to one");
  }
  for (auto r : exchangeabilities) {
    if (!(r >= 0.0) || !std::isfinite(r)) {
      throw ModelError("exchangeabilities must be nonnegative");
    }
  }

  auto pi = Vector{4};
  for (auto i = 0; i < 4; ++i) {
    pi[i] = base_freqs[i] / freq_sum;
  }
  static constexpr int k_pair[4][4] = {{-1, 0, 1, 2}, {0, -1, 3, 4}, {1, 3, -1, 5}, {2, 4, 5, -1}};
  auto q = Matrix{Matrix::Zero(4, 4)};
  for (auto i = 0; i < 4; ++i) {
    for (auto j = 0; j < 4; ++j) {
      if (i != j) {
        q(i, j) = exchangeabilities[k_pair[i][j]] * pi[j];
      }
    }
    q(i, i) = -q.row(i).sum();
  }
  if (normalize) {
    auto rate = -(pi.array() * q.diagonal().array()).sum();
    if (!(rate > 0.0)) {
      throw ModelError("cannot normalise a GTR model with all exchangeabilities zero");
    }
    q /= rate;
  }
  return RateModel::from_rates(std::move(q), std::move(pi));
}

auto build_two_state(double alpha, double beta) -> RateModel {
  if (!(alpha > 0.0) || !(beta > 0.0) || !std::isfinite(alpha) || !std::isfinite(beta)) {
    throw ModelError("two-state rates must be positive");
  }
  auto q = Matrix{2, 2};
  q << -alpha, alpha, beta, -beta;
  auto pi = Vector{2};
  pi << beta / (alpha + beta), alpha / (alpha + beta);
  return RateModel::from_rates(std::move(q), std::move(pi));
}

auto build_jc69() -> RateModel {
  const double r[6] = {1, 1, 1, 1, 1, 1};
  const double f[4] = {0.25, 0.25, 0.25, 0.25};
  return build_gtr(r, f, true);
}

void clamp_roundoff(Matrix& m, const char* what, double tol) {
  const auto scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  for (auto i = 0; i < m.rows(); ++i) {
    for (auto j = 0; j < m.cols(); ++j) {
      auto& x = m(i, j);
      if (x < 0.0) {
        if (x > -tol * scale) {
          x = 0.0;
        } else {
          throw std::runtime_error(std::string{what} + " has a negative entry beyond roundoff");
        }
      }
    }
  }
}

namespace {

void check_time(double t) {
  if (!(t >= 0.0) || !std::isfinite(t)) {
    throw ModelError("branch length must be finite and nonnegative");
  }
}

}  // namespace

auto transition_matrix(const RateModel& model, double t) -> Matrix {
  check_time(t);
  const auto m = model.num_states();
  if (t == 0.0) {
    return Matrix::Identity(m, m);
  }
  Matrix p = expm(model.rates() * t);
  clamp_roundoff(p, "transition matrix");
  return p;
}

auto transition_matrix_spectral(const RateModel& model, double t) -> Matrix {
  check_time(t);
  const auto m = model.num_states();
  if (t == 0.0) {
    return Matrix::Identity(m, m);
  }
  const auto& u = model.eigenvectors();
  const Vector decay = (model.eigenvalues() * t).array().exp();
  const Vector sqrt_pi = model.stationary().cwiseSqrt();
  Matrix p = sqrt_pi.cwiseInverse().asDiagonal() * (u * decay.asDiagonal() * u.transpose()) *
             sqrt_pi.asDiagonal();
  for (auto i = 0; i < m; ++i) {
    for (auto j = 0; j < m; ++j) {
      if (p(i, j) < 0.0 && p(i, j) > -1e-13) {
        p(i, j) = 0.0;
      }
    }
  }
  return p;
}

// ---------------------------------------------------------------------------
// Labels

auto SummaryLabel::counts(std::vector<std::pair<int, int>> pairs) -> SummaryLabel {
  auto label = SummaryLabel{};
  label.kind = SummaryKind::substitution_count;
  label.pairs = std::move(pairs);
  return label;
}

auto SummaryLabel::all_substitutions(int num_states) -> SummaryLabel {
  auto pairs = std::vector<std::pair<int, int>>{};
  for (auto i = 0; i < num_states; ++i) {
    for (auto j = 0; j < num_states; ++j) {
      if (i != j) {
        pairs.emplace_back(i, j);
      }
    }
  }
  return counts(std::move(pairs));
}

auto SummaryLabel::dwelling(std::vector<int> state_mask) -> SummaryLabel {
  auto label = SummaryLabel{};
  label.kind = SummaryKind::dwelling_time;
  label.state_mask = std::move(state_mask);
  return label;
}

void SummaryLabel::validate(int num_states) const {
  if (kind == SummaryKind::substitution_count) {
    for (auto [i, j] : pairs) {
      if (i < 0 || j < 0 || i >= num_states || j >= num_states) {
        throw ModelError("labelled pair outside the state space");
      }
      if (i == j) {
        throw ModelError("labelled pairs must be off-diagonal");
      }
    }
  } else {
    if (std::ssize(state_mask) != num_states) {
      throw ModelError("state mask length must equal the number of states");
    }
    for (auto w : state_mask) {
      if (w != 0 && w != 1) {
        throw ModelError("state mask entries must be 0 or 1");
      }
    }
  }
}

auto SummaryLabel::reward_matrix(const RateModel& model) const -> Matrix {
  const auto m = model.num_states();
  validate(m);
  auto b = Matrix{Matrix::Zero(m, m)};
  if (kind == SummaryKind::substitution_count) {
    for (auto [i, j] : pairs) {
      b(i, j) = model.rates()(i, j);
    }
  } else {
    for (auto i = 0; i < m; ++i) {
      b(i, i) = state_mask[i];
    }
  }
  return b;
}

// ---------------------------------------------------------------------------
// Restricted moments

auto branch_moments(const RateModel& model, const SummaryLabel& label, double t) -> BranchMoments {
  check_time(t);
  const auto m = model.num_states();
  const Matrix reward = label.reward_matrix(model);
  if (t == 0.0) {
    return {Matrix::Identity(m, m), Matrix::Zero(m, m), Matrix::Zero(m, m)};
  }

  // The (0,1) block of exp(G t) is int_0^t e^{Qu} B e^{Q(t-u)} du and the (0,2) block
  // is the ordered double integral over u < v.
  auto generator = Matrix{Matrix::Zero(3 * m, 3 * m)};
  for (auto k = 0; k < 3; ++k) {
    generator.block(k * m, k * m, m, m) = model.rates();
  }
  generator.block(0, m, m, m) = reward;
  generator.block(m, 2 * m, m, m) = reward;
  const Matrix blocks = expm(generator * t);

  auto result = BranchMoments{blocks.block(0, 0, m, m), blocks.block(0, m, m, m), 2.0 * blocks.block(0, 2 * m, m, m)};
  clamp_roundoff(result.transition, "transition matrix");
  clamp_roundoff(result.first, "first restricted moment");
  clamp_roundoff(result.second, "second restricted moment");
  return result;
}

auto restricted_moment_matrices(const RateModel& model, const SummaryLabel& label, double t)
    -> RestrictedMoments {
  auto bm = branch_moments(model, label, t);
  return {std::move(bm.first), std::move(bm.second)};
}

auto scale_phylogeny(const Phylogeny& phylo, double rho, double lambda, const BranchSet& subtree)
    -> Phylogeny {
  if (!(rho >= 0.0 && rho <= 1.0)) {
    throw ModelError("rho must lie in [0, 1]");
  }
  if (!(lambda >= 0.0 && lambda <= 1.0)) {
    throw ModelError("lambda must lie in [0, 1]");
  }
  const auto has_subtree = subtree.num_branches() > 0 && !subtree.empty();
  if (has_subtree) {
    if (!is_subtree(phylo, subtree)) {
      throw ModelError("scaled branch set is not a subtree of the phylogeny");
    }
  } else if (lambda != 1.0) {
    throw ModelError("lambda != 1 needs a subtree");
  }
  auto lengths = std::vector<double>(phylo.lengths().begin(), phylo.lengths().end());
  for (auto b = 0; b < phylo.num_branches(); ++b) {
    lengths[b] *= rho;
    if (has_subtree && subtree.contains(b)) {
      lengths[b] *= lambda;
    }
  }
  return phylo.with_lengths(std::move(lengths));
}

}  // namespace phylomoments
