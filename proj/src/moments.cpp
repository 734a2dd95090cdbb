#include "phylomoments/moments.h"

#include <algorithm>
#include <cmath>
#include <exception>
#include <string>
#include <thread>

namespace phylomoments {

auto TipData::observed(std::span<const int> states) -> TipData {
  auto result = TipData{};
  result.states.reserve(states.size());
  for (auto s : states) {
    if (s < 0 || s >= k_max_states) {
      throw std::invalid_argument("tip state out of range");
    }
    result.states.push_back(single_state(s));
  }
  return result;
}

auto TipData::missing(int num_tips, int num_states) -> TipData {
  return TipData{std::vector<StateSet>(num_tips, all_states(num_states))};
}

// ---------------------------------------------------------------------------
// Cache

auto BranchMomentCache::from_matrices(const Vector& stationary, std::span<const BranchMoments> per_branch,
                                      bool second_is_factorial) -> BranchMomentCache {
  const auto m = static_cast<int>(stationary.size());
  if (m < 2 || m > k_max_states) {
    throw std::invalid_argument("unsupported number of states");
  }
  auto cache = BranchMomentCache{};
  cache.num_states_ = m;
  cache.num_branches_ = static_cast<int>(per_branch.size());
  cache.second_is_factorial_ = second_is_factorial;
  cache.pi_.assign(stationary.data(), stationary.data() + m);
  const auto mm = static_cast<std::size_t>(m) * m;
  cache.transition_.resize(mm * per_branch.size());
  cache.first_.resize(mm * per_branch.size());
  cache.second_.resize(mm * per_branch.size());
  for (auto b = std::size_t{0}; b < per_branch.size(); ++b) {
    const auto& bm = per_branch[b];
    if (bm.transition.rows() != m || bm.transition.cols() != m || bm.first.rows() != m ||
        bm.first.cols() != m || bm.second.rows() != m || bm.second.cols() != m) {
      throw std::invalid_argument("branch moment matrices must be m x m");
    }
    for (auto i = 0; i < m; ++i) {
      for (auto j = 0; j < m; ++j) {
        cache.transition_[b * mm + i * m + j] = bm.transition(i, j);
        cache.first_[b * mm + i * m + j] = bm.first(i, j);
        cache.second_[b * mm + i * m + j] = bm.second(i, j);
      }
    }
  }
  return cache;
}

auto BranchMomentCache::to_matrix(const std::vector<double>& v, BranchIndex b) const -> Matrix {
  auto s = slice(v, b);
  auto out = Matrix{num_states_, num_states_};
  for (auto i = 0; i < num_states_; ++i) {
    for (auto j = 0; j < num_states_; ++j) {
      out(i, j) = s[i * num_states_ + j];
    }
  }
  return out;
}

auto build_cache(const RateModel& model, const Phylogeny& phylo, const SummaryLabel& label) -> BranchMomentCache {
  label.validate(model.num_states());
  auto per_branch = std::vector<BranchMoments>{};
  per_branch.reserve(phylo.num_branches());
  for (auto b = 0; b < phylo.num_branches(); ++b) {
    per_branch.push_back(branch_moments(model, label, phylo.length(b)));
  }
  return BranchMomentCache::from_matrices(model.stationary(), per_branch,
                                          label.kind == SummaryKind::substitution_count);
}

auto build_transition_cache(const RateModel& model, const Phylogeny& phylo) -> BranchMomentCache {
  const auto m = model.num_states();
  auto cache = BranchMomentCache{};
  cache.num_states_ = m;
  cache.num_branches_ = phylo.num_branches();
  cache.has_moments_ = false;
  cache.pi_.assign(model.stationary().data(), model.stationary().data() + m);
  const auto mm = static_cast<std::size_t>(m) * m;
  cache.transition_.resize(mm * phylo.num_branches());
  for (auto b = 0; b < phylo.num_branches(); ++b) {
    const auto p = transition_matrix_spectral(model, phylo.length(b));
    for (auto i = 0; i < m; ++i) {
      for (auto j = 0; j < m; ++j) {
        cache.transition_[b * mm + i * m + j] = p(i, j);
      }
    }
  }
  return cache;
}

// ---------------------------------------------------------------------------
// Traversals

namespace {

// out = M x for a row-major m x m matrix.
inline void mat_vec(std::span<const double> mat, const double* x, double* out, int m) {
  for (auto i = 0; i < m; ++i) {
    auto acc = 0.0;
    const auto* row = mat.data() + i * m;
    for (auto j = 0; j < m; ++j) {
      acc += row[j] * x[j];
    }
    out[i] = acc;
  }
}

// out += c M x
inline void mat_vec_add(std::span<const double> mat, const double* x, double* out, int m, double c) {
  for (auto i = 0; i < m; ++i) {
    auto acc = 0.0;
    const auto* row = mat.data() + i * m;
    for (auto j = 0; j < m; ++j) {
      acc += row[j] * x[j];
    }
    out[i] += c * acc;
  }
}

void check_inputs(const Phylogeny& phylo, const BranchMomentCache& cache, const BranchSet& omega) {
  if (cache.num_branches() != phylo.num_branches()) {
    throw std::invalid_argument("branch moment cache does not match the phylogeny");
  }
  if (!cache.has_moments()) {
    throw std::invalid_argument("branch cache holds transition matrices only");
  }
  if (omega.num_branches() != phylo.num_branches()) {
    throw std::invalid_argument("branch set does not match the phylogeny");
  }
}

void check_tips(const Phylogeny& phylo, const BranchMomentCache& cache, const TipData& tips) {
  if (tips.num_tips() != phylo.num_tips()) {
    throw std::invalid_argument("tip data has " + std::to_string(tips.num_tips()) + " entries for " +
                                std::to_string(phylo.num_tips()) + " tips");
  }
  const auto valid = all_states(cache.num_states());
  for (auto s : tips.states) {
    if ((s & valid) == 0) {
      throw std::invalid_argument("tip observation allows no state");
    }
  }
}

// Tip partial likelihood: indicator of the observed set, or all ones in prior mode.
inline void init_tip(const TipData* tips, int tip, int m, double* f) {
  if (tips == nullptr) {
    std::fill(f, f + m, 1.0);
    return;
  }
  const auto s = tips->states[tip];
  for (auto j = 0; j < m; ++j) {
    f[j] = ((s >> j) & 1u) ? 1.0 : 0.0;
  }
}

inline auto max_entry(const double* x, int m) -> double {
  auto r = 0.0;
  for (auto i = 0; i < m; ++i) {
    r = std::max(r, x[i]);
  }
  return r;
}

inline auto dot_pi(std::span<const double> pi, const double* x) -> double {
  auto acc = 0.0;
  for (auto i = 0; i < std::ssize(pi); ++i) {
    acc += pi[i] * x[i];
  }
  return acc;
}

auto finish_variance(double second, double mean, const char* what) -> double {
  auto var = second - mean * mean;
  const auto tol = 1e-10 * std::max(1.0, std::abs(second));
  if (var < 0.0) {
    if (var >= -tol) {
      return 0.0;
    }
    throw MomentError(std::string{what} + " is negative beyond roundoff (" + std::to_string(var) + ")");
  }
  return var;
}

// Post-order evaluation of F, S, V1, V2 and W for a single branch set.
class VarianceEngine {
 public:
  VarianceEngine(const Phylogeny& phylo, const BranchMomentCache& cache, const BranchSet& omega,
                 const TraversalOptions& options)
      : phylo_(phylo), cache_(cache), omega_(omega), options_(options), m_(cache.num_states()) {
    const auto size = static_cast<std::size_t>(phylo.num_branches()) * m_;
    s_.resize(size);
    v1_.resize(size);
    v2_.resize(size);
    w_.resize(size);
    log_scale_.resize(phylo.num_branches());
    f_.resize(m_);
    x1_.resize(m_);
    x2_.resize(m_);
    y_.resize(m_);
  }

  auto run(const TipData* tips) -> MomentResult {
    const auto m = m_;
    auto* f = f_.data();
    auto* x1 = x1_.data();
    auto* x2 = x2_.data();
    auto* y = y_.data();

    for (auto b : phylo_.postorder()) {
      const auto child = phylo_.child_node(b);
      const auto in_omega = omega_.contains(b);
      auto* s = &s_[b * m];
      auto* v1 = &v1_[b * m];
      auto* v2 = &v2_[b * m];
      auto* w = &w_[b * m];
      const auto p = cache_.transition(b);

      if (phylo_.is_tip(child)) {
        init_tip(tips, phylo_.tip_of(child), m, f);
        mat_vec(p, f, s, m);
        if (in_omega) {
          mat_vec(cache_.first(b), f, v1, m);
          mat_vec(cache_.second(b), f, v2, m);
        } else {
          std::fill(v1, v1 + m, 0.0);
          std::fill(v2, v2 + m, 0.0);
        }
        std::fill(w, w + m, 0.0);
        log_scale_[b] = 0.0;
      } else {
        const auto [b1, b2] = phylo_.child_branches(child);
        const auto* s1 = &s_[b1 * m];
        const auto* s2 = &s_[b2 * m];
        const auto* v1_1 = &v1_[b1 * m];
        const auto* v1_2 = &v1_[b2 * m];
        const auto* v2_1 = &v2_[b1 * m];
        const auto* v2_2 = &v2_[b2 * m];
        const auto* w1 = &w_[b1 * m];
        const auto* w2 = &w_[b2 * m];
        for (auto j = 0; j < m; ++j) {
          f[j] = s1[j] * s2[j];
          x1[j] = v1_1[j] * s2[j] + v1_2[j] * s1[j];
          x2[j] = v2_1[j] * s2[j] + v2_2[j] * s1[j];
          y[j] = 2.0 * v1_1[j] * v1_2[j] + w1[j] * s2[j] + w2[j] * s1[j];
        }
        mat_vec(p, f, s, m);
        mat_vec(p, x1, v1, m);
        mat_vec(p, x2, v2, m);
        mat_vec(p, y, w, m);
        if (in_omega) {
          mat_vec_add(cache_.first(b), f, v1, m, 1.0);
          mat_vec_add(cache_.second(b), f, v2, m, 1.0);
          mat_vec_add(cache_.first(b), x1, w, m, 2.0);
        }
        log_scale_[b] = log_scale_[b1] + log_scale_[b2];
      }
      rescale(b);
    }

    const auto [r1, r2] = phylo_.root_branches();
    const auto* s1 = &s_[r1 * m];
    const auto* s2 = &s_[r2 * m];
    const auto* v1_1 = &v1_[r1 * m];
    const auto* v1_2 = &v1_[r2 * m];
    const auto* v2_1 = &v2_[r1 * m];
    const auto* v2_2 = &v2_[r2 * m];
    const auto* w1 = &w_[r1 * m];
    const auto* w2 = &w_[r2 * m];
    const auto c = cache_.second_is_factorial() ? 1.0 : 0.0;
    for (auto j = 0; j < m; ++j) {
      f[j] = s1[j] * s2[j];
      x1[j] = v1_1[j] * s2[j] + v1_2[j] * s1[j];
      x2[j] = 2.0 * v1_1[j] * v1_2[j] + w1[j] * s2[j] + w2[j] * s1[j] + (c * v1_1[j] + v2_1[j]) * s2[j] +
              (c * v1_2[j] + v2_2[j]) * s1[j];
    }
    const auto pi = cache_.stationary();
    const auto lik = dot_pi(pi, f);
    const auto log_scale = log_scale_[r1] + log_scale_[r2];
    if (!(lik > 0.0)) {
      throw ImpossibleDataError("tip data have probability zero under the model");
    }
    const auto first = dot_pi(pi, x1);
    const auto second = dot_pi(pi, x2);

    auto result = MomentResult{};
    result.log_likelihood = std::log(lik) + log_scale;
    result.likelihood = std::exp(result.log_likelihood);
    result.mean = first / lik;
    const auto raw_second = second / lik;
    result.variance = finish_variance(raw_second, result.mean, "posterior variance");
    result.restricted_first = first * std::exp(log_scale);
    result.restricted_second = second * std::exp(log_scale);
    return result;
  }

 private:
  void rescale(BranchIndex b) {
    auto* s = &s_[b * m_];
    const auto top = max_entry(s, m_);
    if (top > 0.0 && top < options_.rescale_threshold) {
      const auto inv = 1.0 / top;
      for (auto* v : {s, &v1_[b * m_], &v2_[b * m_], &w_[b * m_]}) {
        for (auto j = 0; j < m_; ++j) {
          v[j] *= inv;
        }
      }
      log_scale_[b] += std::log(top);
    }
  }

  const Phylogeny& phylo_;
  const BranchMomentCache& cache_;
  const BranchSet& omega_;
  TraversalOptions options_;
  int m_;
  std::vector<double> s_, v1_, v2_, w_, log_scale_;
  std::vector<double> f_, x1_, x2_, y_;
};

// Covariance traversal.  Channel a tracks omega1, b tracks omega2 and c tracks
// their intersection; W vectors track ordered pairs of distinct branches drawn
// from (a, a), (b, b) and (a, b).
class CovarianceEngine {
 public:
  CovarianceEngine(const Phylogeny& phylo, const BranchMomentCache& cache, const BranchSet& omega1,
                   const BranchSet& omega2, const TraversalOptions& options)
      : phylo_(phylo),
        cache_(cache),
        omega1_(omega1),
        omega2_(omega2),
        both_(omega1.intersected(omega2)),
        options_(options),
        m_(cache.num_states()) {
    const auto size = static_cast<std::size_t>(phylo.num_branches()) * m_;
    for (auto* v : vectors()) {
      v->resize(size);
    }
    log_scale_.resize(phylo.num_branches());
    tmp_.resize(static_cast<std::size_t>(m_) * 8);
  }

  auto run(const TipData* tips) -> CovarianceResult {
    const auto m = m_;
    auto* f = &tmp_[0];
    auto* xa1 = &tmp_[m];
    auto* xa2 = &tmp_[2 * m];
    auto* xb1 = &tmp_[3 * m];
    auto* xb2 = &tmp_[4 * m];
    auto* xc1 = &tmp_[5 * m];
    auto* xc2 = &tmp_[6 * m];
    auto* y = &tmp_[7 * m];

    for (auto b : phylo_.postorder()) {
      const auto child = phylo_.child_node(b);
      const auto in1 = omega1_.contains(b);
      const auto in2 = omega2_.contains(b);
      const auto in12 = both_.contains(b);
      const auto p = cache_.transition(b);
      const auto e1 = cache_.first(b);
      const auto e2 = cache_.second(b);
      auto at = [&](std::vector<double>& v, BranchIndex br) { return &v[br * m]; };

      if (phylo_.is_tip(child)) {
        init_tip(tips, phylo_.tip_of(child), m, f);
        mat_vec(p, f, at(s_, b), m);
        set_leaf_channel(in1, e1, e2, f, at(va1_, b), at(va2_, b));
        set_leaf_channel(in2, e1, e2, f, at(vb1_, b), at(vb2_, b));
        set_leaf_channel(in12, e1, e2, f, at(vc1_, b), at(vc2_, b));
        std::fill(at(waa_, b), at(waa_, b) + m, 0.0);
        std::fill(at(wbb_, b), at(wbb_, b) + m, 0.0);
        std::fill(at(wab_, b), at(wab_, b) + m, 0.0);
        log_scale_[b] = 0.0;
      } else {
        const auto [b1, b2] = phylo_.child_branches(child);
        const auto* s1 = at(s_, b1);
        const auto* s2 = at(s_, b2);
        auto combine = [&](std::vector<double>& v, double* out) {
          const auto* l = at(v, b1);
          const auto* r = at(v, b2);
          for (auto j = 0; j < m; ++j) {
            out[j] = l[j] * s2[j] + r[j] * s1[j];
          }
        };
        for (auto j = 0; j < m; ++j) {
          f[j] = s1[j] * s2[j];
        }
        combine(va1_, xa1);
        combine(va2_, xa2);
        combine(vb1_, xb1);
        combine(vb2_, xb2);
        combine(vc1_, xc1);
        combine(vc2_, xc2);

        mat_vec(p, f, at(s_, b), m);
        set_inner_channel(in1, p, e1, e2, f, xa1, xa2, at(va1_, b), at(va2_, b));
        set_inner_channel(in2, p, e1, e2, f, xb1, xb2, at(vb1_, b), at(vb2_, b));
        set_inner_channel(in12, p, e1, e2, f, xc1, xc2, at(vc1_, b), at(vc2_, b));

        // W for the pair of channels (x, z):
        //   [b in x] E1 Xz + [b in z] E1 Xx + P (Vx_1 Vz_2 + Vx_2 Vz_1 + W_1 S_2 + W_2 S_1)
        auto pair = [&](std::vector<double>& vx, std::vector<double>& vz, std::vector<double>& w, bool in_x,
                        bool in_z, const double* xx, const double* xz) {
          const auto* x_1 = at(vx, b1);
          const auto* x_2 = at(vx, b2);
          const auto* z_1 = at(vz, b1);
          const auto* z_2 = at(vz, b2);
          const auto* w_1 = at(w, b1);
          const auto* w_2 = at(w, b2);
          for (auto j = 0; j < m; ++j) {
            y[j] = x_1[j] * z_2[j] + x_2[j] * z_1[j] + w_1[j] * s2[j] + w_2[j] * s1[j];
          }
          auto* out = at(w, b);
          mat_vec(p, y, out, m);
          if (in_x) {
            mat_vec_add(e1, xz, out, m, 1.0);
          }
          if (in_z) {
            mat_vec_add(e1, xx, out, m, 1.0);
          }
        };
        pair(va1_, va1_, waa_, in1, in1, xa1, xa1);
        pair(vb1_, vb1_, wbb_, in2, in2, xb1, xb1);
        pair(va1_, vb1_, wab_, in1, in2, xa1, xb1);
        log_scale_[b] = log_scale_[b1] + log_scale_[b2];
      }
      rescale(b);
    }

    const auto [r1, r2] = phylo_.root_branches();
    const auto pi = cache_.stationary();
    const auto c = cache_.second_is_factorial() ? 1.0 : 0.0;
    auto at = [&](const std::vector<double>& v, BranchIndex br) { return &v[br * m]; };
    const auto* s1 = at(s_, r1);
    const auto* s2 = at(s_, r2);
    for (auto j = 0; j < m; ++j) {
      f[j] = s1[j] * s2[j];
    }
    const auto lik = dot_pi(pi, f);
    if (!(lik > 0.0)) {
      throw ImpossibleDataError("tip data have probability zero under the model");
    }
    auto root_first = [&](const std::vector<double>& v1) {
      const auto* l = at(v1, r1);
      const auto* r = at(v1, r2);
      auto acc = 0.0;
      for (auto j = 0; j < m; ++j) {
        acc += pi[j] * (l[j] * s2[j] + r[j] * s1[j]);
      }
      return acc;
    };
    // Pairs of distinct branches plus the same-branch second moment of `vsame`.
    auto root_product = [&](const std::vector<double>& vx, const std::vector<double>& vz,
                            const std::vector<double>& w, const std::vector<double>& vsame1,
                            const std::vector<double>& vsame2) {
      const auto* x_1 = at(vx, r1);
      const auto* x_2 = at(vx, r2);
      const auto* z_1 = at(vz, r1);
      const auto* z_2 = at(vz, r2);
      const auto* w_1 = at(w, r1);
      const auto* w_2 = at(w, r2);
      const auto* a_1 = at(vsame1, r1);
      const auto* a_2 = at(vsame1, r2);
      const auto* q_1 = at(vsame2, r1);
      const auto* q_2 = at(vsame2, r2);
      auto acc = 0.0;
      for (auto j = 0; j < m; ++j) {
        acc += pi[j] * (x_1[j] * z_2[j] + x_2[j] * z_1[j] + w_1[j] * s2[j] + w_2[j] * s1[j] +
                        (c * a_1[j] + q_1[j]) * s2[j] + (c * a_2[j] + q_2[j]) * s1[j]);
      }
      return acc;
    };
    const auto first1 = root_first(va1_);
    const auto first2 = root_first(vb1_);
    const auto second1 = root_product(va1_, va1_, waa_, va1_, va2_);
    const auto second2 = root_product(vb1_, vb1_, wbb_, vb1_, vb2_);
    const auto product = root_product(va1_, vb1_, wab_, vc1_, vc2_);
    const auto log_scale = log_scale_[r1] + log_scale_[r2];

    auto result = CovarianceResult{};
    result.log_likelihood = std::log(lik) + log_scale;
    result.likelihood = std::exp(result.log_likelihood);
    result.mean1 = first1 / lik;
    result.mean2 = first2 / lik;
    result.variance1 = finish_variance(second1 / lik, result.mean1, "variance of the first summary");
    result.variance2 = finish_variance(second2 / lik, result.mean2, "variance of the second summary");
    result.covariance = product / lik - result.mean1 * result.mean2;
    result.restricted_product = product * std::exp(log_scale);
    return result;
  }

 private:
  auto vectors() -> std::vector<std::vector<double>*> {
    return {&s_, &va1_, &va2_, &vb1_, &vb2_, &vc1_, &vc2_, &waa_, &wbb_, &wab_};
  }

  void set_leaf_channel(bool in, std::span<const double> e1, std::span<const double> e2, const double* f,
                        double* v1, double* v2) const {
    if (in) {
      mat_vec(e1, f, v1, m_);
      mat_vec(e2, f, v2, m_);
    } else {
      std::fill(v1, v1 + m_, 0.0);
      std::fill(v2, v2 + m_, 0.0);
    }
  }

  void set_inner_channel(bool in, std::span<const double> p, std::span<const double> e1,
                         std::span<const double> e2, const double* f, const double* x1, const double* x2,
                         double* v1, double* v2) const {
    mat_vec(p, x1, v1, m_);
    mat_vec(p, x2, v2, m_);
    if (in) {
      mat_vec_add(e1, f, v1, m_, 1.0);
      mat_vec_add(e2, f, v2, m_, 1.0);
    }
  }

  void rescale(BranchIndex b) {
    auto* s = &s_[b * m_];
    const auto top = max_entry(s, m_);
    if (top > 0.0 && top < options_.rescale_threshold) {
      const auto inv = 1.0 / top;
      for (auto* v : vectors()) {
        auto* x = &(*v)[b * m_];
        for (auto j = 0; j < m_; ++j) {
          x[j] *= inv;
        }
      }
      log_scale_[b] += std::log(top);
    }
  }

  const Phylogeny& phylo_;
  const BranchMomentCache& cache_;
  const BranchSet& omega1_;
  const BranchSet& omega2_;
  BranchSet both_;
  TraversalOptions options_;
  int m_;
  std::vector<double> s_, va1_, va2_, vb1_, vb2_, vc1_, vc2_, waa_, wbb_, wab_;
  std::vector<double> log_scale_;
  std::vector<double> tmp_;
};

template <typename Result, typename Fn>
auto parallel_columns(std::size_t num_columns, int threads, Fn&& per_worker) -> std::vector<Result> {
  auto results = std::vector<Result>(num_columns);
  auto errors = std::vector<std::exception_ptr>(num_columns);
  threads = std::max(1, std::min<int>(threads, static_cast<int>(num_columns)));
  auto work = [&](int worker) {
    per_worker(worker, threads, results, errors);
  };
  if (threads == 1) {
    work(0);
  } else {
    auto pool = std::vector<std::jthread>{};
    for (auto t = 0; t < threads; ++t) {
      pool.emplace_back(work, t);
    }
  }
  for (auto i = std::size_t{0}; i < num_columns; ++i) {
    if (errors[i]) {
      try {
        std::rethrow_exception(errors[i]);
      } catch (const std::exception& e) {
        throw std::runtime_error("column " + std::to_string(i + 1) + ": " + e.what());
      }
    }
  }
  return results;
}

}  // namespace

auto posterior_moments(const Phylogeny& phylo, const BranchMomentCache& cache, const BranchSet& omega,
                       const TipData& tips, const TraversalOptions& options) -> MomentResult {
  check_inputs(phylo, cache, omega);
  check_tips(phylo, cache, tips);
  return VarianceEngine{phylo, cache, omega, options}.run(&tips);
}

auto prior_moments(const Phylogeny& phylo, const BranchMomentCache& cache, const BranchSet& omega)
    -> MomentResult {
  check_inputs(phylo, cache, omega);
  auto result = VarianceEngine{phylo, cache, omega, TraversalOptions{}}.run(nullptr);
  result.likelihood = 1.0;
  result.log_likelihood = 0.0;
  return result;
}

auto posterior_covariance(const Phylogeny& phylo, const BranchMomentCache& cache, const BranchSet& omega1,
                          const BranchSet& omega2, const TipData& tips, const TraversalOptions& options)
    -> CovarianceResult {
  check_inputs(phylo, cache, omega1);
  check_inputs(phylo, cache, omega2);
  check_tips(phylo, cache, tips);
  return CovarianceEngine{phylo, cache, omega1, omega2, options}.run(&tips);
}

auto prior_covariance(const Phylogeny& phylo, const BranchMomentCache& cache, const BranchSet& omega1,
                      const BranchSet& omega2) -> CovarianceResult {
  check_inputs(phylo, cache, omega1);
  check_inputs(phylo, cache, omega2);
  auto result = CovarianceEngine{phylo, cache, omega1, omega2, TraversalOptions{}}.run(nullptr);
  result.likelihood = 1.0;
  result.log_likelihood = 0.0;
  return result;
}

auto per_site_moments(const Phylogeny& phylo, const BranchMomentCache& cache, const BranchSet& omega,
                      std::span<const TipData> columns, int threads) -> std::vector<MomentResult> {
  check_inputs(phylo, cache, omega);
  return parallel_columns<MomentResult>(
      columns.size(), threads, [&](int worker, int stride, auto& results, auto& errors) {
        auto engine = VarianceEngine{phylo, cache, omega, TraversalOptions{}};
        for (auto i = static_cast<std::size_t>(worker); i < columns.size(); i += stride) {
          try {
            check_tips(phylo, cache, columns[i]);
            results[i] = engine.run(&columns[i]);
          } catch (...) {
            errors[i] = std::current_exception();
          }
        }
      });
}

auto per_site_covariances(const Phylogeny& phylo, const BranchMomentCache& cache, const BranchSet& omega1,
                          const BranchSet& omega2, std::span<const TipData> columns, int threads)
    -> std::vector<CovarianceResult> {
  check_inputs(phylo, cache, omega1);
  check_inputs(phylo, cache, omega2);
  return parallel_columns<CovarianceResult>(
      columns.size(), threads, [&](int worker, int stride, auto& results, auto& errors) {
        auto engine = CovarianceEngine{phylo, cache, omega1, omega2, TraversalOptions{}};
        for (auto i = static_cast<std::size_t>(worker); i < columns.size(); i += stride) {
          try {
            check_tips(phylo, cache, columns[i]);
            results[i] = engine.run(&columns[i]);
          } catch (...) {
            errors[i] = std::current_exception();
          }
        }
      });
}

auto log_likelihood(const Phylogeny& phylo, const BranchMomentCache& cache, const TipData& tips) -> double {
  if (cache.num_branches() != phylo.num_branches()) {
    throw std::invalid_argument("branch cache does not match the phylogeny");
  }
  check_tips(phylo, cache, tips);
  const auto m = cache.num_states();
  auto s = std::vector<double>(static_cast<std::size_t>(phylo.num_branches()) * m);
  auto log_scale = std::vector<double>(phylo.num_branches(), 0.0);
  auto f = std::vector<double>(m);
  for (auto b : phylo.postorder()) {
    const auto child = phylo.child_node(b);
    if (phylo.is_tip(child)) {
      init_tip(&tips, phylo.tip_of(child), m, f.data());
    } else {
      const auto [b1, b2] = phylo.child_branches(child);
      for (auto j = 0; j < m; ++j) {
        f[j] = s[b1 * m + j] * s[b2 * m + j];
      }
      log_scale[b] = log_scale[b1] + log_scale[b2];
    }
    auto* out = &s[b * m];
    mat_vec(cache.transition(b), f.data(), out, m);
    const auto top = max_entry(out, m);
    if (top > 0.0 && top < TraversalOptions{}.rescale_threshold) {
      for (auto j = 0; j < m; ++j) {
        out[j] /= top;
      }
      log_scale[b] += std::log(top);
    }
  }
  const auto [r1, r2] = phylo.root_branches();
  auto lik = 0.0;
  const auto pi = cache.stationary();
  for (auto j = 0; j < m; ++j) {
    lik += pi[j] * s[r1 * m + j] * s[r2 * m + j];
  }
  if (!(lik > 0.0)) {
    return -std::numeric_limits<double>::infinity();
  }
  return std::log(lik) + log_scale[r1] + log_scale[r2];
}

}  // namespace phylomoments
