#include "phylomoments/simmap.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "phylomoments/seqsim.h"

namespace phylomoments {

auto path_summary(const BranchPath& path, const SummaryLabel& label) -> double {
  if (label.kind == SummaryKind::substitution_count) {
    auto count = 0.0;
    auto prev = path.start;
    for (auto s : path.states) {
      if (std::find(label.pairs.begin(), label.pairs.end(), std::pair{prev, s}) != label.pairs.end()) {
        count += 1.0;
      }
      prev = s;
    }
    return count;
  }
  auto time = 0.0;
  auto state = path.start;
  auto since = 0.0;
  for (auto k = std::size_t{0}; k < path.times.size(); ++k) {
    if (label.state_mask[state]) {
      time += path.times[k] - since;
    }
    since = path.times[k];
    state = path.states[k];
  }
  if (label.state_mask[state]) {
    time += path.length - since;
  }
  return time;
}

auto mapping_summary(const MappingSample& mapping, const SummaryLabel& label, const BranchSet& omega) -> double {
  auto total = 0.0;
  for (auto b : omega.members()) {
    total += path_summary(mapping.paths[b], label);
  }
  return total;
}

PathSampler::PathSampler(const RateModel& model) : m_(model.num_states()) {
  const auto& q = model.rates();
  mu_ = 0.0;
  for (auto i = 0; i < m_; ++i) {
    mu_ = std::max(mu_, -q(i, i));
  }
  r_.assign(static_cast<std::size_t>(m_) * m_, 0.0);
  for (auto i = 0; i < m_; ++i) {
    for (auto j = 0; j < m_; ++j) {
      r_[i * m_ + j] = (i == j ? 1.0 : 0.0) + (mu_ > 0.0 ? q(i, j) / mu_ : 0.0);
    }
    r_[i * m_ + i] = std::max(0.0, r_[i * m_ + i]);
  }
}

auto PathSampler::sample(int from, int to, double t, Rng& rng) const -> BranchPath {
  if (from < 0 || to < 0 || from >= m_ || to >= m_) {
    throw std::invalid_argument("path endpoint outside the state space");
  }
  if (!(t >= 0.0) || !std::isfinite(t)) {
    throw std::invalid_argument("path length must be finite and nonnegative");
  }
  auto path = BranchPath{from, t, {}, {}};
  const auto rate = mu_ * t;
  if (rate == 0.0) {
    if (from != to) {
      throw std::invalid_argument("endpoints are unreachable: p_ij(t) = 0");
    }
    return path;
  }

  // cols[n] = R^n e_to, built until the Poisson tail is negligible
  thread_local auto cols = std::vector<double>{};
  thread_local auto weights = std::vector<double>{};
  cols.assign(m_, 0.0);
  cols[to] = 1.0;
  weights.clear();
  const auto log_rate = std::log(rate);
  auto total = 0.0;
  for (auto n = 0;; ++n) {
    if (n > 0) {
      const auto prev = cols.size() - m_;
      cols.resize(cols.size() + m_);
      for (auto i = 0; i < m_; ++i) {
        auto acc = 0.0;
        for (auto k = 0; k < m_; ++k) {
          acc += r_[i * m_ + k] * cols[prev + k];
        }
        cols[prev + m_ + i] = acc;
      }
    }
    const auto pois = std::exp(n * log_rate - rate - std::lgamma(n + 1.0));
    const auto w = pois * cols[static_cast<std::size_t>(n) * m_ + from];
    weights.push_back(w);
    total += w;
    // entries of R^k are at most 1, and past the mode the Poisson terms shrink at
    // least geometrically with ratio rate / (n + 1)
    if (n + 1 > rate && pois * rate / (n + 1 - rate) <= 1e-15 * total) {
      break;
    }
    if (n > 100000 + 20 * rate) {
      throw std::runtime_error("uniformization did not converge");
    }
  }
  if (!(total > 0.0)) {
    throw std::invalid_argument("endpoints are unreachable: p_ij(t) = 0");
  }
  const auto n = sample_index(weights, rng);

  path.times.resize(n);
  for (auto& x : path.times) {
    x = uniform01(rng) * t;
  }
  std::sort(path.times.begin(), path.times.end());

  auto state = from;
  auto kept = 0;
  thread_local auto step = std::vector<double>{};
  step.resize(m_);
  for (auto k = 1; k <= n; ++k) {
    const auto* col = &cols[static_cast<std::size_t>(n - k) * m_];
    for (auto x = 0; x < m_; ++x) {
      step[x] = r_[state * m_ + x] * col[x];
    }
    const auto next = sample_index(step, rng);
    if (next != state) {
      path.times[kept++] = path.times[k - 1];
      path.states.push_back(next);
      state = next;
    }
  }
  path.times.resize(kept);
  return path;
}

auto sample_branch_path(int from, int to, double t, const RateModel& model, Rng& rng) -> BranchPath {
  return PathSampler{model}.sample(from, to, t, rng);
}

auto sample_branch_path_rejection(int from, int to, double t, const RateModel& model, Rng& rng,
                                  long max_attempts) -> BranchPath {
  const auto& q = model.rates();
  const auto m = model.num_states();
  auto exits = std::vector<double>(m);
  for (auto attempt = 0L; attempt < max_attempts; ++attempt) {
    auto path = BranchPath{from, t, {}, {}};
    auto state = from;
    auto now = 0.0;
    for (;;) {
      const auto out = -q(state, state);
      if (out <= 0.0) {
        break;
      }
      now += -std::log1p(-uniform01(rng)) / out;
      if (now >= t) {
        break;
      }
      for (auto x = 0; x < m; ++x) {
        exits[x] = x == state ? 0.0 : q(state, x);
      }
      state = sample_index(exits, rng);
      path.times.push_back(now);
      path.states.push_back(state);
    }
    if (state == to) {
      return path;
    }
  }
  throw std::runtime_error("rejection sampler exhausted its attempts");
}

auto sample_internal_states(const Phylogeny& phylo, const BranchMomentCache& cache, const TipData& tips, Rng& rng)
    -> std::vector<int> {
  const auto m = cache.num_states();
  if (tips.num_tips() != phylo.num_tips() || cache.num_branches() != phylo.num_branches()) {
    throw std::invalid_argument("tip data or cache does not match the phylogeny");
  }
  // f: partial likelihood at each node; s: directional likelihood per branch.  Both
  // are normalised to max 1 since only ratios matter for sampling.
  auto f = std::vector<double>(static_cast<std::size_t>(phylo.num_nodes()) * m);
  auto s = std::vector<double>(static_cast<std::size_t>(phylo.num_branches()) * m);
  for (auto b : phylo.postorder()) {
    const auto c = phylo.child_node(b);
    auto* fc = &f[static_cast<std::size_t>(c) * m];
    if (phylo.is_tip(c)) {
      const auto set = tips.states[phylo.tip_of(c)];
      for (auto j = 0; j < m; ++j) {
        fc[j] = ((set >> j) & 1u) ? 1.0 : 0.0;
      }
    } else {
      const auto [b1, b2] = phylo.child_branches(c);
      for (auto j = 0; j < m; ++j) {
        fc[j] = s[b1 * m + j] * s[b2 * m + j];
      }
    }
    const auto p = cache.transition(b);
    auto top = 0.0;
    for (auto i = 0; i < m; ++i) {
      auto acc = 0.0;
      for (auto j = 0; j < m; ++j) {
        acc += p[i * m + j] * fc[j];
      }
      s[b * m + i] = acc;
      top = std::max(top, acc);
    }
    if (!(top > 0.0)) {
      throw ImpossibleDataError("tip data have probability zero under the model");
    }
    for (auto i = 0; i < m; ++i) {
      s[b * m + i] /= top;
    }
  }
  auto states = std::vector<int>(phylo.num_nodes());
  auto w = std::vector<double>(m);
  const auto [r1, r2] = phylo.root_branches();
  const auto pi = cache.stationary();
  for (auto j = 0; j < m; ++j) {
    w[j] = pi[j] * s[r1 * m + j] * s[r2 * m + j];
  }
  states[phylo.root()] = sample_index(w, rng);
  for (auto b = 0; b < phylo.num_branches(); ++b) {
    const auto i = states[phylo.parent_node(b)];
    const auto c = phylo.child_node(b);
    const auto p = cache.transition(b);
    for (auto j = 0; j < m; ++j) {
      w[j] = p[i * m + j] * f[static_cast<std::size_t>(c) * m + j];
    }
    states[c] = sample_index(w, rng);
  }
  return states;
}

auto sample_mapping(const Phylogeny& phylo, const BranchMomentCache& cache, const PathSampler& paths,
                    const TipData& tips, Rng& rng) -> MappingSample {
  auto mapping = MappingSample{};
  mapping.node_states = sample_internal_states(phylo, cache, tips, rng);
  mapping.paths.reserve(phylo.num_branches());
  for (auto b = 0; b < phylo.num_branches(); ++b) {
    mapping.paths.push_back(paths.sample(mapping.node_states[phylo.parent_node(b)],
                                         mapping.node_states[phylo.child_node(b)], phylo.length(b), rng));
  }
  return mapping;
}

auto mc_summary_draws(const Phylogeny& phylo, const BranchMomentCache& cache, const RateModel& model,
                      std::span<const BranchSet> omegas, const TipData& tips, const SummaryLabel& label, int reps,
                      Rng& rng) -> std::vector<std::vector<double>> {
  if (reps < 1) {
    throw std::invalid_argument("need at least one replicate");
  }
  label.validate(model.num_states());
  for (const auto& omega : omegas) {
    if (omega.num_branches() != phylo.num_branches()) {
      throw std::invalid_argument("branch set does not match the phylogeny");
    }
  }
  const auto sampler = PathSampler{model};
  auto draws = std::vector<std::vector<double>>(omegas.size(), std::vector<double>(reps));
  auto per_branch = std::vector<double>(phylo.num_branches());
  for (auto r = 0; r < reps; ++r) {
    const auto mapping = sample_mapping(phylo, cache, sampler, tips, rng);
    for (auto b = 0; b < phylo.num_branches(); ++b) {
      per_branch[b] = path_summary(mapping.paths[b], label);
    }
    for (auto k = std::size_t{0}; k < omegas.size(); ++k) {
      auto h = 0.0;
      for (auto b = 0; b < phylo.num_branches(); ++b) {
        if (omegas[k].contains(b)) {
          h += per_branch[b];
        }
      }
      draws[k][r] = h;
    }
  }
  return draws;
}

auto mc_moments(const Phylogeny& phylo, const BranchMomentCache& cache, const RateModel& model,
                const BranchSet& omega, const TipData& tips, const SummaryLabel& label, int reps, Rng& rng)
    -> McEstimate {
  if (reps < 2) {
    throw std::invalid_argument("variance estimates need at least two replicates");
  }
  const auto draws = mc_summary_draws(phylo, cache, model, std::span{&omega, 1}, tips, label, reps, rng);
  const auto s = summarize(draws[0]);
  return {reps, s.mean, s.variance, s.se_mean, s.se_variance};
}

auto expected_conditional_moments(const Phylogeny& phylo, const BranchMomentCache& cache, const RateModel& model,
                                  const BranchSet& omega, int num_datasets, Rng& rng) -> ExpectedConditional {
  if (num_datasets < 2) {
    throw std::invalid_argument("need at least two simulated datasets");
  }
  const auto sim = ColumnSimulator{phylo, model};
  auto var = std::vector<double>(num_datasets);
  auto mean = std::vector<double>(num_datasets);
  for (auto k = 0; k < num_datasets; ++k) {
    const auto r = posterior_moments(phylo, cache, omega, sim.sample(rng));
    var[k] = r.variance;
    mean[k] = r.mean;
  }
  auto out = ExpectedConditional{};
  out.num_datasets = num_datasets;
  out.variance1 = summarize(var);
  out.mean1 = summarize(mean);
  return out;
}

auto expected_conditional_moments(const Phylogeny& phylo, const BranchMomentCache& cache, const RateModel& model,
                                  const BranchSet& omega1, const BranchSet& omega2, int num_datasets, Rng& rng)
    -> ExpectedConditional {
  if (num_datasets < 2) {
    throw std::invalid_argument("need at least two simulated datasets");
  }
  const auto sim = ColumnSimulator{phylo, model};
  auto v1 = std::vector<double>(num_datasets);
  auto v2 = std::vector<double>(num_datasets);
  auto c = std::vector<double>(num_datasets);
  auto e1 = std::vector<double>(num_datasets);
  auto e2 = std::vector<double>(num_datasets);
  for (auto k = 0; k < num_datasets; ++k) {
    const auto r = posterior_covariance(phylo, cache, omega1, omega2, sim.sample(rng));
    v1[k] = r.variance1;
    v2[k] = r.variance2;
    c[k] = r.covariance;
    e1[k] = r.mean1;
    e2[k] = r.mean2;
  }
  auto out = ExpectedConditional{};
  out.num_datasets = num_datasets;
  out.variance1 = summarize(v1);
  out.variance2 = summarize(v2);
  out.covariance = summarize(c);
  out.mean1 = summarize(e1);
  out.mean2 = summarize(e2);
  return out;
}

}  // namespace phylomoments
