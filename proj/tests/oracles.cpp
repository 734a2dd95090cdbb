#include "oracles.h"

#include <cmath>
#include <stdexcept>

namespace oracle {

auto series_moments(const RateModel& model, const SummaryLabel& label, double t, double tol) -> SeriesMoments {
  const auto m = model.num_states();
  const auto& q = model.rates();
  auto mu = 0.0;
  for (auto i = 0; i < m; ++i) {
    mu = std::max(mu, -q(i, i));
  }
  const Matrix id = Matrix::Identity(m, m);
  auto out = SeriesMoments{Matrix::Zero(m, m), Matrix::Zero(m, m), Matrix::Zero(m, m), 0.0};
  if (t == 0.0 || mu == 0.0) {
    out.transition = id;
    if (label.kind == phylomoments::SummaryKind::dwelling_time) {
      // no jumps: the path sits in its start state for the whole branch
      for (auto i = 0; i < m; ++i) {
        out.first(i, i) = label.state_mask[i] * t;
        out.second_raw(i, i) = label.state_mask[i] * t * t;
      }
    }
    return out;
  }
  const Matrix r = id + q / mu;
  const auto rate = mu * t;
  const auto pois = [&](int n) { return std::exp(n * std::log(rate) - rate - std::lgamma(n + 1.0)); };
  // scale of the worst tail term: counts grow like n^2, dwelling like t^2 n^2
  const auto scale = std::max(1.0, t * t);
  auto tail_after = [&](int n) {
    auto s = 0.0;
    for (auto k = n + 1;; ++k) {
      const auto term = pois(k) * (k + 2.0) * (k + 2.0);
      s += term;
      if (k > rate && term < 1e-30) {
        break;
      }
    }
    return s * scale;
  };

  if (label.kind == phylomoments::SummaryKind::substitution_count) {
    auto rl = Matrix{Matrix::Zero(m, m)};
    for (auto [i, j] : label.pairs) {
      rl(i, j) = q(i, j) / mu;
    }
    Matrix a0 = id;
    Matrix a1 = Matrix::Zero(m, m);
    Matrix a2 = Matrix::Zero(m, m);
    for (auto n = 0;; ++n) {
      const auto w = pois(n);
      out.transition += w * a0;
      out.first += w * a1;
      out.second_raw += 2.0 * w * a2;
      if (n > rate) {
        out.tail_bound = tail_after(n);
        if (out.tail_bound < tol) {
          break;
        }
      }
      Matrix next2 = a2 * r + a1 * rl;
      Matrix next1 = a1 * r + a0 * rl;
      a0 = a0 * r;
      a1 = next1;
      a2 = next2;
    }
    out.second_raw += out.first;  // factorial -> raw
    return out;
  }

  auto w = Matrix{Matrix::Zero(m, m)};
  for (auto i = 0; i < m; ++i) {
    w(i, i) = label.state_mask[i];
  }
  Matrix rn = id;          // R^n
  Matrix b1 = w;           // sum_k R^k W R^(n-k)
  Matrix b2 = w;           // sum_{k<=l} R^k W R^(l-k) W R^(n-l)
  for (auto n = 0;; ++n) {
    const auto p = pois(n);
    out.transition += p * rn;
    out.first += p * t / (n + 1.0) * b1;
    out.second_raw += 2.0 * p * t * t / ((n + 1.0) * (n + 2.0)) * b2;
    if (n > rate) {
      out.tail_bound = tail_after(n);
      if (out.tail_bound < tol) {
        break;
      }
    }
    rn = rn * r;
    b1 = b1 * r + rn * w;
    b2 = b2 * r + b1 * w;
  }
  return out;
}

auto enumerate(const Phylogeny& phylo, const RateModel& model, const SummaryLabel& label, const BranchSet& omega1,
               const BranchSet& omega2, const TipData& tips) -> Enumerated {
  const auto m = model.num_states();
  const auto nb = phylo.num_branches();
  const auto nodes = phylo.num_nodes();
  auto per_branch = std::vector<SeriesMoments>{};
  for (auto b = 0; b < nb; ++b) {
    per_branch.push_back(series_moments(model, label, phylo.length(b)));
  }
  auto state = std::vector<int>(nodes, 0);
  // candidate states per node
  auto options = std::vector<std::vector<int>>(nodes);
  for (auto u = 0; u < nodes; ++u) {
    for (auto s = 0; s < m; ++s) {
      if (!phylo.is_tip(u) || ((tips.states[phylo.tip_of(u)] >> s) & 1u)) {
        options[u].push_back(s);
      }
    }
  }
  auto pos = std::vector<std::size_t>(nodes, 0);
  auto p = std::vector<double>(nb);
  auto e1 = std::vector<double>(nb);
  auto e2 = std::vector<double>(nb);
  auto prefix = std::vector<double>(nb + 1);
  auto suffix = std::vector<double>(nb + 1);
  auto result = Enumerated{};
  for (;;) {
    for (auto u = 0; u < nodes; ++u) {
      state[u] = options[u][pos[u]];
    }
    auto weight = phylo.is_tip(0) ? 1.0 : model.stationary()[state[0]];
    for (auto b = 0; b < nb; ++b) {
      const auto i = state[phylo.parent_node(b)];
      const auto j = state[phylo.child_node(b)];
      p[b] = per_branch[b].transition(i, j);
      e1[b] = per_branch[b].first(i, j);
      e2[b] = per_branch[b].second_raw(i, j);
    }
    prefix[0] = 1.0;
    for (auto b = 0; b < nb; ++b) {
      prefix[b + 1] = prefix[b] * p[b];
    }
    suffix[nb] = 1.0;
    for (auto b = nb - 1; b >= 0; --b) {
      suffix[b] = suffix[b + 1] * p[b];
    }
    result.likelihood += weight * prefix[nb];
    for (auto b = 0; b < nb; ++b) {
      const auto others = prefix[b] * suffix[b + 1];
      if (omega1.contains(b)) {
        result.first1 += weight * e1[b] * others;
        result.second1 += weight * e2[b] * others;
      }
      if (omega2.contains(b)) {
        result.first2 += weight * e1[b] * others;
      }
      if (omega1.contains(b) && omega2.contains(b)) {
        result.product += weight * e2[b] * others;
      }
    }
    for (auto b = 0; b < nb; ++b) {
      for (auto c = 0; c < nb; ++c) {
        if (b == c) {
          continue;
        }
        const auto lo = std::min(b, c);
        const auto hi = std::max(b, c);
        auto others = prefix[lo] * suffix[hi + 1];
        for (auto k = lo + 1; k < hi; ++k) {
          others *= p[k];
        }
        const auto term = weight * e1[b] * e1[c] * others;
        if (omega1.contains(b) && omega1.contains(c)) {
          result.second1 += term;
        }
        if (omega1.contains(b) && omega2.contains(c)) {
          result.product += term;
        }
      }
    }
    // next assignment
    auto u = 0;
    while (u < nodes && ++pos[u] == options[u].size()) {
      pos[u] = 0;
      ++u;
    }
    if (u == nodes) {
      break;
    }
  }
  return result;
}

auto all_datasets(int num_tips, int num_states) -> std::vector<TipData> {
  auto out = std::vector<TipData>{};
  auto digits = std::vector<int>(num_tips, 0);
  for (;;) {
    auto d = TipData{};
    for (auto s : digits) {
      d.states.push_back(phylomoments::single_state(s));
    }
    out.push_back(std::move(d));
    auto k = 0;
    while (k < num_tips && ++digits[k] == num_states) {
      digits[k] = 0;
      ++k;
    }
    if (k == num_tips) {
      break;
    }
  }
  return out;
}

}  // namespace oracle
