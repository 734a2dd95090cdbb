#include "phylomoments/seqsim.h"

#include <algorithm>
#include <stdexcept>
#include <thread>

namespace phylomoments {

namespace {

auto draw(const double* cdf, int m, Rng& rng) -> int {
  const auto u = uniform01(rng) * cdf[m - 1];
  const auto* it = std::upper_bound(cdf, cdf + m, u);
  auto k = static_cast<int>(it - cdf);
  // never land on a zero-probability state at the top end
  while (k > 0 && (k >= m || cdf[k] == cdf[k - 1])) {
    --k;
  }
  return k;
}

}  // namespace

ColumnSimulator::ColumnSimulator(const Phylogeny& phylo, const RateModel& model)
    : phylo_(&phylo), m_(model.num_states()) {
  pi_cdf_.resize(m_);
  auto acc = 0.0;
  for (auto i = 0; i < m_; ++i) {
    acc += model.stationary()[i];
    pi_cdf_[i] = acc;
  }
  row_cdf_.resize(static_cast<std::size_t>(phylo.num_branches()) * m_ * m_);
  for (auto b = 0; b < phylo.num_branches(); ++b) {
    const auto p = transition_matrix(model, phylo.length(b));
    for (auto i = 0; i < m_; ++i) {
      auto* row = &row_cdf_[(static_cast<std::size_t>(b) * m_ + i) * m_];
      auto s = 0.0;
      for (auto j = 0; j < m_; ++j) {
        s += p(i, j);
        row[j] = s;
      }
    }
  }
}

void ColumnSimulator::sample_nodes(Rng& rng, std::vector<int>& states) const {
  states.resize(phylo_->num_nodes());
  states[phylo_->root()] = draw(pi_cdf_.data(), m_, rng);
  // branches are in pre-order, so the parent is always filled first
  for (auto b = 0; b < phylo_->num_branches(); ++b) {
    const auto parent = states[phylo_->parent_node(b)];
    states[phylo_->child_node(b)] = draw(&row_cdf_[(static_cast<std::size_t>(b) * m_ + parent) * m_], m_, rng);
  }
}

auto ColumnSimulator::sample(Rng& rng) const -> TipData {
  thread_local auto states = std::vector<int>{};
  sample_nodes(rng, states);
  auto tips = TipData{};
  tips.states.resize(phylo_->num_tips());
  for (auto k = 0; k < phylo_->num_tips(); ++k) {
    tips.states[k] = single_state(states[phylo_->tip_node(k)]);
  }
  return tips;
}

auto simulate_alignment(const Phylogeny& phylo, const RateModel& model, int num_sites, Rng& rng) -> Alignment {
  if (num_sites < 0) {
    throw std::invalid_argument("number of sites must be nonnegative");
  }
  const auto sim = ColumnSimulator{phylo, model};
  auto a = Alignment{phylo.tip_names(), {}, model.num_states()};
  a.columns.reserve(num_sites);
  for (auto i = 0; i < num_sites; ++i) {
    a.columns.push_back(sim.sample(rng));
  }
  return a;
}

auto simulate_alignment_streams(const Phylogeny& phylo, const RateModel& model, int num_sites, std::uint64_t seed,
                                int threads) -> Alignment {
  if (num_sites < 0) {
    throw std::invalid_argument("number of sites must be nonnegative");
  }
  const auto sim = ColumnSimulator{phylo, model};
  auto a = Alignment{phylo.tip_names(), std::vector<TipData>(num_sites), model.num_states()};
  threads = std::clamp(threads, 1, std::max(1, num_sites));
  auto work = [&](int worker) {
    for (auto i = worker; i < num_sites; i += threads) {
      auto rng = make_rng(seed, static_cast<std::uint64_t>(i));
      a.columns[i] = sim.sample(rng);
    }
  };
  if (threads == 1) {
    work(0);
  } else {
    auto pool = std::vector<std::jthread>{};
    for (auto t = 0; t < threads; ++t) {
      pool.emplace_back(work, t);
    }
  }
  return a;
}

}  // namespace phylomoments
