#include "phylomoments/random_tree.h"

#include <random>
#include <stdexcept>

namespace phylomoments {

auto random_phylogeny(int num_tips, Rng& rng, double mean_length) -> Phylogeny {
  if (num_tips < 2) {
    throw std::invalid_argument("a tree needs at least two tips");
  }
  if (!(mean_length > 0.0)) {
    throw std::invalid_argument("mean branch length must be positive");
  }
  auto draft = Phylogeny::Draft{};
  const auto nodes = 2 * num_tips - 1;
  draft.parent.assign(nodes, -1);
  draft.length.assign(nodes, 0.0);
  draft.name.assign(nodes, "");
  auto active = std::vector<int>{};
  for (auto k = 0; k < num_tips; ++k) {
    draft.name[k] = "t" + std::to_string(k + 1);
    active.push_back(k);
  }
  auto expo = std::exponential_distribution<double>{1.0 / mean_length};
  auto next = num_tips;
  while (active.size() > 1) {
    auto pick = [&] {
      const auto i = std::uniform_int_distribution<std::size_t>{0, active.size() - 1}(rng);
      const auto node = active[i];
      active[i] = active.back();
      active.pop_back();
      return node;
    };
    const auto a = pick();
    const auto b = pick();
    draft.parent[a] = next;
    draft.parent[b] = next;
    draft.length[a] = expo(rng);
    draft.length[b] = expo(rng);
    active.push_back(next++);
  }
  return Phylogeny::from_draft(draft);
}

}  // namespace phylomoments
