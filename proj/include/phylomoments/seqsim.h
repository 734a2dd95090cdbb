#pragma once

#include <vector>

#include "phylomoments/alignment.h"
#include "phylomoments/ctmc.h"
#include "phylomoments/moments.h"
#include "phylomoments/rng.h"

namespace phylomoments {

// Draws complete columns: root state from pi, each child from the parent's row of P(t_b).
class ColumnSimulator {
 public:
  ColumnSimulator(const Phylogeny& phylo, const RateModel& model);

  // States of every node, indexed by node.
  void sample_nodes(Rng& rng, std::vector<int>& states) const;
  auto sample(Rng& rng) const -> TipData;

 private:
  const Phylogeny* phylo_;
  int m_;
  std::vector<double> pi_cdf_;
  std::vector<double> row_cdf_;  // per branch, m x m cumulative rows
};

auto simulate_alignment(const Phylogeny& phylo, const RateModel& model, int num_sites, Rng& rng) -> Alignment;

// Column `i` drawn from make_rng(seed, i), so the result is the same for any thread count.
auto simulate_alignment_streams(const Phylogeny& phylo, const RateModel& model, int num_sites, std::uint64_t seed,
                                int threads = 1) -> Alignment;

}  // namespace phylomoments
