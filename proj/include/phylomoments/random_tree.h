#pragma once

#include "phylomoments/phylogeny.h"
#include "phylomoments/rng.h"

namespace phylomoments {

// Random rooted binary tree on tips t1..tn: lineages are merged in random pairs,
// and branch lengths are exponential with the given mean.
auto random_phylogeny(int num_tips, Rng& rng, double mean_length = 0.1) -> Phylogeny;

}  // namespace phylomoments
