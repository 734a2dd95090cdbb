#pragma once

#include <cstdint>
#include <random>
#include <span>

namespace phylomoments {

using Rng = std::mt19937_64;

auto splitmix64(std::uint64_t x) -> std::uint64_t;

// Independent generator for substream `stream` of `seed`.  Parallel code gives each
// site or replicate its own stream so results do not depend on scheduling.
auto make_rng(std::uint64_t seed, std::uint64_t stream = 0) -> Rng;

auto uniform01(Rng& rng) -> double;

// Index drawn with probability proportional to `weights` (nonnegative, positive sum).
auto sample_index(std::span<const double> weights, Rng& rng) -> int;

}  // namespace phylomoments
