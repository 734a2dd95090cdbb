#include "phylomoments/rng.h"

#include <stdexcept>

namespace phylomoments {

auto splitmix64(std::uint64_t x) -> std::uint64_t {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

auto make_rng(std::uint64_t seed, std::uint64_t stream) -> Rng {
  auto a = splitmix64(seed);
  auto b = splitmix64(a ^ splitmix64(stream + 0x632be59bd9b4e019ULL));
  auto seq = std::seed_seq{static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                           static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32)};
  return Rng{seq};
}

auto uniform01(Rng& rng) -> double {
  // 53 random bits, in [0, 1)
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

auto sample_index(std::span<const double> weights, Rng& rng) -> int {
  auto total = 0.0;
  for (auto w : weights) {
    total += w;
  }
  if (!(total > 0.0)) {
    throw std::invalid_argument("cannot sample from zero weights");
  }
  auto u = uniform01(rng) * total;
  auto last = -1;
  for (auto i = 0; i < static_cast<int>(weights.size()); ++i) {
    if (weights[i] <= 0.0) {
      continue;
    }
    last = i;
    if (u < weights[i]) {
      return i;
    }
    u -= weights[i];
  }
  return last;
}

}  // namespace phylomoments
