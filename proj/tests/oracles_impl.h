#pragma once

#include <random>

namespace oracle {

template <typename Rng>
auto random_model(int m, Rng& rng) -> RateModel {
  auto unif = std::uniform_real_distribution<double>{0.2, 1.0};
  auto pi = phylomoments::Vector{m};
  for (auto i = 0; i < m; ++i) {
    pi[i] = unif(rng);
  }
  pi /= pi.sum();
  auto s = Matrix{Matrix::Zero(m, m)};
  for (auto i = 0; i < m; ++i) {
    for (auto j = i + 1; j < m; ++j) {
      s(i, j) = s(j, i) = std::uniform_real_distribution<double>{0.1, 2.0}(rng);
    }
  }
  auto q = Matrix{Matrix::Zero(m, m)};
  for (auto i = 0; i < m; ++i) {
    for (auto j = 0; j < m; ++j) {
      if (i != j) {
        q(i, j) = s(i, j) * pi[j];
      }
    }
    q(i, i) = -q.row(i).sum();
  }
  return RateModel::from_rates(q, pi);
}

}  // namespace oracle
