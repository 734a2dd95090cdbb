#include "phylomoments/stats.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include <boost/math/distributions/binomial.hpp>

namespace phylomoments {

auto normal_cdf(double x, double mean, double variance) -> double {
  if (!(variance > 0.0)) {
    throw std::invalid_argument("normal variance must be positive");
  }
  return 0.5 * std::erfc(-(x - mean) / std::sqrt(2.0 * variance));
}

auto summarize(std::span<const double> values) -> SampleSummary {
  auto s = SampleSummary{};
  s.count = static_cast<int>(values.size());
  if (s.count == 0) {
    return s;
  }
  auto sum = 0.0;
  for (auto v : values) {
    sum += v;
  }
  s.mean = sum / s.count;
  if (s.count < 2) {
    return s;
  }
  auto m2 = 0.0;
  auto m4 = 0.0;
  for (auto v : values) {
    const auto d = v - s.mean;
    m2 += d * d;
    m4 += d * d * d * d;
  }
  const auto n = static_cast<double>(s.count);
  s.variance = m2 / (n - 1.0);
  s.se_mean = std::sqrt(s.variance / n);
  // Var(s^2) ~ (mu4 - (n-3)/(n-1) sigma^4) / n
  const auto mu4 = m4 / n;
  const auto sigma2 = m2 / n;
  s.se_variance = std::sqrt(std::max(0.0, (mu4 - (n - 3.0) / (n - 1.0) * sigma2 * sigma2) / n));
  return s;
}

auto ks_uniform(std::span<const double> values) -> KsResult {
  if (values.empty()) {
    throw std::invalid_argument("KS test needs at least one value");
  }
  auto sorted = std::vector<double>(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const auto n = static_cast<double>(sorted.size());
  auto d = 0.0;
  for (auto i = std::size_t{0}; i < sorted.size(); ++i) {
    const auto x = std::clamp(sorted[i], 0.0, 1.0);
    d = std::max({d, (i + 1) / n - x, x - i / n});
  }
  // Kolmogorov limiting distribution with Stephens' small-sample correction.
  const auto lambda = (std::sqrt(n) + 0.12 + 0.11 / std::sqrt(n)) * d;
  auto p = 0.0;
  if (lambda < 0.2) {
    p = 1.0;
  } else {
    for (auto k = 1; k <= 200; ++k) {
      const auto term = std::exp(-2.0 * k * k * lambda * lambda);
      p += (k % 2 == 1 ? 2.0 : -2.0) * term;
      if (term < 1e-18) {
        break;
      }
    }
  }
  return {d, std::clamp(p, 0.0, 1.0)};
}

auto sign_test_upper(int successes, int trials) -> double {
  if (trials <= 0 || successes < 0 || successes > trials) {
    throw std::invalid_argument("sign test counts out of range");
  }
  if (successes == 0) {
    return 1.0;
  }
  const auto dist = boost::math::binomial_distribution<double>(trials, 0.5);
  return boost::math::cdf(boost::math::complement(dist, successes - 1));
}

}  // namespace phylomoments
