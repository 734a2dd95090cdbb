#pragma once

#include <span>

namespace phylomoments {

auto normal_cdf(double x, double mean, double variance) -> double;

struct SampleSummary {
  int count = 0;
  double mean = 0.0;
  double variance = 0.0;     // unbiased
  double se_mean = 0.0;
  double se_variance = 0.0;  // from the fourth central moment
};

auto summarize(std::span<const double> values) -> SampleSummary;

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
};

// One-sample Kolmogorov-Smirnov test against Uniform(0, 1).
auto ks_uniform(std::span<const double> values) -> KsResult;

// P(X >= successes) for X ~ Binomial(trials, 1/2).
auto sign_test_upper(int successes, int trials) -> double;

}  // namespace phylomoments
