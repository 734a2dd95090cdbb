#include <gtest/gtest.h>

#include <cmath>

#include "oracles.h"
#include "phylomoments/ctmc.h"
#include "phylomoments/rng.h"

using namespace phylomoments;

TEST(Ctmc, TwoStateTransitionClosedForm) {
  const auto model = build_two_state(1.0, 1.0);
  const auto p = transition_matrix(model, 0.5);
  EXPECT_NEAR(p(0, 0), 0.5 + 0.5 * std::exp(-1.0), 1e-14);
  EXPECT_NEAR(p(0, 0), 0.6839397, 1e-7);
  EXPECT_NEAR(p(0, 1), 0.5 - 0.5 * std::exp(-1.0), 1e-14);
}

TEST(Ctmc, JukesCantorTransition) {
  const auto model = build_jc69();
  const auto p = transition_matrix(model, 0.3);
  EXPECT_NEAR(p(2, 2), 0.25 + 0.75 * std::exp(-0.4), 1e-14);
  EXPECT_NEAR(p(2, 2), 0.752740, 1e-6);
  EXPECT_NEAR(model.mean_rate(), 1.0, 1e-14);
}

TEST(Ctmc, PadeAgreesWithSpectral) {
  auto rng = make_rng(7);
  for (auto rep = 0; rep < 50; ++rep) {
    const auto model = oracle::random_model(2 + rep % 5, rng);
    for (auto t : {0.0, 1e-9, 0.01, 0.5, 3.0, 40.0}) {
      const auto a = transition_matrix(model, t);
      const auto b = transition_matrix_spectral(model, t);
      EXPECT_LT((a - b).cwiseAbs().maxCoeff(), 1e-12);
      EXPECT_LT((a.rowwise().sum().array() - 1.0).abs().maxCoeff(), 1e-13);
    }
  }
}

TEST(Ctmc, ExpmMatchesSeriesForSmallMatrix) {
  auto a = Matrix{2, 2};
  a << 0.0, 1.0, -1.0, 0.0;  // rotation generator
  const auto e = expm(a);
  EXPECT_NEAR(e(0, 0), std::cos(1.0), 1e-15);
  EXPECT_NEAR(e(0, 1), std::sin(1.0), 1e-15);
  const auto big = expm(60.0 * a);
  EXPECT_NEAR(big(0, 0), std::cos(60.0), 1e-12);
}

TEST(Ctmc, ModelValidation) {
  auto q = Matrix{2, 2};
  q << -1, 1, 1, -1;
  auto pi = Vector{2};
  pi << 0.5, 0.5;
  EXPECT_NO_THROW(RateModel::from_rates(q, pi));
  auto bad_rows = q;
  bad_rows(0, 0) = -0.9;
  EXPECT_THROW(RateModel::from_rates(bad_rows, pi), ModelError);
  auto bad_pi = pi;
  bad_pi << 0.6, 0.5;
  EXPECT_THROW(RateModel::from_rates(q, bad_pi), ModelError);
  auto irreversible = Matrix{3, 3};
  irreversible << -1, 1, 0, 0, -1, 1, 1, 0, -1;
  auto pi3 = Vector{3};
  pi3 << 1.0 / 3, 1.0 / 3, 1.0 / 3;
  EXPECT_THROW(RateModel::from_rates(irreversible, pi3), ModelError);
  const double freqs[] = {0.3, 0.3, 0.3, 0.3};
  const double exch[] = {1, 1, 1, 1, 1, 1};
  EXPECT_THROW(build_gtr(exch, freqs), ModelError);
  EXPECT_THROW(build_two_state(0.0, 1.0), ModelError);
  EXPECT_THROW(transition_matrix(build_jc69(), -1.0), ModelError);
}

TEST(Ctmc, LabelValidation) {
  const auto model = build_jc69();
  EXPECT_THROW(SummaryLabel::counts({{0, 0}}).validate(4), ModelError);
  EXPECT_THROW(SummaryLabel::counts({{0, 4}}).validate(4), ModelError);
  EXPECT_THROW(SummaryLabel::dwelling({1, 0}).validate(4), ModelError);
  EXPECT_THROW(SummaryLabel::dwelling({1, 0, 2, 0}).validate(4), ModelError);
  EXPECT_THROW(branch_moments(model, SummaryLabel::dwelling({1, 0}), 1.0), ModelError);
}

TEST(Ctmc, TwoStateRowSums) {
  // unit exit rates: expected jumps and expected total time both equal t
  const auto model = build_two_state(1.0, 1.0);
  for (auto t : {0.1, 0.7, 2.0}) {
    const auto counts = branch_moments(model, SummaryLabel::all_substitutions(2), t);
    const auto dwell = branch_moments(model, SummaryLabel::dwelling({1, 1}), t);
    for (auto i = 0; i < 2; ++i) {
      EXPECT_NEAR(counts.first.row(i).sum(), t, 1e-12);
      EXPECT_NEAR(dwell.first.row(i).sum(), t, 1e-12);
      // time in all states is exactly t, so E[h^2] = t^2
      EXPECT_NEAR(dwell.second.row(i).sum(), t * t, 1e-12);
    }
  }
}

TEST(Ctmc, TwoStateDwellingClosedForm) {
  // expected time in state 0 starting from 0 (no end conditioning):
  // integral of p00(u) du = t/2 + (1 - e^{-2t})/4 for alpha = beta = 1
  const auto model = build_two_state(1.0, 1.0);
  const auto t = 0.8;
  const auto m = branch_moments(model, SummaryLabel::dwelling({1, 0}), t);
  EXPECT_NEAR(m.first.row(0).sum(), t / 2 + (1 - std::exp(-2 * t)) / 4, 1e-13);
}

TEST(Ctmc, BlockExponentialMatchesSeries) {
  auto rng = make_rng(99);
  for (auto rep = 0; rep < 40; ++rep) {
    const auto m = 2 + rep % 4;
    const auto model = oracle::random_model(m, rng);
    auto label = SummaryLabel{};
    if (rep % 2 == 0) {
      label = SummaryLabel::counts({{0, 1}, {1, 0}, {m - 1, 0}});
    } else {
      auto mask = std::vector<int>(m, 0);
      mask[rep % m] = 1;
      label = SummaryLabel::dwelling(mask);
    }
    const auto t = 0.05 + 0.5 * (rep % 5);
    const auto exact = branch_moments(model, label, t);
    const auto series = oracle::series_moments(model, label, t);
    ASSERT_LT(series.tail_bound, 1e-12);
    EXPECT_LT((exact.transition - series.transition).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((exact.first - series.first).cwiseAbs().maxCoeff(), 1e-12);
    auto raw = exact.second;
    if (label.kind == SummaryKind::substitution_count) {
      raw += exact.first;
    }
    EXPECT_LT((raw - series.second_raw).cwiseAbs().maxCoeff(), 1e-11);
  }
}

TEST(Ctmc, ZeroLengthBranch) {
  const auto m = branch_moments(build_jc69(), SummaryLabel::all_substitutions(4), 0.0);
  EXPECT_EQ(m.transition, Matrix::Identity(4, 4));
  EXPECT_EQ(m.first.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(m.second.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Ctmc, ScalePhylogeny) {
  const auto t = parse_newick("(((A:0.7,B:0.8):0.3,C:0.4):0.1,(D:0.5,E:0.6):0.2);");
  const auto sub = subtree_branches(t, 1);
  const auto s = scale_phylogeny(t, 0.5, 0.2, sub);
  EXPECT_NEAR(s.length(1), 0.3 * 0.5 * 0.2, 1e-15);
  EXPECT_NEAR(s.length(4), 0.4 * 0.5, 1e-15);
  EXPECT_THROW(scale_phylogeny(t, 1.2, 1.0, sub), ModelError);
  EXPECT_THROW(scale_phylogeny(t, 1.0, 0.5, BranchSet{}), ModelError);
  auto not_sub = sub;
  not_sub.erase(2);
  EXPECT_THROW(scale_phylogeny(t, 1.0, 0.5, not_sub), ModelError);
}
