#include <gtest/gtest.h>

#include <cmath>

#include "oracles.h"
#include "phylomoments/random_tree.h"
#include "phylomoments/simmap.h"

using namespace phylomoments;

namespace {

auto jumps(const BranchPath& p) -> double { return static_cast<double>(p.times.size()); }

auto time_in(const BranchPath& p, int state) -> double {
  auto total = 0.0;
  auto current = p.start;
  auto from = 0.0;
  for (auto k = 0u; k < p.times.size(); ++k) {
    if (current == state) {
      total += p.times[k] - from;
    }
    current = p.states[k];
    from = p.times[k];
  }
  if (current == state) {
    total += p.length - from;
  }
  return total;
}

}  // namespace

TEST(Simmap, PathsAreWellFormed) {
  auto rng = make_rng(1);
  const auto model = oracle::random_model(4, rng);
  const auto sampler = PathSampler{model};
  for (auto rep = 0; rep < 2000; ++rep) {
    const auto from = static_cast<int>(rng() % 4);
    const auto to = static_cast<int>(rng() % 4);
    const auto t = 0.01 + 2.0 * uniform01(rng);
    const auto p = sampler.sample(from, to, t, rng);
    ASSERT_EQ(p.start, from);
    ASSERT_EQ(p.end(), to);
    ASSERT_EQ(p.times.size(), p.states.size());
    auto prev_time = 0.0;
    auto prev_state = from;
    for (auto k = 0u; k < p.times.size(); ++k) {
      ASSERT_GT(p.times[k], prev_time);
      ASSERT_LT(p.times[k], t);
      ASSERT_NE(p.states[k], prev_state);  // virtual jumps are dropped
      prev_time = p.times[k];
      prev_state = p.states[k];
    }
  }
}

TEST(Simmap, TwoStateParity) {
  auto rng = make_rng(2);
  const auto model = build_two_state(1.3, 0.7);
  const auto sampler = PathSampler{model};
  for (auto rep = 0; rep < 3000; ++rep) {
    const auto to = rep % 2;
    const auto p = sampler.sample(0, to, 1.5, rng);
    EXPECT_EQ(static_cast<int>(p.times.size()) % 2, to);
  }
}

TEST(Simmap, ShortBranchHasNoJumpsWhenEndsAgree) {
  auto rng = make_rng(3);
  const auto sampler = PathSampler{build_jc69()};
  auto total = 0.0;
  for (auto rep = 0; rep < 1000; ++rep) {
    total += jumps(sampler.sample(2, 2, 1e-9, rng));
  }
  EXPECT_EQ(total, 0.0);
  const auto p = sampler.sample(1, 3, 1e-9, rng);
  EXPECT_EQ(p.times.size(), 1u);
  const auto zero = sampler.sample(1, 1, 0.0, rng);
  EXPECT_TRUE(zero.times.empty());
  EXPECT_THROW(sampler.sample(1, 2, 0.0, rng), std::exception);
}

TEST(Simmap, ConditionalJumpMeanMatchesExact) {
  auto rng = make_rng(4);
  const auto model = oracle::random_model(3, rng);
  const auto sampler = PathSampler{model};
  const auto label = SummaryLabel::all_substitutions(3);
  const auto t = 0.9;
  const auto exact = branch_moments(model, label, t);
  const auto reps = 20000;
  for (auto i = 0; i < 3; ++i) {
    for (auto j = 0; j < 3; ++j) {
      auto draws = std::vector<double>{};
      for (auto r = 0; r < reps; ++r) {
        draws.push_back(jumps(sampler.sample(i, j, t, rng)));
      }
      const auto s = summarize(draws);
      const auto want = exact.first(i, j) / exact.transition(i, j);
      EXPECT_LT(std::abs(s.mean - want), 4.5 * s.se_mean) << i << "->" << j;
      const auto want_var = (exact.second(i, j) + exact.first(i, j)) / exact.transition(i, j) - want * want;
      EXPECT_LT(std::abs(s.variance - want_var), 4.5 * s.se_variance) << i << "->" << j;
    }
  }
}

TEST(Simmap, UniformizationAgreesWithRejection) {
  auto rng = make_rng(5);
  const auto model = build_two_state(2.0, 0.5);
  const auto sampler = PathSampler{model};
  auto uni_jumps = std::vector<double>{};
  auto rej_jumps = std::vector<double>{};
  auto uni_time = std::vector<double>{};
  auto rej_time = std::vector<double>{};
  for (auto r = 0; r < 20000; ++r) {
    const auto a = sampler.sample(1, 0, 1.2, rng);
    const auto b = sample_branch_path_rejection(1, 0, 1.2, model, rng);
    uni_jumps.push_back(jumps(a));
    rej_jumps.push_back(jumps(b));
    uni_time.push_back(time_in(a, 0));
    rej_time.push_back(time_in(b, 0));
  }
  const auto su = summarize(uni_jumps);
  const auto sr = summarize(rej_jumps);
  EXPECT_LT(std::abs(su.mean - sr.mean), 4.5 * std::hypot(su.se_mean, sr.se_mean));
  const auto tu = summarize(uni_time);
  const auto tr = summarize(rej_time);
  EXPECT_LT(std::abs(tu.mean - tr.mean), 4.5 * std::hypot(tu.se_mean, tr.se_mean));
  EXPECT_LT(std::abs(tu.variance - tr.variance), 4.5 * std::hypot(tu.se_variance, tr.se_variance));
}

TEST(Simmap, PathSummaries) {
  auto path = BranchPath{0, 2.0, {0.5, 1.5}, {1, 0}};
  EXPECT_EQ(path_summary(path, SummaryLabel::all_substitutions(2)), 2.0);
  EXPECT_EQ(path_summary(path, SummaryLabel::counts({{0, 1}})), 1.0);
  EXPECT_DOUBLE_EQ(path_summary(path, SummaryLabel::dwelling({1, 0})), 1.0);
  EXPECT_DOUBLE_EQ(path_summary(path, SummaryLabel::dwelling({0, 1})), 1.0);
}

TEST(Simmap, InternalStatesFollowPosterior) {
  // two tips: P(root = j | a, b) is proportional to pi_j P1(j, a) P2(j, b)
  const auto phylo = parse_newick("(x:0.3,y:0.8);");
  auto rng = make_rng(6);
  const auto model = oracle::random_model(3, rng);
  const auto cache = build_transition_cache(model, phylo);
  const int observed[] = {0, 2};
  const auto tips = TipData::observed(observed);
  const auto p1 = transition_matrix(model, 0.3);
  const auto p2 = transition_matrix(model, 0.8);
  auto weight = std::vector<double>(3);
  auto total = 0.0;
  for (auto j = 0; j < 3; ++j) {
    weight[j] = model.stationary()[j] * p1(j, 0) * p2(j, 2);
    total += weight[j];
  }
  const auto reps = 30000;
  auto counts = std::vector<int>(3, 0);
  for (auto r = 0; r < reps; ++r) {
    const auto states = sample_internal_states(phylo, cache, tips, rng);
    ASSERT_EQ(states[phylo.tip_node(0)], 0);
    ASSERT_EQ(states[phylo.tip_node(1)], 2);
    ++counts[states[phylo.root()]];
  }
  for (auto j = 0; j < 3; ++j) {
    const auto p = weight[j] / total;
    EXPECT_NEAR(counts[j] / double(reps), p, 4.5 * std::sqrt(p * (1 - p) / reps));
  }
}

TEST(Simmap, AmbiguousTipsAreResolved) {
  const auto phylo = parse_newick("((a:0.2,b:0.2):0.1,c:0.5);");
  auto rng = make_rng(9);
  const auto cache = build_transition_cache(build_jc69(), phylo);
  auto tips = TipData{{single_state(0) | single_state(2), all_states(4), single_state(1)}};
  for (auto r = 0; r < 500; ++r) {
    const auto states = sample_internal_states(phylo, cache, tips, rng);
    for (auto i = 0; i < 3; ++i) {
      EXPECT_TRUE(tips.states[i] & single_state(states[phylo.tip_node(i)]));
    }
  }
}

TEST(Simmap, MonteCarloMomentsMatchExact) {
  auto rng = make_rng(10);
  auto misses = 0;
  const auto trials = 20;
  for (auto rep = 0; rep < trials; ++rep) {
    const auto phylo = random_phylogeny(5, rng, 0.3);
    const auto model = oracle::random_model(4, rng);
    const auto label = rep % 2 == 0 ? SummaryLabel::all_substitutions(4) : SummaryLabel::dwelling({1, 1, 0, 0});
    const auto cache = build_cache(model, phylo, label);
    auto states = std::vector<int>{};
    for (auto i = 0; i < 5; ++i) {
      states.push_back(static_cast<int>(rng() % 4));
    }
    const auto tips = TipData::observed(states);
    const auto omega = rep % 3 == 0 ? phylo.internal_branches() : BranchSet::all(phylo.num_branches());
    const auto exact = posterior_moments(phylo, cache, omega, tips);
    const auto mc = mc_moments(phylo, cache, model, omega, tips, label, 4000, rng);
    misses += std::abs(mc.mean - exact.mean) > 4 * mc.se_mean;
    misses += std::abs(mc.variance - exact.variance) > 4 * mc.se_variance;
  }
  EXPECT_LE(misses, 1);
}

TEST(Simmap, ExpectedConditionalMatchesEnumeration) {
  // E_D[Var(H | D)] and E_D[Cov(H1, H2 | D)] summed over every dataset
  const auto phylo = parse_newick("((a:0.4,b:0.2):0.3,c:0.6);");
  auto rng = make_rng(11);
  const auto model = oracle::random_model(2, rng);
  const auto label = SummaryLabel::all_substitutions(2);
  const auto cache = build_cache(model, phylo, label);
  const auto all = BranchSet::all(phylo.num_branches());
  const auto sub = subtree_branches(phylo, 0);
  auto ev1 = 0.0, ev2 = 0.0, ec = 0.0;
  for (const auto& d : oracle::all_datasets(3, 2)) {
    const auto e = oracle::enumerate(phylo, model, label, all, sub, d);
    const auto e2 = oracle::enumerate(phylo, model, label, sub, sub, d);
    ev1 += e.likelihood * e.variance1();
    ev2 += e2.likelihood * e2.variance1();
    ec += e.likelihood * e.covariance();
  }
  const auto got = expected_conditional_moments(phylo, cache, model, all, sub, 20000, rng);
  EXPECT_EQ(got.num_datasets, 20000);
  EXPECT_LT(std::abs(got.variance1.mean - ev1), 4.5 * got.variance1.se_mean);
  EXPECT_LT(std::abs(got.variance2.mean - ev2), 4.5 * got.variance2.se_mean);
  EXPECT_LT(std::abs(got.covariance.mean - ec), 4.5 * got.covariance.se_mean);
  const auto one = expected_conditional_moments(phylo, cache, model, all, 5000, rng);
  EXPECT_LT(std::abs(one.variance1.mean - ev1), 4.5 * one.variance1.se_mean);
}

TEST(Simmap, LawOfTotalVarianceExactly) {
  auto rng = make_rng(12);
  for (auto rep = 0; rep < 12; ++rep) {
    const auto n = 2 + rep % 3;
    const auto m = 2 + rep % 2;
    const auto phylo = random_phylogeny(n, rng, 0.5);
    const auto model = oracle::random_model(m, rng);
    auto mask = std::vector<int>(m, 0);
    mask[0] = 1;
    const auto label = rep % 4 == 3 ? SummaryLabel::dwelling(mask) : SummaryLabel::all_substitutions(m);
    const auto cache = build_cache(model, phylo, label);
    const auto all = BranchSet::all(phylo.num_branches());
    const auto sub = subtree_branches(phylo, phylo.root_branches()[0]);
    auto ev = 0.0, em = 0.0, em2 = 0.0, ec = 0.0, em_sub = 0.0, emm = 0.0;
    for (const auto& d : oracle::all_datasets(n, m)) {
      const auto r = posterior_covariance(phylo, cache, all, sub, d);
      ev += r.likelihood * r.variance1;
      em += r.likelihood * r.mean1;
      em2 += r.likelihood * r.mean1 * r.mean1;
      ec += r.likelihood * r.covariance;
      em_sub += r.likelihood * r.mean2;
      emm += r.likelihood * r.mean1 * r.mean2;
    }
    const auto prior = prior_covariance(phylo, cache, all, sub);
    EXPECT_NEAR(em, prior.mean1, 1e-10 * std::max(1.0, prior.mean1));
    EXPECT_NEAR(ev + em2 - em * em, prior.variance1, 1e-9 * std::max(1.0, prior.variance1));
    EXPECT_NEAR(ec + emm - em * em_sub, prior.covariance, 1e-9 * std::max(1.0, std::abs(prior.covariance)));
  }
}
