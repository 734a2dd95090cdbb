#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "phylomoments/ppred.h"
#include "phylomoments/random_tree.h"
#include "phylomoments/seqsim.h"

using namespace phylomoments;

TEST(Ppred, PredictivePValue) {
  const double obs[] = {1, 2, 3, 4};
  const double rep[] = {2, 3, 4, 4};
  EXPECT_DOUBLE_EQ(posterior_predictive_p(obs, rep), 0.75);
  const double short_rep[] = {1};
  EXPECT_THROW(posterior_predictive_p(obs, short_rep), std::exception);
}

TEST(Ppred, DiscrepanciesAddOverColumns) {
  auto rng = make_rng(1);
  const auto phylo = random_phylogeny(6, rng, 0.2);
  const auto model = build_jc69();
  const auto cache = build_cache(model, phylo, SummaryLabel::all_substitutions(4));
  const auto a = simulate_alignment(phylo, model, 30, rng);
  const auto cols = std::span<const TipData>{a.columns};
  const auto whole = t_var(cols, phylo, cache);
  const auto split = t_var(cols.first(11), phylo, cache) + t_var(cols.subspan(11), phylo, cache);
  EXPECT_NEAR(whole, split, 1e-12 * whole);
  auto by_hand = 0.0, mean = 0.0;
  for (const auto& r : per_site_moments(phylo, cache, BranchSet::all(phylo.num_branches()), cols)) {
    by_hand += r.variance;
    mean += r.mean;
  }
  EXPECT_NEAR(whole, by_hand, 1e-12 * whole);
  const auto d = compute_discrepancies(cols, phylo, cache, 3);
  EXPECT_NEAR(d.t_var, whole, 1e-12 * whole);
  EXPECT_NEAR(d.t_disp, whole / mean, 1e-12);
  EXPECT_NEAR(t_disp(cols, phylo, cache), d.t_disp, 1e-12);
}

TEST(Ppred, ZeroMeanDispersionThrows) {
  const auto phylo = parse_newick("(a:0,b:0);");
  const auto cache = build_cache(build_jc69(), phylo, SummaryLabel::all_substitutions(4));
  const int s[] = {1, 1};
  const auto cols = std::vector<TipData>{TipData::observed(s)};
  EXPECT_EQ(t_var(cols, phylo, cache), 0.0);
  EXPECT_THROW(t_disp(cols, phylo, cache), std::domain_error);
}

TEST(Ppred, ReadsPosteriorAndRuns) {
  const auto dir = std::filesystem::temp_directory_path() / "phylomoments_ppred_test";
  std::filesystem::create_directories(dir);
  const auto path = (dir / "post.tsv").string();
  {
    auto out = std::ofstream{path};
    out << "tree\tac\tag\tat\tcg\tct\tgt\tpa\tpc\tpg\tpt\n";
    out << "# a comment\n";
    for (auto k = 0; k < 6; ++k) {
      out << "((a:0.1,b:0.2):0.05,(c:0.1,d:" << 0.1 + 0.01 * k << "):0.05);\t1\t" << 2 + k * 0.1
          << "\t1\t1\t2\t1\t0.25\t0.25\t0.25\t0.25\n";
    }
  }
  const auto post = read_posterior_samples(path);
  ASSERT_EQ(post.size(), 6u);
  EXPECT_NEAR(post[3].exchangeabilities[1], 2.3, 1e-15);
  EXPECT_NEAR(post[3].tree.tree_length(), 0.63, 1e-12);

  auto rng = make_rng(5);
  const auto data = simulate_alignment(post[0].tree, post[0].model(), 50, rng);
  auto opts = PpredOptions{};
  opts.num_replicates = 4;
  opts.seed = 9;
  const auto r1 = run_ppred(data, post, opts);
  EXPECT_EQ(r1.num_replicates, 4);
  EXPECT_EQ(r1.t_var_observed.size(), 4u);
  EXPECT_EQ(r1.t_disp_replicated.size(), 4u);
  EXPECT_GE(r1.ppp_t_var, 0.0);
  EXPECT_LE(r1.ppp_t_var, 1.0);
  opts.threads = 3;
  const auto r2 = run_ppred(data, post, opts);
  EXPECT_EQ(r1.t_var_replicated, r2.t_var_replicated);
  EXPECT_EQ(r1.ppp_t_disp, r2.ppp_t_disp);
  opts.num_replicates = 7;
  EXPECT_THROW(run_ppred(data, post, opts), std::exception);

  {
    auto out = std::ofstream{path};
    out << "((a:1,b:1):1,c:1);\t1\t1\n";
  }
  EXPECT_THROW(read_posterior_samples(path), std::exception);
  std::filesystem::remove_all(dir);
}

TEST(Ppred, RateHeterogeneityRaisesDispersion) {
  // data with a mixture of slow and fast sites are overdispersed relative to
  // replicates from the homogeneous model
  auto rng = make_rng(21);
  const auto phylo = random_phylogeny(10, rng, 0.15);
  const auto model = build_jc69();
  const auto cache = build_cache(model, phylo, SummaryLabel::all_substitutions(4));
  auto slow_lengths = std::vector<double>{};
  auto fast_lengths = std::vector<double>{};
  for (auto t : phylo.lengths()) {
    slow_lengths.push_back(0.1 * t);
    fast_lengths.push_back(1.9 * t);
  }
  const auto slow = simulate_alignment(phylo.with_lengths(slow_lengths), model, 300, rng);
  const auto fast = simulate_alignment(phylo.with_lengths(fast_lengths), model, 300, rng);
  auto mixed = slow;
  mixed.columns.insert(mixed.columns.end(), fast.columns.begin(), fast.columns.end());
  const auto plain = simulate_alignment(phylo, model, 600, rng);
  EXPECT_GT(t_disp(mixed.columns, phylo, cache), t_disp(plain.columns, phylo, cache));
}
