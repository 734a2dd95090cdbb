#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "phylomoments/phylogeny.h"
#include "phylomoments/random_tree.h"

using namespace phylomoments;

namespace {

const char* k_five = "(((A:0.7,B:0.8):0.3,C:0.4):0.1,(D:0.5,E:0.6):0.2);";

}  // namespace

TEST(Newick, FiveTipNumbering) {
  const auto t = parse_newick(k_five);
  EXPECT_EQ(t.num_tips(), 5);
  EXPECT_EQ(t.num_branches(), 8);
  EXPECT_EQ(t.tip_names(), (std::vector<std::string>{"A", "B", "C", "D", "E"}));
  EXPECT_NEAR(t.tree_length(), 3.6, 1e-12);
  // branches follow the pre-order of their child nodes
  EXPECT_DOUBLE_EQ(t.length(0), 0.1);
  EXPECT_DOUBLE_EQ(t.length(1), 0.3);
  EXPECT_DOUBLE_EQ(t.length(5), 0.2);
  const auto [r1, r2] = t.root_branches();
  EXPECT_EQ(r1, 0);
  EXPECT_EQ(r2, 5);
  const auto post = t.postorder();
  EXPECT_EQ(post[post.size() - 2], 0);
  EXPECT_EQ(post.back(), 5);
}

TEST(Newick, SubtreeBelowFirstRootBranchHasFiveBranches) {
  const auto t = parse_newick(k_five);
  const auto sub = subtree_branches(t, 0);
  EXPECT_EQ(sub.size(), 5);
  EXPECT_EQ(sub.members(), (std::vector<BranchIndex>{0, 1, 2, 3, 4}));
  EXPECT_TRUE(is_subtree(t, sub));
  auto broken = sub;
  broken.erase(3);
  EXPECT_FALSE(is_subtree(t, broken));
  EXPECT_EQ(t.internal_branches().members(), (std::vector<BranchIndex>{0, 1, 5}));
  EXPECT_EQ(t.terminal_branches().size(), 5);
}

TEST(Newick, PostorderVisitsChildrenFirst) {
  auto rng = make_rng(5);
  const auto t = random_phylogeny(40, rng);
  auto seen = std::vector<char>(t.num_branches(), 0);
  for (auto b : t.postorder()) {
    const auto c = t.child_node(b);
    if (!t.is_tip(c)) {
      for (auto k : t.child_branches(c)) {
        EXPECT_TRUE(seen[k]);
      }
    }
    seen[b] = 1;
  }
}

TEST(Newick, TwoTipTree) {
  const auto t = parse_newick("(a:1,b:2);");
  EXPECT_EQ(t.num_branches(), 2);
  EXPECT_EQ(t.num_tips(), 2);
}

TEST(Newick, RootLengthIgnoredWithWarning) {
  auto warnings = std::vector<std::string>{};
  const auto t = parse_newick("((a:1,b:1):0.5,c:2):0.3;", &warnings);
  EXPECT_EQ(warnings.size(), 1u);
  EXPECT_NEAR(t.tree_length(), 4.5, 1e-12);
}

TEST(Newick, QuotedNamesCommentsAndInternalLabels) {
  const auto t = parse_newick("(('tip one':1,b[&x=1]:2)inner:0.5,c:1)root;");
  EXPECT_EQ(t.tip_names()[0], "tip one");
  EXPECT_EQ(t.tip_index("b"), 1);
  const auto again = parse_newick(write_newick(t));
  EXPECT_EQ(again.tip_names(), t.tip_names());
}

TEST(Newick, Errors) {
  EXPECT_THROW(parse_newick("((a:1,b:1):1,c:1"), NewickError);
  EXPECT_THROW(parse_newick("((a:1,b:1):1,c:1));"), NewickError);
  EXPECT_THROW(parse_newick("((a:1,b):1,c:1);"), NewickError);
  EXPECT_THROW(parse_newick("((a:1,b:-1):1,c:1);"), NewickError);
  EXPECT_THROW(parse_newick("((a:1,b:1,d:1):1,c:1);"), TreeError);
  EXPECT_THROW(parse_newick("((a:1,a:1):1,c:1);"), TreeError);
  EXPECT_THROW(parse_newick("(a:1);"), TreeError);
  EXPECT_THROW(parse_newick("(a:1,b:1); x"), NewickError);
  EXPECT_THROW(parse_newick(""), NewickError);
  EXPECT_THROW(read_newick_file("/nonexistent/tree.nwk"), std::runtime_error);
}

TEST(Newick, RoundTripRandomTrees) {
  auto rng = make_rng(11);
  for (auto rep = 0; rep < 200; ++rep) {
    const auto n = 2 + static_cast<int>(rng() % 63);
    const auto t = random_phylogeny(n, rng, 0.3);
    const auto text = write_newick(t);
    const auto u = parse_newick(text);
    ASSERT_EQ(u.num_tips(), n);
    EXPECT_EQ(u.tip_names(), t.tip_names());
    for (auto b = 0; b < t.num_branches(); ++b) {
      EXPECT_EQ(u.length(b), t.length(b)) << text;
      EXPECT_EQ(u.parent_node(b), t.parent_node(b));
      EXPECT_EQ(u.child_node(b), t.child_node(b));
    }
    EXPECT_EQ(write_newick(u), text);
  }
}

TEST(Newick, RerootPreservesTipsAndLength) {
  auto rng = make_rng(3);
  for (auto rep = 0; rep < 30; ++rep) {
    const auto t = random_phylogeny(3 + rep % 10, rng);
    for (auto b = 0; b < t.num_branches(); ++b) {
      const auto r = reroot(t, b, 0.3);
      EXPECT_EQ(r.tree.num_tips(), t.num_tips());
      EXPECT_NEAR(r.tree.tree_length(), t.tree_length(), 1e-12);
      auto names_a = t.tip_names();
      auto names_b = r.tree.tip_names();
      std::sort(names_a.begin(), names_a.end());
      std::sort(names_b.begin(), names_b.end());
      EXPECT_EQ(names_a, names_b);
      // a branch and its image carry the same length unless split or merged
      for (auto k = 0; k < t.num_branches(); ++k) {
        const auto img = r.branch_map[k];
        // old root branches are either merged or re-split around the new root
        if (k == r.split_source || k == r.old_root_branches[0] || k == r.old_root_branches[1]) {
          continue;
        }
        EXPECT_DOUBLE_EQ(r.tree.length(img), t.length(k));
      }
    }
  }
}

TEST(Newick, MapBranchSetRejectsHalfOfMergedRoot) {
  const auto t = parse_newick(k_five);
  const auto r = reroot(t, 3);
  auto set = BranchSet::none(t.num_branches());
  set.insert(0);
  EXPECT_THROW(map_branch_set(r, set), TreeError);
  set.insert(5);
  EXPECT_NO_THROW(map_branch_set(r, set));
}
