#pragma once

#include <array>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace phylomoments {

using NodeIndex = int;
using BranchIndex = int;

inline constexpr int k_no_index = -1;

class NewickError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class TreeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Set of branch indices of one phylogeny, stored as a membership mask.
class BranchSet {
 public:
  BranchSet() = default;
  explicit BranchSet(int num_branches) : mask_(num_branches, 0) {}
  BranchSet(int num_branches, std::span<const BranchIndex> members);

  static auto all(int num_branches) -> BranchSet;
  static auto none(int num_branches) -> BranchSet { return BranchSet{num_branches}; }

  auto num_branches() const -> int { return static_cast<int>(mask_.size()); }
  auto contains(BranchIndex b) const -> bool { return mask_[b] != 0; }
  auto size() const -> int;
  auto empty() const -> bool { return size() == 0; }
  auto members() const -> std::vector<BranchIndex>;

  void insert(BranchIndex b);
  void erase(BranchIndex b);

  auto intersected(const BranchSet& other) const -> BranchSet;
  auto united(const BranchSet& other) const -> BranchSet;

  friend auto operator==(const BranchSet&, const BranchSet&) -> bool = default;

 private:
  std::vector<char> mask_;
};

// Rooted, strictly bifurcating tree.
//
// Node numbering (0-based): internal nodes 0..n-2 in pre-order with the root at 0,
// tips n-1..2n-2 in order of first appearance.  Branch b is the branch above its
// child node; branches are numbered 0..2n-3 in pre-order of their child nodes.
// The postorder sequence lists every branch after all branches below it and ends
// with the two root branches.
class Phylogeny {
 public:
  // Rooted binary topology given as a parent array over arbitrary node ids.
  // `parent[root] == -1`; children keep the order in which they are listed.
  struct Draft {
    std::vector<int> parent;
    std::vector<double> length;       // length of the branch above each node (ignored for root)
    std::vector<std::string> name;    // tip names (internal names ignored)
  };

  static auto from_draft(const Draft& draft) -> Phylogeny;

  auto num_tips() const -> int { return num_tips_; }
  auto num_nodes() const -> int { return 2 * num_tips_ - 1; }
  auto num_branches() const -> int { return 2 * num_tips_ - 2; }

  auto root() const -> NodeIndex { return 0; }
  auto is_tip(NodeIndex u) const -> bool { return u >= num_tips_ - 1; }
  auto tip_node(int tip) const -> NodeIndex { return num_tips_ - 1 + tip; }
  auto tip_of(NodeIndex u) const -> int { return u - (num_tips_ - 1); }

  auto parent_node(BranchIndex b) const -> NodeIndex { return branch_parent_[b]; }
  auto child_node(BranchIndex b) const -> NodeIndex { return branch_child_[b]; }
  auto branch_above(NodeIndex u) const -> BranchIndex { return node_branch_above_[u]; }
  auto child_branches(NodeIndex u) const -> std::array<BranchIndex, 2> { return node_children_[u]; }
  auto root_branches() const -> std::array<BranchIndex, 2> { return node_children_[0]; }
  auto is_terminal(BranchIndex b) const -> bool { return is_tip(branch_child_[b]); }

  auto length(BranchIndex b) const -> double { return lengths_[b]; }
  auto lengths() const -> std::span<const double> { return lengths_; }
  auto tree_length() const -> double;

  auto tip_names() const -> const std::vector<std::string>& { return tip_names_; }
  auto tip_index(std::string_view name) const -> int;  // k_no_index when absent

  auto postorder() const -> std::span<const BranchIndex> { return postorder_; }

  auto internal_branches() const -> BranchSet;
  auto terminal_branches() const -> BranchSet;

  // Same topology, new branch lengths.
  auto with_lengths(std::vector<double> lengths) const -> Phylogeny;

  auto to_draft() const -> Draft;

 private:
  Phylogeny() = default;

  int num_tips_ = 0;
  std::vector<NodeIndex> branch_parent_;
  std::vector<NodeIndex> branch_child_;
  std::vector<BranchIndex> node_branch_above_;
  std::vector<std::array<BranchIndex, 2>> node_children_;
  std::vector<double> lengths_;
  std::vector<std::string> tip_names_;
  std::vector<BranchIndex> postorder_;
};

// Parses a single rooted, bifurcating tree.  Every non-root node needs a branch
// length; a length on the root group is ignored (reported through `warnings`).
auto parse_newick(std::string_view text, std::vector<std::string>* warnings = nullptr) -> Phylogeny;
auto read_newick_file(const std::string& path) -> Phylogeny;

auto write_newick(const Phylogeny& phylo) -> std::string;

// All branches at or below b.
auto subtree_branches(const Phylogeny& phylo, BranchIndex b) -> BranchSet;

// True when `set` equals subtree_branches(phylo, b) for some b.
auto is_subtree(const Phylogeny& phylo, const BranchSet& set) -> bool;

// Moves the root onto branch `b`, splitting it at `fraction` of its length measured
// from its parent end.  The returned map sends every branch of `phylo` to the branch
// of the new tree that carries it: the split branch maps to the new root branch on its
// old-parent side (its other half is `split_partner`), and the two old
// root branches both map to the single merged branch.
struct Rerooted {
  Phylogeny tree;
  std::vector<BranchIndex> branch_map;
  BranchIndex split_source = k_no_index;
  BranchIndex split_partner = k_no_index;
  std::array<BranchIndex, 2> old_root_branches{k_no_index, k_no_index};
  bool root_branches_merged = false;
};
auto reroot(const Phylogeny& phylo, BranchIndex b, double fraction = 0.5) -> Rerooted;

// Image of a branch set under a reroot: a split branch contributes both halves.
// Throws TreeError when the set contains exactly one of two old root branches that
// were merged, since the merged branch cannot represent that set.
auto map_branch_set(const Rerooted& rerooted, const BranchSet& set) -> BranchSet;

}  // namespace phylomoments
