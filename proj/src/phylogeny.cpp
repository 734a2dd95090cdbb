#include "phylomoments/phylogeny.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace phylomoments {

// ---------------------------------------------------------------------------
// BranchSet

BranchSet::BranchSet(int num_branches, std::span<const BranchIndex> members) : mask_(num_branches, 0) {
  for (auto b : members) {
    insert(b);
  }
}

auto BranchSet::all(int num_branches) -> BranchSet {
  auto result = BranchSet{num_branches};
  std::fill(result.mask_.begin(), result.mask_.end(), 1);
  return result;
}

auto BranchSet::size() const -> int {
  return static_cast<int>(std::count(mask_.begin(), mask_.end(), 1));
}

auto BranchSet::members() const -> std::vector<BranchIndex> {
  auto result = std::vector<BranchIndex>{};
  for (auto b = 0; b < num_branches(); ++b) {
    if (mask_[b]) {
      result.push_back(b);
    }
  }
  return result;
}

void BranchSet::insert(BranchIndex b) {
  if (b < 0 || b >= num_branches()) {
    throw TreeError("branch index " + std::to_string(b) + " out of range [0, " +
                    std::to_string(num_branches()) + ")");
  }
  mask_[b] = 1;
}

void BranchSet::erase(BranchIndex b) {
  if (b < 0 || b >= num_branches()) {
    throw TreeError("branch index " + std::to_string(b) + " out of range");
  }
  mask_[b] = 0;
}

auto BranchSet::intersected(const BranchSet& other) const -> BranchSet {
  if (other.num_branches() != num_branches()) {
    throw TreeError("branch sets belong to trees of different size");
  }
  auto result = BranchSet{num_branches()};
  for (auto b = 0; b < num_branches(); ++b) {
    result.mask_[b] = mask_[b] && other.mask_[b];
  }
  return result;
}

auto BranchSet::united(const BranchSet& other) const -> BranchSet {
  if (other.num_branches() != num_branches()) {
    throw TreeError("branch sets belong to trees of different size");
  }
  auto result = BranchSet{num_branches()};
  for (auto b = 0; b < num_branches(); ++b) {
    result.mask_[b] = mask_[b] || other.mask_[b];
  }
  return result;
}

// ---------------------------------------------------------------------------
// Phylogeny

auto Phylogeny::from_draft(const Draft& draft) -> Phylogeny {
  const auto num_ids = static_cast<int>(draft.parent.size());
  if (std::ssize(draft.length) != num_ids || std::ssize(draft.name) != num_ids) {
    throw TreeError("draft arrays have inconsistent sizes");
  }

  auto children = std::vector<std::vector<int>>(num_ids);
  auto root_id = k_no_index;
  for (auto id = 0; id < num_ids; ++id) {
    auto p = draft.parent[id];
    if (p == k_no_index) {
      if (root_id != k_no_index) {
        throw TreeError("tree has more than one root");
      }
      root_id = id;
    } else {
      if (p < 0 || p >= num_ids || p == id) {
        throw TreeError("invalid parent reference");
      }
      children[p].push_back(id);
    }
  }
  if (root_id == k_no_index) {
    throw TreeError("tree has no root");
  }

  auto num_tips = 0;
  for (auto id = 0; id < num_ids; ++id) {
    auto k = children[id].size();
    if (k == 0) {
      ++num_tips;
    } else if (k != 2) {
      throw TreeError("multifurcation: internal node with " + std::to_string(k) +
                      " children (only bifurcating trees are supported)");
    }
  }
  if (num_tips < 2) {
    throw TreeError("tree needs at least 2 tips");
  }
  if (num_ids != 2 * num_tips - 1) {
    throw TreeError("tree is not connected");
  }

  auto result = Phylogeny{};
  result.num_tips_ = num_tips;
  const auto num_nodes = 2 * num_tips - 1;
  const auto num_branches = num_nodes - 1;
  result.branch_parent_.assign(num_branches, k_no_index);
  result.branch_child_.assign(num_branches, k_no_index);
  result.node_branch_above_.assign(num_nodes, k_no_index);
  result.node_children_.assign(num_nodes, {k_no_index, k_no_index});
  result.lengths_.assign(num_branches, 0.0);
  result.tip_names_.assign(num_tips, {});

  // Pre-order labelling.
  auto label = std::vector<NodeIndex>(num_ids, k_no_index);
  auto next_internal = 0;
  auto next_tip = 0;
  auto next_branch = 0;
  auto visited = 0;
  auto stack = std::vector<int>{root_id};
  while (!stack.empty()) {
    auto id = stack.back();
    stack.pop_back();
    ++visited;
    if (children[id].empty()) {
      label[id] = num_tips - 1 + next_tip;
      result.tip_names_[next_tip] = draft.name[id];
      ++next_tip;
    } else {
      label[id] = next_internal++;
    }
    if (id != root_id) {
      auto b = next_branch++;
      auto len = draft.length[id];
      if (!std::isfinite(len) || len < 0.0) {
        throw TreeError("branch lengths must be finite and nonnegative");
      }
      result.lengths_[b] = len;
      result.branch_child_[b] = label[id];
      result.branch_parent_[b] = label[draft.parent[id]];
      result.node_branch_above_[label[id]] = b;
    }
    for (auto it = children[id].rbegin(); it != children[id].rend(); ++it) {
      stack.push_back(*it);
    }
  }
  if (visited != num_ids) {
    throw TreeError("tree is not connected");
  }

  for (auto b = 0; b < num_branches; ++b) {
    auto& slots = result.node_children_[result.branch_parent_[b]];
    if (slots[0] == k_no_index) {
      slots[0] = b;
    } else {
      slots[1] = b;
    }
  }

  auto seen = std::unordered_set<std::string>{};
  for (const auto& name : result.tip_names_) {
    if (name.empty()) {
      throw TreeError("every tip needs a name");
    }
    if (!seen.insert(name).second) {
      throw TreeError("duplicate tip name '" + name + "'");
    }
  }

  // Post-order over branches; the two root branches go last.
  result.postorder_.reserve(num_branches);
  struct Frame {
    NodeIndex node;
    int next_child;
  };
  auto frames = std::vector<Frame>{};
  for (auto top : result.node_children_[0]) {
    frames.push_back({result.branch_child_[top], 0});
    while (!frames.empty()) {
      auto& f = frames.back();
      if (!result.is_tip(f.node) && f.next_child < 2) {
        auto b = result.node_children_[f.node][f.next_child++];
        frames.push_back({result.branch_child_[b], 0});
      } else {
        auto b = result.node_branch_above_[f.node];
        if (b != top) {
          result.postorder_.push_back(b);
        }
        frames.pop_back();
      }
    }
  }
  result.postorder_.push_back(result.node_children_[0][0]);
  result.postorder_.push_back(result.node_children_[0][1]);
  return result;
}

auto Phylogeny::tree_length() const -> double {
  return std::accumulate(lengths_.begin(), lengths_.end(), 0.0);
}

auto Phylogeny::tip_index(std::string_view name) const -> int {
  for (auto i = 0; i < num_tips_; ++i) {
    if (tip_names_[i] == name) {
      return i;
    }
  }
  return k_no_index;
}

auto Phylogeny::internal_branches() const -> BranchSet {
  auto result = BranchSet{num_branches()};
  for (auto b = 0; b < num_branches(); ++b) {
    if (!is_terminal(b)) {
      result.insert(b);
    }
  }
  return result;
}

auto Phylogeny::terminal_branches() const -> BranchSet {
  auto result = BranchSet{num_branches()};
  for (auto b = 0; b < num_branches(); ++b) {
    if (is_terminal(b)) {
      result.insert(b);
    }
  }
  return result;
}

auto Phylogeny::with_lengths(std::vector<double> lengths) const -> Phylogeny {
  if (std::ssize(lengths) != num_branches()) {
    throw TreeError("expected " + std::to_string(num_branches()) + " branch lengths");
  }
  for (auto t : lengths) {
    if (!std::isfinite(t) || t < 0.0) {
      throw TreeError("branch lengths must be finite and nonnegative");
    }
  }
  auto result = *this;
  result.lengths_ = std::move(lengths);
  return result;
}

auto Phylogeny::to_draft() const -> Draft {
  auto draft = Draft{};
  draft.parent.assign(num_nodes(), k_no_index);
  draft.length.assign(num_nodes(), 0.0);
  draft.name.assign(num_nodes(), {});
  for (auto b = 0; b < num_branches(); ++b) {
    draft.parent[child_node(b)] = parent_node(b);
    draft.length[child_node(b)] = lengths_[b];
  }
  for (auto i = 0; i < num_tips_; ++i) {
    draft.name[tip_node(i)] = tip_names_[i];
  }
  return draft;
}

// ---------------------------------------------------------------------------
// Newick

namespace {

class NewickReader {
 public:
  explicit NewickReader(std::string_view text) : text_(text) {}

  auto read(std::vector<std::string>* warnings) -> Phylogeny {
    auto draft = Phylogeny::Draft{};
    auto open = std::vector<int>{};  // ids of groups whose ')' is pending
    auto expect_node = true;         // at the start of a node (after '(' or ',')
    auto root_id = k_no_index;

    auto new_node = [&](int parent) {
      draft.parent.push_back(parent);
      draft.length.push_back(std::nan(""));
      draft.name.emplace_back();
      return static_cast<int>(draft.parent.size()) - 1;
    };

    skip_ws();
    if (at_end()) {
      fail("empty input");
    }
    auto current = k_no_index;  // node just completed
    while (true) {
      skip_ws();
      if (at_end()) {
        fail("unexpected end of input (missing ';' or unbalanced parentheses)");
      }
      auto c = peek();
      if (expect_node) {
        auto parent = open.empty() ? k_no_index : open.back();
        if (c == '(') {
          ++pos_;
          auto id = new_node(parent);
          if (parent == k_no_index) {
            if (root_id != k_no_index) {
              fail("more than one tree in input");
            }
            root_id = id;
          }
          open.push_back(id);
          continue;
        }
        auto id = new_node(parent);
        if (parent == k_no_index) {
          root_id = id;
        }
        draft.name[id] = read_label();
        if (draft.name[id].empty()) {
          fail("missing tip name");
        }
        current = id;
        expect_node = false;
        read_length(draft, id);
        continue;
      }
      if (c == ',') {
        if (open.empty()) {
          fail("',' outside of parentheses");
        }
        ++pos_;
        expect_node = true;
        continue;
      }
      if (c == ')') {
        if (open.empty()) {
          fail("unbalanced ')'");
        }
        ++pos_;
        current = open.back();
        open.pop_back();
        read_label();  // internal node labels are accepted and dropped
        read_length(draft, current);
        continue;
      }
      if (c == ';') {
        if (!open.empty()) {
          fail("unbalanced '(' before ';'");
        }
        ++pos_;
        skip_ws();
        if (!at_end()) {
          fail("trailing characters after ';'");
        }
        break;
      }
      fail(std::string{"unexpected character '"} + c + "'");
    }
    (void)current;

    for (auto id = 0; id < std::ssize(draft.parent); ++id) {
      if (id == root_id) {
        if (!std::isnan(draft.length[id]) && warnings) {
          warnings->push_back("ignoring branch length on the root group");
        }
        draft.length[id] = 0.0;
      } else if (std::isnan(draft.length[id])) {
        throw NewickError("missing branch length" +
                          (draft.name[id].empty() ? std::string{} : " for '" + draft.name[id] + "'"));
      }
    }
    if (draft.parent.size() < 3) {
      throw TreeError("tree needs at least 2 tips");
    }
    return Phylogeny::from_draft(draft);
  }

 private:
  auto at_end() const -> bool { return pos_ >= text_.size(); }
  auto peek() const -> char { return text_[pos_]; }

  void skip_ws() {
    while (!at_end()) {
      auto c = peek();
      if (c == '[') {  // comment
        auto close = text_.find(']', pos_);
        if (close == std::string_view::npos) {
          fail("unterminated comment");
        }
        pos_ = close + 1;
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  auto read_label() -> std::string {
    skip_ws();
    if (at_end()) {
      return {};
    }
    if (peek() == '\'') {
      ++pos_;
      auto out = std::string{};
      while (true) {
        if (at_end()) {
          fail("unterminated quoted label");
        }
        auto c = text_[pos_++];
        if (c == '\'') {
          if (!at_end() && peek() == '\'') {
            out.push_back('\'');
            ++pos_;
            continue;
          }
          break;
        }
        out.push_back(c);
      }
      return out;
    }
    auto out = std::string{};
    while (!at_end()) {
      auto c = peek();
      if (c == '(' || c == ')' || c == ',' || c == ':' || c == ';' || c == '[' ||
          std::isspace(static_cast<unsigned char>(c))) {
        break;
      }
      out.push_back(c);
      ++pos_;
    }
    return out;
  }

  void read_length(Phylogeny::Draft& draft, int id) {
    skip_ws();
    if (at_end() || peek() != ':') {
      return;
    }
    ++pos_;
    skip_ws();
    auto start = pos_;
    while (!at_end()) {
      auto c = peek();
      if (std::isdigit(static_cast<unsigned char>(c)) || c == '.' || c == '-' || c == '+' || c == 'e' ||
          c == 'E') {
        ++pos_;
      } else {
        break;
      }
    }
    auto token = text_.substr(start, pos_ - start);
    auto value = 0.0;
    auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
    if (token.empty() || ec != std::errc{} || ptr != token.data() + token.size()) {
      fail("malformed branch length '" + std::string{token} + "'");
    }
    if (value < 0.0) {
      fail("negative branch length");
    }
    draft.length[id] = value;
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw NewickError("newick syntax error at offset " + std::to_string(pos_) + ": " + what);
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

auto format_length(double x) -> std::string {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, ptr);
}

auto needs_quotes(const std::string& name) -> bool {
  return name.find_first_of("()[]:;,' \t\n") != std::string::npos;
}

}  // namespace

auto parse_newick(std::string_view text, std::vector<std::string>* warnings) -> Phylogeny {
  return NewickReader{text}.read(warnings);
}

auto read_newick_file(const std::string& path) -> Phylogeny {
  auto in = std::ifstream{path};
  if (!in) {
    throw std::runtime_error("cannot open tree file '" + path + "'");
  }
  auto buffer = std::stringstream{};
  buffer << in.rdbuf();
  return parse_newick(buffer.str());
}

auto write_newick(const Phylogeny& phylo) -> std::string {
  auto out = std::string{};
  auto emit_name = [&](const std::string& name) {
    if (needs_quotes(name)) {
      out.push_back('\'');
      for (auto c : name) {
        if (c == '\'') {
          out.push_back('\'');
        }
        out.push_back(c);
      }
      out.push_back('\'');
    } else {
      out += name;
    }
  };

  struct Frame {
    NodeIndex node;
    int next_child;
  };
  auto frames = std::vector<Frame>{{phylo.root(), 0}};
  out.push_back('(');
  while (!frames.empty()) {
    auto& f = frames.back();
    if (f.next_child < 2) {
      if (f.next_child == 1) {
        out.push_back(',');
      }
      auto b = phylo.child_branches(f.node)[f.next_child++];
      auto child = phylo.child_node(b);
      if (phylo.is_tip(child)) {
        emit_name(phylo.tip_names()[phylo.tip_of(child)]);
        out += ':' + format_length(phylo.length(b));
      } else {
        out.push_back('(');
        frames.push_back({child, 0});
      }
    } else {
      out.push_back(')');
      auto b = phylo.branch_above(f.node);
      if (b != k_no_index) {
        out += ':' + format_length(phylo.length(b));
      }
      frames.pop_back();
    }
  }
  out.push_back(';');
  return out;
}

auto subtree_branches(const Phylogeny& phylo, BranchIndex b) -> BranchSet {
  if (b < 0 || b >= phylo.num_branches()) {
    throw TreeError("branch index " + std::to_string(b) + " out of range");
  }
  auto result = BranchSet{phylo.num_branches()};
  auto stack = std::vector<BranchIndex>{b};
  while (!stack.empty()) {
    auto cur = stack.back();
    stack.pop_back();
    result.insert(cur);
    auto child = phylo.child_node(cur);
    if (!phylo.is_tip(child)) {
      for (auto c : phylo.child_branches(child)) {
        stack.push_back(c);
      }
    }
  }
  return result;
}

auto is_subtree(const Phylogeny& phylo, const BranchSet& set) -> bool {
  if (set.num_branches() != phylo.num_branches() || set.empty()) {
    return false;
  }
  // The top branch of a subtree is the unique member whose parent branch is not a member.
  auto top = k_no_index;
  for (auto b : set.members()) {
    auto above = phylo.branch_above(phylo.parent_node(b));
    if (above == k_no_index || !set.contains(above)) {
      if (top != k_no_index) {
        return false;
      }
      top = b;
    }
  }
  return top != k_no_index && subtree_branches(phylo, top) == set;
}

// ---------------------------------------------------------------------------
// Rerooting

auto reroot(const Phylogeny& phylo, BranchIndex b, double fraction) -> Rerooted {
  if (b < 0 || b >= phylo.num_branches()) {
    throw TreeError("branch index " + std::to_string(b) + " out of range");
  }
  if (!(fraction >= 0.0 && fraction <= 1.0)) {
    throw TreeError("split fraction must lie in [0, 1]");
  }
  const auto num_nodes = phylo.num_nodes();
  const auto [left, right] = phylo.root_branches();

  // Unrooted edge list over the old nodes minus the root; the two root branches
  // become a single edge.  Edge e carries the old branches in `edge_branches[e]`.
  struct Edge {
    NodeIndex a;
    NodeIndex z;
    double length;
  };
  auto edges = std::vector<Edge>{};
  auto edge_of_branch = std::vector<int>(phylo.num_branches(), k_no_index);
  for (auto br = 0; br < phylo.num_branches(); ++br) {
    if (br == left || br == right) {
      continue;
    }
    edge_of_branch[br] = static_cast<int>(edges.size());
    edges.push_back({phylo.parent_node(br), phylo.child_node(br), phylo.length(br)});
  }
  const auto merged = static_cast<int>(edges.size());
  edges.push_back({phylo.child_node(left), phylo.child_node(right), phylo.length(left) + phylo.length(right)});
  edge_of_branch[left] = merged;
  edge_of_branch[right] = merged;

  // Split point: distance from edge end `a`.
  auto split_edge = edge_of_branch[b];
  auto dist_from_a = 0.0;
  if (split_edge == merged) {
    // Position measured from the old root towards child(b).
    auto t_left = phylo.length(left);
    auto t_right = phylo.length(right);
    dist_from_a = (b == left) ? t_left * (1.0 - fraction) : t_left + fraction * t_right;
  } else {
    dist_from_a = fraction * phylo.length(b);
  }

  auto adjacency = std::vector<std::vector<int>>(num_nodes);
  for (auto e = 0; e < std::ssize(edges); ++e) {
    if (e == split_edge) {
      continue;
    }
    adjacency[edges[e].a].push_back(e);
    adjacency[edges[e].z].push_back(e);
  }

  // Draft ids: old node ids, plus one new root id.
  const auto new_root = num_nodes;
  auto draft = Phylogeny::Draft{};
  draft.parent.assign(num_nodes + 1, k_no_index);
  draft.length.assign(num_nodes + 1, 0.0);
  draft.name.assign(num_nodes + 1, {});
  for (auto i = 0; i < phylo.num_tips(); ++i) {
    draft.name[phylo.tip_node(i)] = phylo.tip_names()[i];
  }
  draft.parent[phylo.root()] = -2;  // unused slot, dropped below
  auto via_edge = std::vector<int>(num_nodes + 1, k_no_index);

  const auto& se = edges[split_edge];
  auto order = std::vector<NodeIndex>{};
  auto attach = [&](NodeIndex node, NodeIndex parent, double length, int edge) {
    draft.parent[node] = parent;
    draft.length[node] = length;
    via_edge[node] = edge;
    order.push_back(node);
  };
  attach(se.a, new_root, dist_from_a, split_edge);
  attach(se.z, new_root, se.length - dist_from_a, split_edge);
  for (auto k = 0; k < std::ssize(order); ++k) {
    auto node = order[k];
    for (auto e : adjacency[node]) {
      if (e == via_edge[node]) {
        continue;
      }
      auto other = edges[e].a == node ? edges[e].z : edges[e].a;
      attach(other, node, edges[e].length, e);
    }
  }

  // Compact ids: drop the old root.  Children keep discovery order.
  auto compact = Phylogeny::Draft{};
  auto new_id = std::vector<int>(num_nodes + 1, k_no_index);
  auto sequence = std::vector<NodeIndex>{new_root};
  sequence.insert(sequence.end(), order.begin(), order.end());
  for (auto node : sequence) {
    new_id[node] = static_cast<int>(compact.parent.size());
    compact.parent.push_back(node == new_root ? k_no_index : new_id[draft.parent[node]]);
    compact.length.push_back(draft.length[node]);
    compact.name.push_back(draft.name[node]);
  }

  auto result = Rerooted{Phylogeny::from_draft(compact), {}, k_no_index, k_no_index, {left, right},
                         split_edge != merged};

  // Branch numbers follow the same pre-order walk from_draft performs on `compact`.
  auto branch_of_edge = std::vector<BranchIndex>(edges.size(), k_no_index);
  auto compact_children = std::vector<std::vector<int>>(compact.parent.size());
  for (auto id = 0; id < std::ssize(compact.parent); ++id) {
    if (compact.parent[id] != k_no_index) {
      compact_children[compact.parent[id]].push_back(id);
    }
  }
  auto branch_of_compact = std::vector<BranchIndex>(compact.parent.size(), k_no_index);
  {
    auto next_branch = 0;
    auto stack = std::vector<int>{0};
    while (!stack.empty()) {
      auto id = stack.back();
      stack.pop_back();
      if (id != 0) {
        branch_of_compact[id] = next_branch++;
      }
      for (auto it = compact_children[id].rbegin(); it != compact_children[id].rend(); ++it) {
        stack.push_back(*it);
      }
    }
  }
  for (auto node : order) {
    auto e = via_edge[node];
    if (e != split_edge) {
      branch_of_edge[e] = branch_of_compact[new_id[node]];
    }
  }
  auto half_a = branch_of_compact[new_id[se.a]];
  auto half_z = branch_of_compact[new_id[se.z]];

  result.branch_map.assign(phylo.num_branches(), k_no_index);
  for (auto br = 0; br < phylo.num_branches(); ++br) {
    if (edge_of_branch[br] != split_edge) {
      result.branch_map[br] = branch_of_edge[edge_of_branch[br]];
    }
  }
  if (split_edge == merged) {
    // se.a = child(left), se.z = child(right)
    result.branch_map[left] = half_a;
    result.branch_map[right] = half_z;
  } else {
    // se.a = parent(b) side
    result.branch_map[b] = half_a;
    result.split_source = b;
    result.split_partner = half_z;
  }
  return result;
}

auto map_branch_set(const Rerooted& rerooted, const BranchSet& set) -> BranchSet {
  const auto& map = rerooted.branch_map;
  if (set.num_branches() != std::ssize(map)) {
    throw TreeError("branch set does not belong to the rerooted tree");
  }
  auto [left, right] = rerooted.old_root_branches;
  if (rerooted.root_branches_merged && set.contains(left) != set.contains(right)) {
    throw TreeError("branch set splits the merged root branches");
  }
  auto result = BranchSet{rerooted.tree.num_branches()};
  for (auto b : set.members()) {
    result.insert(map[b]);
    if (b == rerooted.split_source) {
      result.insert(rerooted.split_partner);
    }
  }
  return result;
}

}  // namespace phylomoments
