#pragma once

#include <string>
#include <vector>

namespace hiergibbs {

// Index tree for a hierarchical model.  Nodes are numbered 0..size()-1 in
// breadth-first order from the root; that numbering fixes the coordinate
// order used by every matrix and sweep downstream.  All leaves sit at the
// deepest level.
class HierarchyTree {
 public:
  HierarchyTree() = default;  // empty placeholder; build via the factories

  // branching[d] children per node at level d; branching.size() = depth-1.
  static HierarchyTree balanced(const std::vector<int>& branching);

  // parent[i] is the parent of node i, -1 for the single root.  Nodes are
  // re-indexed breadth-first internally; input order is not preserved.
  static HierarchyTree from_parents(const std::vector<int>& parent);

  int size() const { return static_cast<int>(parent_.size()); }
  int depth() const { return static_cast<int>(levels_.size()); }

  int parent(int t) const { return parent_[t]; }
  int level(int t) const { return level_[t]; }
  const std::vector<int>& children(int t) const { return children_[t]; }
  const std::vector<int>& level_nodes(int d) const { return levels_[d]; }
  const std::vector<int>& leaves() const { return levels_.back(); }

  bool is_root(int t) const { return parent_[t] < 0; }
  bool is_leaf(int t) const { return children_[t].empty(); }

  // True when r is an ancestor of t or r == t.
  bool is_ancestor_or_self(int r, int t) const;

  // Path label "t0", "t0.2", "t0.2.1" used for trace headers and reports.
  std::string label(int t) const;

 private:
  void finalize();  // fills children_, level_, levels_; validates invariants

  std::vector<int> parent_;
  std::vector<std::vector<int>> children_;
  std::vector<int> level_;
  std::vector<std::vector<int>> levels_;
};

}  // namespace hiergibbs
