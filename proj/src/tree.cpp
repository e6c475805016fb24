#include "hiergibbs/tree.hpp"

#include <algorithm>
#include <queue>

#include "hiergibbs/errors.hpp"

namespace hiergibbs {

HierarchyTree HierarchyTree::balanced(const std::vector<int>& branching) {
  for (int b : branching) {
    if (b < 1) throw ModelError("branching counts must be >= 1");
  }
  std::vector<int> parent{-1};
  int level_begin = 0;
  int level_end = 1;
  for (int b : branching) {
    const int next_begin = static_cast<int>(parent.size());
    for (int p = level_begin; p < level_end; ++p) {
      for (int c = 0; c < b; ++c) parent.push_back(p);
    }
    level_begin = next_begin;
    level_end = static_cast<int>(parent.size());
  }
  HierarchyTree tree;
  tree.parent_ = std::move(parent);
  tree.finalize();
  return tree;
}

HierarchyTree HierarchyTree::from_parents(const std::vector<int>& parent) {
  const int n = static_cast<int>(parent.size());
  if (n == 0) throw ModelError("empty tree");
  int root = -1;
  for (int i = 0; i < n; ++i) {
    if (parent[i] < 0) {
      if (root >= 0) throw ModelError("multiple roots in parent list");
      root = i;
    } else if (parent[i] >= n) {
      throw ModelError("parent index out of range");
    }
  }
  if (root < 0) throw ModelError("no root in parent list");

  std::vector<std::vector<int>> kids(n);
  for (int i = 0; i < n; ++i) {
    if (parent[i] >= 0) kids[parent[i]].push_back(i);
  }

  // Re-index breadth-first; anything unreached is an orphan cycle.
  std::vector<int> order;
  order.reserve(n);
  std::queue<int> frontier;
  frontier.push(root);
  while (!frontier.empty()) {
    const int t = frontier.front();
    frontier.pop();
    order.push_back(t);
    for (int c : kids[t]) frontier.push(c);
  }
  if (static_cast<int>(order.size()) != n)
    throw ModelError("parent list contains an orphan or a cycle");

  std::vector<int> new_index(n);
  for (int i = 0; i < n; ++i) new_index[order[i]] = i;
  HierarchyTree tree;
  tree.parent_.resize(n);
  for (int i = 0; i < n; ++i) {
    const int old = order[i];
    tree.parent_[i] = parent[old] < 0 ? -1 : new_index[parent[old]];
  }
  tree.finalize();
  return tree;
}

void HierarchyTree::finalize() {
  const int n = size();
  children_.assign(n, {});
  level_.assign(n, 0);
  for (int t = 1; t < n; ++t) {
    if (parent_[t] >= t)
      throw ModelError("nodes are not in breadth-first order");
    children_[parent_[t]].push_back(t);
    level_[t] = level_[parent_[t]] + 1;
  }
  const int k = 1 + *std::max_element(level_.begin(), level_.end());
  levels_.assign(k, {});
  for (int t = 0; t < n; ++t) levels_[level_[t]].push_back(t);
  for (int t = 0; t < n; ++t) {
    if (children_[t].empty() && level_[t] != k - 1)
      throw ModelError("leaf " + label(t) + " is not at the deepest level");
  }
}

bool HierarchyTree::is_ancestor_or_self(int r, int t) const {
  while (t >= 0 && level_[t] > level_[r]) t = parent_[t];
  return t == r;
}

std::string HierarchyTree::label(int t) const {
  if (is_root(t)) return "t0";
  const int p = parent_[t];
  const auto& sibs = children_[p];
  const int pos =
      static_cast<int>(std::find(sibs.begin(), sibs.end(), t) - sibs.begin());
  return label(p) + "." + std::to_string(pos + 1);
}

}  // namespace hiergibbs
