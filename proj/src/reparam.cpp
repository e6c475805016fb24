#include "hiergibbs/reparam.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "hiergibbs/errors.hpp"

namespace hiergibbs {

CenteringAssignment CenteringAssignment::all_centred(
    const HierarchyTree& tree) {
  return {std::vector<int>(tree.size(), 0)};
}

CenteringAssignment CenteringAssignment::all_noncentred(
    const HierarchyTree& tree) {
  CenteringAssignment a{std::vector<int>(tree.size(), 1)};
  a.lambda[0] = 0;
  return a;
}

CenteringAssignment CenteringAssignment::per_level(
    const HierarchyTree& tree, const std::vector<int>& level_lambda) {
  if (static_cast<int>(level_lambda.size()) != tree.depth() - 1)
    throw ModelError("need one indicator per level below the root");
  CenteringAssignment a{std::vector<int>(tree.size(), 0)};
  for (int t = 1; t < tree.size(); ++t) {
    const int v = level_lambda[tree.level(t) - 1];
    if (v != 0 && v != 1) throw ModelError("centring indicators are 0 or 1");
    a.lambda[t] = v;
  }
  return a;
}

CenteringAssignment CenteringAssignment::from_shorthand(
    const HierarchyTree& tree, const std::string& code) {
  if (static_cast<int>(code.size()) != tree.depth() - 1)
    throw ConfigError("parametrization '" + code + "' needs " +
                      std::to_string(tree.depth() - 1) + " letters (c or n)");
  std::vector<int> lv;
  for (char c : code) {
    if (c == 'c')
      lv.push_back(0);
    else if (c == 'n')
      lv.push_back(1);
    else
      throw ConfigError("parametrization letters are 'c' or 'n', got '" +
                        std::string(1, c) + "'");
  }
  return per_level(tree, lv);
}

std::vector<int> CenteringAssignment::level_pattern(
    const HierarchyTree& tree) const {
  std::vector<int> lv(tree.depth() - 1, -1);
  for (int t = 1; t < tree.size(); ++t) {
    int& slot = lv[tree.level(t) - 1];
    if (slot < 0)
      slot = lambda[t];
    else if (slot != lambda[t])
      throw ModelError("assignment is not level-constant");
  }
  return lv;
}

std::string CenteringAssignment::shorthand(const HierarchyTree& tree) const {
  std::string s;
  for (int v : level_pattern(tree)) s += (v == 0 ? 'c' : 'n');
  return s;
}

Reparametrization::Reparametrization(
    const HierarchyTree& tree,
    std::vector<std::vector<std::pair<int, double>>> rows)
    : tree_(&tree), rows_(std::move(rows)) {}

Reparametrization Reparametrization::identity(const HierarchyTree& tree) {
  std::vector<std::vector<std::pair<int, double>>> rows(tree.size());
  for (int t = 0; t < tree.size(); ++t) rows[t] = {{t, 1.0}};
  return Reparametrization(tree, std::move(rows));
}

Reparametrization Reparametrization::from_centering(
    const CenteringAssignment& assign, const HierarchyTree& tree) {
  std::vector<std::vector<std::pair<int, double>>> rows(tree.size());
  rows[0] = {{0, 1.0}};
  for (int t = 1; t < tree.size(); ++t) {
    rows[t] = {{t, 1.0}};
    if (assign.lambda[t] != 0)
      rows[t].push_back({tree.parent(t), -1.0});
  }
  return Reparametrization(tree, std::move(rows));
}

Reparametrization Reparametrization::from_rows(
    const HierarchyTree& tree,
    std::vector<std::vector<std::pair<int, double>>> rows) {
  if (static_cast<int>(rows.size()) != tree.size())
    throw ModelError("reparametrization rows do not match the tree");
  for (int t = 0; t < tree.size(); ++t) {
    bool diag_seen = false;
    for (auto [r, v] : rows[t]) {
      if (!tree.is_ancestor_or_self(r, t))
        throw ModelError("coefficient outside the ancestor set at row " +
                         tree.label(t));
      if (r == t) {
        if (v == 0.0) throw ModelError("zero diagonal coefficient at " +
                                       tree.label(t));
        diag_seen = true;
      }
    }
    if (!diag_seen)
      throw ModelError("missing diagonal coefficient at " + tree.label(t));
  }
  return Reparametrization(tree, std::move(rows));
}

double Reparametrization::coeff(int t, int r) const {
  for (auto [s, v] : rows_[t]) {
    if (s == r) return v;
  }
  return 0.0;
}

Matrix Reparametrization::dense() const {
  const int n = tree_->size();
  Matrix m = Matrix::Zero(n, n);
  for (int t = 0; t < n; ++t) {
    for (auto [r, v] : rows_[t]) m(t, r) += v;
  }
  return m;
}

Vector Reparametrization::apply(const Vector& gamma) const {
  const int n = tree_->size();
  Vector beta = Vector::Zero(n);
  for (int t = 0; t < n; ++t) {
    double acc = 0.0;
    for (auto [r, v] : rows_[t]) acc += v * gamma(r);
    beta(t) = acc;
  }
  return beta;
}

Vector Reparametrization::apply_inverse(const Vector& beta) const {
  const int n = tree_->size();
  Vector gamma = Vector::Zero(n);
  for (int t = 0; t < n; ++t) {
    double acc = beta(t);
    double diag = 1.0;
    for (auto [r, v] : rows_[t]) {
      if (r == t)
        diag = v;
      else
        acc -= v * gamma(r);
    }
    gamma(t) = acc / diag;
  }
  return gamma;
}

Reparametrization Reparametrization::inverse() const {
  const int n = tree_->size();
  std::vector<std::vector<std::pair<int, double>>> z(n);
  // Dense-on-ancestors forward substitution; nodes arrive parents-first.
  std::vector<std::map<int, double>> zmap(n);
  for (int t = 0; t < n; ++t) {
    const double diag = coeff(t, t);
    zmap[t][t] = 1.0 / diag;
    for (int r = tree_->parent(t); r >= 0; r = tree_->parent(r)) {
      double acc = 0.0;
      for (auto [s, v] : rows_[t]) {
        if (s == t) continue;
        auto it = zmap[s].find(r);
        if (it != zmap[s].end()) acc += v * it->second;
      }
      if (acc != 0.0) zmap[t][r] = -acc / diag;
    }
    z[t].assign(zmap[t].begin(), zmap[t].end());
  }
  return Reparametrization(*tree_, std::move(z));
}

Reparametrization Reparametrization::compose(
    const Reparametrization& other) const {
  const int n = tree_->size();
  std::vector<std::vector<std::pair<int, double>>> rows(n);
  for (int t = 0; t < n; ++t) {
    std::map<int, double> acc;
    for (auto [s, v] : rows_[t]) {
      for (auto [r, w] : other.rows_[s]) acc[r] += v * w;
    }
    for (auto [r, v] : acc) {
      if (v != 0.0 || r == t) rows[t].push_back({r, v});
    }
  }
  return from_rows(*tree_, std::move(rows));
}

Matrix Reparametrization::apply_to_precision(const Matrix& q) const {
  const Matrix z = inverse().dense();
  return z.transpose() * q * z;
}

Vector Reparametrization::apply_to_information(const Vector& b) const {
  return inverse().dense().transpose() * b;
}

PncpResult optimal_pncp(const Matrix& q, const HierarchyTree& tree) {
  const int n = tree.size();
  std::vector<double> d(n, 0.0);
  std::vector<double> parent_coeff(n, 0.0);
  for (int t = n - 1; t >= 0; --t) {
    double dt = q(t, t);
    for (int c : tree.children(t)) dt -= parent_coeff[c] * parent_coeff[c] * d[c];
    if (!(dt > 1e-14 * std::max(1.0, q(t, t))))
      throw ModelError("non-positive pivot in the decorrelating recursion");
    d[t] = dt;
    if (!tree.is_root(t)) parent_coeff[t] = q(t, tree.parent(t)) / dt;
  }
  std::vector<std::vector<std::pair<int, double>>> rows(n);
  rows[0] = {{0, 1.0}};
  for (int t = 1; t < n; ++t)
    rows[t] = {{t, 1.0}, {tree.parent(t), parent_coeff[t]}};
  return {Reparametrization::from_rows(tree, std::move(rows)), std::move(d)};
}

CenteringAssignment recommend_parametrization_3(const HierarchyTree& tree,
                                                const NormalizedVariances& tv) {
  if (tree.depth() != 3 || tv.levels() != 3)
    throw ModelError("the per-level recommendation rule is for 3 levels");
  const int l1 = tv.a() >= tv.b() + tv.e() ? 0 : 1;
  const int l2 = tv.b() >= tv.e() ? 0 : 1;
  return CenteringAssignment::per_level(tree, {l1, l2});
}

CenteringAssignment bespoke_recommend_2(const ModelInstance& model) {
  if (model.levels() != 2) throw ModelError("bespoke rule needs 2 levels");
  CenteringAssignment a{std::vector<int>(model.tree.size(), 0)};
  for (int t : model.tree.leaves()) {
    const double tau_tilde = static_cast<double>(model.leaf_count[t]) *
                             model.noise_precision[t];
    a.lambda[t] = model.node_precision[t] > tau_tilde ? 1 : 0;
  }
  return a;
}

CenteringAssignment bespoke_recommend_3(const ModelInstance& model) {
  if (model.levels() != 3) throw ModelError("bespoke heuristic needs 3 levels");
  CenteringAssignment a{std::vector<int>(model.tree.size(), 0)};
  for (int t : model.tree.leaves()) {
    // var_b < var_e / K, written with precisions.
    const double lhs = static_cast<double>(model.leaf_count[t]) *
                       model.noise_precision[t];
    a.lambda[t] = lhs < model.node_precision[t] ? 1 : 0;
  }
  for (int g : model.tree.level_nodes(1)) {
    double sum = 0.0;
    for (int c : model.tree.children(g)) {
      const double var_b = 1.0 / model.node_precision[c];
      const double var_e_over_k =
          1.0 / (static_cast<double>(model.leaf_count[c]) *
                 model.noise_precision[c]);
      sum += 1.0 / (var_b + var_e_over_k);
    }
    a.lambda[g] = model.node_precision[g] > sum ? 1 : 0;
  }
  return a;
}

}  // namespace hiergibbs
