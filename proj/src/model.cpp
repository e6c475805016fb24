#include "hiergibbs/model.hpp"

#include <cmath>
#include <numeric>

#include "hiergibbs/errors.hpp"
#include "hiergibbs/rng.hpp"

namespace hiergibbs {

NormalizedVariances NormalizedVariances::of3(double a, double b, double e) {
  return {{a, b, e}};
}

NormalizedVariances NormalizedVariances::of4(double v1, double v2, double v3,
                                             double v4) {
  return {{v1, v2, v3, v4}};
}

ModelInstance ModelInstance::symmetric3(int I, int J, int K, double var_a,
                                        double var_b, double var_e) {
  return symmetric_k({I, J}, {var_a, var_b}, var_e, K);
}

ModelInstance ModelInstance::symmetric_k(const std::vector<int>& branching,
                                         const std::vector<double>& level_var,
                                         double var_e, int J) {
  if (level_var.size() != branching.size())
    throw ModelError("need one variance per level below the root");
  HierarchyTree tree = HierarchyTree::balanced(branching);
  const int n = tree.size();
  ModelInstance m;
  m.tree = tree;
  m.node_precision.assign(n, 0.0);
  m.noise_precision.assign(n, 0.0);
  m.leaf_count.assign(n, 0);
  for (int t = 1; t < n; ++t)
    m.node_precision[t] = 1.0 / level_var[m.tree.level(t) - 1];
  for (int t : m.tree.leaves()) {
    m.noise_precision[t] = 1.0 / var_e;
    m.leaf_count[t] = J;
  }
  m.validate();
  return m;
}

ModelInstance ModelInstance::nonsymmetric3(
    double var_a, const std::vector<double>& var_b,
    const std::vector<std::vector<double>>& var_e,
    const std::vector<std::vector<int>>& K) {
  const int I = static_cast<int>(var_b.size());
  if (static_cast<int>(var_e.size()) != I ||
      static_cast<int>(K.size()) != I)
    throw ModelError("group counts in nonsymmetric3 arguments disagree");
  std::vector<int> parent{-1};
  for (int i = 0; i < I; ++i) parent.push_back(0);
  for (int i = 0; i < I; ++i) {
    if (var_e[i].size() != K[i].size())
      throw ModelError("subgroup counts in nonsymmetric3 arguments disagree");
    for (size_t j = 0; j < var_e[i].size(); ++j) parent.push_back(1 + i);
  }
  HierarchyTree tree = HierarchyTree::from_parents(parent);
  const int n = tree.size();
  ModelInstance m;
  m.tree = tree;
  m.node_precision.assign(n, 0.0);
  m.noise_precision.assign(n, 0.0);
  m.leaf_count.assign(n, 0);
  for (int i = 0; i < I; ++i) {
    const int gi = 1 + i;
    m.node_precision[gi] = 1.0 / var_a;
    const auto& kids = tree.children(gi);
    for (size_t j = 0; j < kids.size(); ++j) {
      const int t = kids[j];
      m.node_precision[t] = 1.0 / var_b[i];
      m.noise_precision[t] = 1.0 / var_e[i][j];
      m.leaf_count[t] = K[i][j];
    }
  }
  m.validate();
  return m;
}

ModelInstance ModelInstance::two_level(double tau_a,
                                       const std::vector<double>& tau_e,
                                       const std::vector<int>& J) {
  const int I = static_cast<int>(tau_e.size());
  if (static_cast<int>(J.size()) != I)
    throw ModelError("group counts in two_level arguments disagree");
  std::vector<int> parent{-1};
  for (int i = 0; i < I; ++i) parent.push_back(0);
  HierarchyTree tree = HierarchyTree::from_parents(parent);
  ModelInstance m;
  m.tree = tree;
  m.node_precision.assign(I + 1, tau_a);
  m.node_precision[0] = 0.0;
  m.noise_precision.assign(I + 1, 0.0);
  m.leaf_count.assign(I + 1, 0);
  for (int i = 0; i < I; ++i) {
    m.noise_precision[1 + i] = tau_e[i];
    m.leaf_count[1 + i] = J[i];
  }
  m.validate();
  return m;
}

ModelInstance ModelInstance::general(HierarchyTree tree,
                                     std::vector<double> node_precision,
                                     std::vector<double> noise_precision,
                                     std::vector<int64_t> leaf_count) {
  ModelInstance m;
  m.tree = std::move(tree);
  m.node_precision = std::move(node_precision);
  m.noise_precision = std::move(noise_precision);
  m.leaf_count = std::move(leaf_count);
  m.validate();
  return m;
}

int64_t ModelInstance::total_count() const {
  int64_t n = 0;
  for (int t : tree.leaves()) n += leaf_count[t];
  return n;
}

void ModelInstance::validate() const {
  const int n = tree.size();
  if (static_cast<int>(node_precision.size()) != n ||
      static_cast<int>(noise_precision.size()) != n ||
      static_cast<int>(leaf_count.size()) != n)
    throw ModelError("model arrays do not match the tree size");
  for (int t = 1; t < n; ++t) {
    if (!(node_precision[t] > 0.0))
      throw ModelError("node precision must be positive at " + tree.label(t));
  }
  for (int t : tree.leaves()) {
    if (!(noise_precision[t] > 0.0))
      throw ModelError("noise precision must be positive at " + tree.label(t));
    if (leaf_count[t] < 1)
      throw ModelError("leaf count must be >= 1 at " + tree.label(t));
  }
  if (has_data &&
      (leaf_mean.size() != static_cast<size_t>(n) ||
       leaf_ssd.size() != static_cast<size_t>(n)))
    throw ModelError("data arrays do not match the tree size");
}

NormalizedVariances ModelInstance::normalized_variances() const {
  const int k = levels();
  NormalizedVariances tv;
  tv.v.assign(k, 0.0);
  double units = 1.0;
  for (int d = 1; d < k; ++d) {
    const auto& nodes = tree.level_nodes(d);
    units = static_cast<double>(nodes.size());
    const double tau = node_precision[nodes.front()];
    for (int t : nodes) {
      if (node_precision[t] != tau)
        throw ModelError("normalized variances need level-constant precisions");
    }
    tv.v[d - 1] = 1.0 / (tau * units);
  }
  const auto& leaves = tree.leaves();
  const double tau_e = noise_precision[leaves.front()];
  const int64_t n0 = leaf_count[leaves.front()];
  for (int t : leaves) {
    if (noise_precision[t] != tau_e || leaf_count[t] != n0)
      throw ModelError("normalized variances need balanced leaf data");
  }
  tv.v[k - 1] = 1.0 / (tau_e * units * static_cast<double>(n0));
  return tv;
}

ModelInstance simulate_data(const ModelInstance& model, double true_root,
                            uint64_t seed) {
  ModelInstance out = model;
  const int n = model.tree.size();
  out.leaf_mean.assign(n, 0.0);
  out.leaf_ssd.assign(n, 0.0);
  const CounterRng rng(seed);
  std::vector<double> value(n, true_root);
  for (int t = 1; t < n; ++t) {
    const double sd = 1.0 / std::sqrt(model.node_precision[t]);
    value[t] = value[model.tree.parent(t)] +
               sd * rng.normal(stream_id(StreamTag::kSimulate, t), 0);
  }
  for (int t : model.tree.leaves()) {
    const double sd = 1.0 / std::sqrt(model.noise_precision[t]);
    const int64_t cnt = model.leaf_count[t];
    double sum = 0.0;
    double sumsq = 0.0;
    for (int64_t i = 0; i < cnt; ++i) {
      const double y =
          value[t] +
          sd * rng.normal(stream_id(StreamTag::kSimulate, t), 1 + i);
      sum += y;
      sumsq += y * y;
    }
    const double mean = sum / static_cast<double>(cnt);
    out.leaf_mean[t] = mean;
    out.leaf_ssd[t] = std::max(0.0, sumsq - mean * sum);
  }
  out.has_data = true;
  return out;
}

Matrix posterior_precision(const ModelInstance& model) {
  if (!model.has_data)
    throw ModelError("posterior precision needs data (simulate or supply it)");
  const int n = model.tree.size();
  Matrix q = Matrix::Zero(n, n);
  for (int t = 0; t < n; ++t) {
    double diag = model.tree.is_root(t) ? 0.0 : model.node_precision[t];
    for (int c : model.tree.children(t)) diag += model.node_precision[c];
    if (model.tree.is_leaf(t))
      diag += static_cast<double>(model.leaf_count[t]) *
              model.noise_precision[t];
    q(t, t) = diag;
    if (!model.tree.is_root(t)) {
      const int p = model.tree.parent(t);
      q(t, p) = -model.node_precision[t];
      q(p, t) = -model.node_precision[t];
    }
  }
  return q;
}

Vector information_vector(const ModelInstance& model) {
  if (!model.has_data)
    throw ModelError("information vector needs data");
  const int n = model.tree.size();
  Vector b = Vector::Zero(n);
  for (int t : model.tree.leaves())
    b(t) = static_cast<double>(model.leaf_count[t]) *
           model.noise_precision[t] * model.leaf_mean[t];
  return b;
}

Matrix a_matrix(const Matrix& q) {
  const int n = static_cast<int>(q.rows());
  Matrix a = Matrix::Zero(n, n);
  for (int t = 0; t < n; ++t) {
    if (q(t, t) == 0.0)
      throw ModelError("A-matrix undefined: zero diagonal entry in Q");
    for (int r = 0; r < n; ++r) {
      if (r != t) a(t, r) = -q(t, r) / q(t, t);
    }
  }
  return a;
}

bool is_positive_definite(const Matrix& q) {
  Eigen::LLT<Matrix> llt(q);
  return llt.info() == Eigen::Success;
}

}  // namespace hiergibbs
