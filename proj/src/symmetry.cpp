#include "hiergibbs/symmetry.hpp"

#include <cmath>

#include "hiergibbs/errors.hpp"

namespace hiergibbs {

Matrix partial_correlations(const Matrix& q) {
  const int n = static_cast<int>(q.rows());
  Matrix rho = Matrix::Identity(n, n);
  for (int t = 0; t < n; ++t) {
    if (!(q(t, t) > 0.0))
      throw ModelError("partial correlations need a positive diagonal");
  }
  for (int t = 0; t < n; ++t) {
    for (int r = t + 1; r < n; ++r) {
      const double v = -q(t, r) / std::sqrt(q(t, t) * q(r, r));
      rho(t, r) = v;
      rho(r, t) = v;
    }
  }
  return rho;
}

double AuxWalk::cond(int t, int r) const {
  if (!tree->is_ancestor_or_self(r, t)) return 0.0;
  double p = 1.0;
  while (t != r) {
    p *= step[t];
    t = tree->parent(t);
  }
  return p;
}

double AuxWalk::joint(int t, int r) const {
  if (tree->is_ancestor_or_self(r, t)) return marginal[r] * cond(t, r);
  if (tree->is_ancestor_or_self(t, r)) return marginal[t] * cond(r, t);
  throw ModelError("joint walk probability queried for an incomparable pair");
}

AuxWalk aux_walk(const Matrix& q, const HierarchyTree& tree) {
  const Matrix rho = partial_correlations(q);
  AuxWalk walk;
  walk.tree = &tree;
  walk.step.assign(tree.size(), 1.0);
  walk.marginal.assign(tree.size(), 1.0);
  for (int r = 0; r < tree.size(); ++r) {
    if (tree.is_leaf(r)) continue;
    double total = 0.0;
    for (int c : tree.children(r)) total += rho(c, r) * rho(c, r);
    if (!(total > 0.0))
      throw ModelError("degenerate walk: all child correlations vanish at " +
                       tree.label(r));
    for (int c : tree.children(r))
      walk.step[c] = rho(c, r) * rho(c, r) / total;
  }
  for (int t = 1; t < tree.size(); ++t)
    walk.marginal[t] = walk.marginal[tree.parent(t)] * walk.step[t];
  return walk;
}

namespace {

bool is_tree_structured(const Matrix& q, const HierarchyTree& tree,
                        double tol) {
  const double scale = q.cwiseAbs().maxCoeff();
  for (int t = 0; t < tree.size(); ++t) {
    for (int r = t + 1; r < tree.size(); ++r) {
      if (tree.parent(r) == t || tree.parent(t) == r) continue;
      if (std::abs(q(t, r)) > tol * scale) return false;
    }
  }
  return true;
}

}  // namespace

std::variant<SymmetryCertificate, SymmetryRejection> check_symmetry(
    const Matrix& q, const HierarchyTree& tree, double tol) {
  const Matrix rho = partial_correlations(q);
  const int k = tree.depth();
  SymmetryCertificate cert;
  cert.c = Matrix::Identity(k, k);
  cert.tol = tol;

  if (is_tree_structured(q, tree, tol)) {
    // Child-sum check: sum of squared child correlations constant per level.
    cert.check = SymmetryCertificate::Check::kChildSums;
    std::vector<double> level_sum(k, 0.0);
    std::vector<int> witness(k, -1);
    SymmetryRejection worst;
    for (int d = 0; d + 1 < k; ++d) {
      for (int t : tree.level_nodes(d)) {
        double s = 0.0;
        for (int c : tree.children(t)) s += rho(c, t) * rho(c, t);
        if (witness[d] < 0) {
          level_sum[d] = s;
          witness[d] = t;
          continue;
        }
        const double dev =
            std::abs(s - level_sum[d]) / std::max(level_sum[d], 1e-300);
        cert.max_deviation = std::max(cert.max_deviation, dev);
        if (dev > tol && dev > worst.deviation)
          worst = {witness[d], t, dev};
      }
    }
    if (worst.node_a >= 0) return worst;
    for (int d = 0; d + 1 < k; ++d) {
      cert.c(d, d + 1) = std::sqrt(level_sum[d]);
      cert.c(d + 1, d) = cert.c(d, d + 1);
    }
    return cert;
  }

  // General check over every comparable pair: rho_tr / sqrt(P(t|r)) must
  // depend only on the level pair, and incomparable correlations must vanish.
  cert.check = SymmetryCertificate::Check::kAllPairs;
  const AuxWalk walk = aux_walk(q, tree);
  Matrix first = Matrix::Zero(k, k);
  Eigen::MatrixXi seen = Eigen::MatrixXi::Zero(k, k);
  SymmetryRejection worst;
  std::vector<std::vector<int>> witness(k, std::vector<int>(k, -1));
  for (int r = 0; r < tree.size(); ++r) {
    for (int t = 0; t < tree.size(); ++t) {
      if (t == r) continue;
      const int dr = tree.level(r), dt = tree.level(t);
      if (tree.is_ancestor_or_self(r, t)) {
        const double cand = rho(t, r) / std::sqrt(walk.cond(t, r));
        if (!seen(dr, dt)) {
          first(dr, dt) = cand;
          seen(dr, dt) = 1;
          witness[dr][dt] = t;
          continue;
        }
        const double dev = std::abs(cand - first(dr, dt)) /
                           std::max(std::abs(first(dr, dt)), 1e-300);
        cert.max_deviation = std::max(cert.max_deviation, dev);
        if (dev > tol && dev > worst.deviation)
          worst = {witness[dr][dt], t, dev};
      } else if (!tree.is_ancestor_or_self(t, r)) {
        const double dev = std::abs(rho(t, r));
        cert.max_deviation = std::max(cert.max_deviation, dev);
        if (dev > tol && dev > worst.deviation) worst = {r, t, dev};
      }
    }
  }
  if (worst.node_a >= 0) return worst;
  for (int d = 0; d < k; ++d) {
    for (int p = 0; p < k; ++p) {
      if (seen(d, p)) {
        cert.c(d, p) = first(d, p);
        cert.c(p, d) = first(d, p);
      }
    }
  }
  return cert;
}

Rescaling rescale(const Matrix& q, const AuxWalk& walk) {
  const int n = static_cast<int>(q.rows());
  Rescaling out;
  out.scale = Vector::Zero(n);
  for (int t = 0; t < n; ++t)
    out.scale(t) = std::sqrt(q(t, t) / walk.marginal[t]);
  out.q_tilde = q;
  for (int t = 0; t < n; ++t) {
    for (int r = 0; r < n; ++r) out.q_tilde(t, r) /= out.scale(t) * out.scale(r);
  }
  return out;
}

}  // namespace hiergibbs
