#pragma once

#include <variant>
#include <vector>

#include "hiergibbs/model.hpp"
#include "hiergibbs/tree.hpp"

namespace hiergibbs {

// rho_tr = -Q_tr / sqrt(Q_tt Q_rr), unit diagonal.
Matrix partial_correlations(const Matrix& q);

// Root-to-leaf auxiliary walk: from node r, step to child t with probability
// proportional to the squared partial correlation rho_tr^2.
struct AuxWalk {
  std::vector<double> step;      // P(t | pa(t)); 1 at the root
  std::vector<double> marginal;  // P(t)
  const HierarchyTree* tree = nullptr;

  // P(t | r) for an ancestor r of t; the path product.  0 when incomparable.
  double cond(int t, int r) const;
  // P(t and r) for comparable t, r.
  double joint(int t, int r) const;
};

AuxWalk aux_walk(const Matrix& q, const HierarchyTree& tree);

// Level-ratio certificate: partial correlations depend on node pairs only
// through their levels and the walk weights.
struct SymmetryCertificate {
  Matrix c;  // k x k, unit diagonal, symmetric on defined entries
  enum class Check { kChildSums, kAllPairs } check;
  double max_deviation = 0.0;
  double tol = 0.0;
};

struct SymmetryRejection {
  int node_a = -1;
  int node_b = -1;
  double deviation = 0.0;
};

// Certifies the level-ratio structure or reports the worst-offending pair.
// Tree-structured precisions take the child-sum fast path; anything else is
// checked pairwise over all comparable pairs.
std::variant<SymmetryCertificate, SymmetryRejection> check_symmetry(
    const Matrix& q, const HierarchyTree& tree, double tol = 1e-9);

// Coordinate-wise rescaling beta_t * sqrt(Q_tt / P(t)).  On certified models
// the rescaled precision has diagonal P(t) and off-diagonal -c * P(t and r).
struct Rescaling {
  Vector scale;    // multiplies the state
  Matrix q_tilde;  // precision of the rescaled vector
};

Rescaling rescale(const Matrix& q, const AuxWalk& walk);

}  // namespace hiergibbs
