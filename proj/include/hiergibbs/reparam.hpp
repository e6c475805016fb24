#pragma once

#include <string>
#include <vector>

#include "hiergibbs/model.hpp"
#include "hiergibbs/tree.hpp"

namespace hiergibbs {

// 0/1 non-centring indicators, one per non-root node.  0 keeps the node on
// its parent's scale, 1 turns it into an offset with prior mean zero.
struct CenteringAssignment {
  std::vector<int> lambda;  // indexed by node; root entry is always 0

  static CenteringAssignment all_centred(const HierarchyTree& tree);
  static CenteringAssignment all_noncentred(const HierarchyTree& tree);
  static CenteringAssignment per_level(const HierarchyTree& tree,
                                       const std::vector<int>& level_lambda);
  // "cc", "cn", "nc", ... : one letter per level below the root.
  static CenteringAssignment from_shorthand(const HierarchyTree& tree,
                                            const std::string& code);

  // Per-level indicators; only defined when the assignment is level-constant.
  std::vector<int> level_pattern(const HierarchyTree& tree) const;
  std::string shorthand(const HierarchyTree& tree) const;

  bool operator==(const CenteringAssignment&) const = default;
};

// Sparse linear coordinate change beta = Lambda gamma where row t carries
// coefficients only on ancestors of t and the diagonal never vanishes.  The
// family is closed under composition and inversion, and conjugating a
// tree-structured precision by any member keeps all incomparable pairs
// conditionally independent.
class Reparametrization {
 public:
  static Reparametrization identity(const HierarchyTree& tree);

  // lambda_tt = 1, lambda_{t,pa(t)} = -lambda_t.  Chaining non-centred levels
  // composes to pure offset coordinates without storing deeper ancestors.
  static Reparametrization from_centering(const CenteringAssignment& assign,
                                          const HierarchyTree& tree);

  // rows[t] lists (ancestor node, coefficient) pairs including the diagonal.
  static Reparametrization from_rows(
      const HierarchyTree& tree,
      std::vector<std::vector<std::pair<int, double>>> rows);

  const HierarchyTree& tree() const { return *tree_; }
  double coeff(int t, int r) const;
  Matrix dense() const;

  Vector apply(const Vector& gamma) const;           // beta = Lambda gamma
  Vector apply_inverse(const Vector& beta) const;    // gamma from beta
  Matrix apply_to_precision(const Matrix& q) const;  // Lambda^-T Q Lambda^-1
  Vector apply_to_information(const Vector& b) const;

  Reparametrization inverse() const;
  // (this o other): maps x to this->apply(other.apply(x)).
  Reparametrization compose(const Reparametrization& other) const;

 private:
  Reparametrization(const HierarchyTree& tree,
                    std::vector<std::vector<std::pair<int, double>>> rows);
  const HierarchyTree* tree_;
  std::vector<std::vector<std::pair<int, double>>> rows_;
};

// Output of the exact decorrelating reparametrization: beta = Lambda gamma has
// diagonal posterior precision D.
struct PncpResult {
  Reparametrization lambda;
  std::vector<double> d;  // posterior precision of each transformed coordinate
};

// Leaf-to-root recursion producing the reparametrization under which the
// posterior coordinates are independent.  q must be tree-structured (the
// centred-parametrization posterior precision).
PncpResult optimal_pncp(const Matrix& q, const HierarchyTree& tree);

// Rate-optimal per-level assignment for three-level balanced models.  Ties
// resolve toward centring.
CenteringAssignment recommend_parametrization_3(const HierarchyTree& tree,
                                                const NormalizedVariances& tv);

// Per-branch rules: exact optimum for two-level models, heuristic for
// three-level ones.
CenteringAssignment bespoke_recommend_2(const ModelInstance& model);
CenteringAssignment bespoke_recommend_3(const ModelInstance& model);

}  // namespace hiergibbs
