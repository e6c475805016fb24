#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <vector>

#include "hiergibbs/tree.hpp"

namespace hiergibbs {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Per-level variances rescaled by the number of bottom-level units they
// govern.  Entry d-1 is the level-d variance (d = 1..k-1); the last entry is
// the rescaled observation-noise variance.  These are the natural inputs of
// every closed-form convergence rate.
struct NormalizedVariances {
  std::vector<double> v;

  static NormalizedVariances of3(double a, double b, double e);
  static NormalizedVariances of4(double v1, double v2, double v3, double v4);

  int levels() const { return static_cast<int>(v.size()); }
  double a() const { return v[0]; }
  double b() const { return v[1]; }
  double e() const { return v.back(); }
};

// Gaussian hierarchical model on a tree: a latent value per node, the root
// carrying a flat prior, each other node Gaussian around its parent, and
// replicated observations at the leaves.  Data enter only through per-leaf
// sufficient statistics (count, mean, within-leaf sum of squared deviations),
// so memory is O(|T|) regardless of the observation count.
struct ModelInstance {
  HierarchyTree tree;
  std::vector<double> node_precision;   // tau_t; entry 0 (root) is unused
  std::vector<double> noise_precision;  // per node; meaningful on leaves only
  std::vector<int64_t> leaf_count;      // n_t, per node; >= 1 on leaves
  std::vector<double> leaf_mean;        // ybar_t, valid when has_data
  std::vector<double> leaf_ssd;         // sum_i (y_i - ybar_t)^2, valid when has_data
  bool has_data = false;

  // Balanced three-level model: I groups, J subgroups, K replicates.
  static ModelInstance symmetric3(int I, int J, int K, double var_a,
                                  double var_b, double var_e);

  // Balanced k-level model with per-level branching, per-level variances and
  // J replicates per leaf.
  static ModelInstance symmetric_k(const std::vector<int>& branching,
                                   const std::vector<double>& level_var,
                                   double var_e, int J);

  // Three-level model with per-group subgroup counts J_i, per-subgroup
  // replicate counts K_ij and heterogeneous variances.
  static ModelInstance nonsymmetric3(double var_a,
                                     const std::vector<double>& var_b,
                                     const std::vector<std::vector<double>>& var_e,
                                     const std::vector<std::vector<int>>& K);

  // Two-level model in precision form: I groups, J_i observations per group.
  static ModelInstance two_level(double tau_a,
                                 const std::vector<double>& tau_e,
                                 const std::vector<int>& J);

  static ModelInstance general(HierarchyTree tree,
                               std::vector<double> node_precision,
                               std::vector<double> noise_precision,
                               std::vector<int64_t> leaf_count);

  int levels() const { return tree.depth(); }
  int64_t total_count() const;

  // Only defined for balanced models with level-constant precisions.
  NormalizedVariances normalized_variances() const;

  void validate() const;
};

// Forward-samples the generative model and fills in the leaf summaries.
// Deterministic given the seed.
ModelInstance simulate_data(const ModelInstance& model, double true_root,
                            uint64_t seed);

// Posterior precision of the node values given the leaf data, in the
// parametrization where each node sits on its parent's scale.  Tridiagonal on
// the tree: Q_tr = 0 unless r is t, t's parent or one of t's children.
Matrix posterior_precision(const ModelInstance& model);

// Information vector b so that the posterior is N(Q^{-1} b, Q^{-1}).
Vector information_vector(const ModelInstance& model);

// Full-conditional regression coefficients A_tr = -Q_tr / Q_tt, zero diagonal.
Matrix a_matrix(const Matrix& q);

// Cholesky-based positive-definiteness check.
bool is_positive_definite(const Matrix& q);

}  // namespace hiergibbs
