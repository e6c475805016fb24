#pragma once

#include <vector>

#include "hiergibbs/gibbs.hpp"
#include "hiergibbs/model.hpp"
#include "hiergibbs/symmetry.hpp"
#include "hiergibbs/tree.hpp"

namespace hiergibbs {

// Walk-weighted averages of level-d values at coarseness p <= d: entry r of
// the result is sum_t values[t] * P(t | r) over t in T_d.  p == d returns the
// input, p == 0 the walk-weighted grand mean.
std::vector<double> phi(int p, int d, const std::vector<double>& level_values,
                        const AuxWalk& walk);

// Residuals between consecutive coarseness levels; delta at p == 0 is phi at
// the root.  The walk-weighted sum of the residuals over each sibling set is
// exactly zero, and summing the residuals along the ancestor chain of t
// reconstructs values[t].
std::vector<double> delta(int p, int d, const std::vector<double>& level_values,
                          const AuxWalk& walk);

// T_p with one child per level-(p-1) parent removed (the first child); the
// residuals restricted to this set carry a nonsingular covariance.
std::vector<int> reduced_basis(int p, const HierarchyTree& tree);

// Square change of basis from rescaled node coordinates to residual
// coordinates.  Rows are grouped per coarseness p, d-major inside a group,
// nodes of reduced_basis(p) innermost.
struct ResidualDecomposition {
  Matrix map;      // row (p, d, r), column t: scale_t * (P(t|r) - P(t|pa r))
  Matrix inverse;  // map^-1
  Vector scale;    // identity scaling when default-constructed from a walk
  std::vector<int> block_begin;  // per p, plus a terminating end index
  struct RowMeta {
    int p, d, node;
  };
  std::vector<RowMeta> rows;

  int blocks() const { return static_cast<int>(block_begin.size()) - 1; }
  int block_size(int p) const { return block_begin[p + 1] - block_begin[p]; }
};

// scale defaults to all-ones; pass Rescaling::scale for heterogeneous models.
ResidualDecomposition residual_decomposition(const AuxWalk& walk,
                                             const HierarchyTree& tree,
                                             const Vector* scale = nullptr);

// Splits a recorded trace into the per-coarseness subchains.
std::vector<Trace> decompose_trace(const Trace& trace,
                                   const ResidualDecomposition& decomp);
// Convenience overload building the unscaled decomposition from the walk.
std::vector<Trace> decompose_trace(const Trace& trace, const AuxWalk& walk);

// Conjugates the one-sweep update matrix into residual coordinates and
// measures how far it is from block-diagonal.  Certified models give
// off-block mass at rounding level; a large value is a counterexample
// report, not an error.
struct FactorizationReport {
  double max_off_block = 0.0;
  int worst_row = -1, worst_col = -1;
  std::vector<Matrix> block_update;  // per-p update matrices
  std::vector<double> block_rate;    // spectral radius per block
};

FactorizationReport verify_factorization(const GibbsUpdate& update,
                                         const ResidualDecomposition& decomp);

}  // namespace hiergibbs
