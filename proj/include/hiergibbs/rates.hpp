#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "hiergibbs/model.hpp"

namespace hiergibbs {

// Largest-modulus eigenvalue, computed on a balanced copy of the matrix.
double spectral_radius(const Matrix& m);

// Convergence rate of the deterministic-scan sampler targeting N(., Q^-1)
// with single-site updates in index order: the spectral radius of
// (I - L)^-1 U, where L and U split the A-matrix of Q.
double spectral_rate(const Matrix& q);

// Closed-form rates for balanced three-level models, indexed by the
// per-level non-centring pattern.
struct Rates3 {
  double cc, nn, cn, nc;  // (0,0), (1,1), (0,1), (1,0)

  double by_pattern(int l1, int l2) const;
  double min() const;
};
Rates3 closed_form_rates_3(const NormalizedVariances& tv);

// Rates of the per-coarseness residual subchains for the same four schemes;
// row order (cc, nn, cn, nc), columns are coarseness 0,1,2.
std::array<std::array<double, 3>, 4> subchain_rates_3(
    const NormalizedVariances& tv);

// Closed-form rates for balanced four-level models; index is the binary
// pattern (l1 l2 l3), e.g. 0b101.
std::array<double, 8> closed_form_rates_4(const NormalizedVariances& tv);

// Centred-parametrization rate for a balanced k-level model, from the largest
// squared eigenvalue of the k x k two-band ratio matrix.  tau has one entry
// per level 1..k-1, branching likewise; J replicates per leaf with noise
// precision tau_e.
double symmetric_cp_rate_k(const std::vector<double>& tau, double tau_e,
                           const std::vector<int>& branching, int J);

// Rate of the two-level sampler under a per-branch 0/1 assignment; exact for
// any heterogeneous precisions.  tau_tilde[i] = J_i * tau_{e,i}.
double bespoke_rate_2(const std::vector<int>& lambda, double tau_a,
                      const std::vector<double>& tau_tilde);

// Upper bound on the centred-parametrization rate of a heterogeneous
// three-level model, valid when the stated ratio condition holds.
struct CpBound3 {
  bool applicable = false;
  double bound = 0.0;
  std::vector<double> r_ab, r_eb;  // per-group ratio inputs
};
CpBound3 cp_upper_bound_3(const ModelInstance& model);

// Rate of the coarseness-p residual subchain from a certified level-ratio
// matrix C: spectral radius of (I - L)^-1 U on the trailing minor of C - I.
double subchain_rate(const Matrix& c, int p);

// Full-chain rate for tree-structured (centred) certified targets: largest
// squared eigenvalue of C - I.
double cp_rate_k(const Matrix& c);

// Lag-1 vector autoregression fit over selected trace coordinates.  Returns
// the spectral radius of the fitted matrix and a circular block-bootstrap
// standard error.
struct EmpiricalRate {
  double estimate = 0.0;
  double stderr_est = 0.0;
  bool widened = false;  // sample covariance was near-singular
};
EmpiricalRate empirical_rate(const Matrix& states, int burn_in,
                             const std::vector<int>& coords, uint64_t seed);

}  // namespace hiergibbs
