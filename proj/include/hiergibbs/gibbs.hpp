#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "hiergibbs/model.hpp"
#include "hiergibbs/reparam.hpp"
#include "hiergibbs/rng.hpp"
#include "hiergibbs/tree.hpp"

namespace hiergibbs {

// Exact linear-Gaussian form of one full sweep: next = B * state + offset +
// noise, with noise covariance noise_factor * noise_factor^T.  B has spectral
// radius < 1 for positive-definite targets and the stationary covariance
// solves S = B S B^T + N N^T.
struct GibbsUpdate {
  Matrix b;
  Vector offset;
  Matrix noise_factor;
};

GibbsUpdate update_matrix(const Matrix& q, const Vector& info);

// Prepared single-sweep sampler over a sparse precision.  Construction
// rejects precisions that couple same-level or incomparable nodes, since the
// level-synchronous sweep updates all nodes of a level from the same
// conditioning state.
class GibbsTarget {
 public:
  static GibbsTarget from_precision(const Matrix& q, const Vector& info,
                                    const HierarchyTree& tree);

  const HierarchyTree& tree() const { return *tree_; }
  int size() const { return static_cast<int>(diag_.size()); }

  // Serial reference kernel and the OpenMP kernel produce bit-identical
  // states: per-node noise comes from counter streams and each node reads
  // only other-level coordinates.
  void sweep_reference(Vector& state, const CounterRng& rng,
                       uint64_t iter) const;
  void sweep_parallel(Vector& state, const CounterRng& rng,
                      uint64_t iter) const;

 private:
  const HierarchyTree* tree_;
  std::vector<double> diag_;
  std::vector<double> inv_diag_;
  std::vector<double> noise_sd_;
  std::vector<double> info_;
  std::vector<std::vector<std::pair<int, double>>> neighbors_;

  void update_node(int t, Vector& state, const CounterRng& rng,
                   uint64_t iter) const;
};

struct Trace {
  std::vector<std::string> labels;
  Matrix states;  // one row per recorded sweep
  uint64_t seed = 0;
  std::string param_tag;
  int thin = 1;
  Matrix variance_track;  // empty unless variances were sampled
  std::vector<std::pair<int, int>> assignment_track;  // adaptive runs only
};

enum class Engine { kAuto, kGeneric, kFastS3 };
enum class Kernel { kAuto, kSerial, kParallel };

struct RunOptions {
  int64_t iters = 1000;
  uint64_t seed = 1;
  int thin = 1;
  std::optional<Vector> init;  // in the active parametrization; default zero
  Engine engine = Engine::kAuto;
  Kernel kernel = Kernel::kAuto;
};

// Deterministic-scan sampler for the model under a 0/1 assignment or a
// general reparametrization.  Sweeps run root level to leaf level; nodes
// within a level see the same conditioning state.
Trace run_chain(const ModelInstance& model, const CenteringAssignment& assign,
                const RunOptions& opts);
Trace run_chain(const ModelInstance& model, const Reparametrization& reparam,
                const RunOptions& opts);

// Conjugate prior on each precision (shape/rate).
struct IgPrior {
  double shape = 0.01;
  double rate = 0.01;
};

struct VarianceAugmentedOptions {
  int64_t iters = 1000;
  uint64_t seed = 1;
  int thin = 1;
  bool adaptive = false;
  std::pair<int, int> assignment = {0, 0};     // fixed runs
  std::optional<Vector> init_state;            // centred coordinates
  std::optional<std::array<double, 3>> init_variances;
  IgPrior prior_a, prior_b, prior_e;
};

// Balanced three-level sampler with unknown variances: alternates a mean
// sweep with conjugate precision draws.  Adaptive mode re-selects the
// assignment from the freshly drawn variances each iteration and maps the
// state across parametrizations exactly.  Fixed runs record the native
// coordinates; adaptive runs record centred coordinates plus the assignment
// track.
Trace run_variance_augmented(const ModelInstance& model,
                             const VarianceAugmentedOptions& opts);

// Plain per-level averages of a recorded trace (the global means watched in
// mixing diagnostics); column d is the average of level-d coordinates.
Matrix level_means(const Trace& trace, const HierarchyTree& tree);

// True for balanced three-level models with level-constant variances, the
// precondition of the specialized sweep.
bool s3_fast_path_applicable(const ModelInstance& model);

}  // namespace hiergibbs
