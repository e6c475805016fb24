#include "hiergibbs/gibbs.hpp"

#include <algorithm>
#include <cmath>

#include "hiergibbs/errors.hpp"

namespace hiergibbs {

GibbsUpdate update_matrix(const Matrix& q, const Vector& info) {
  if (!is_positive_definite(q))
    throw ModelError("update matrix needs a positive-definite precision");
  const int n = static_cast<int>(q.rows());
  const Matrix lower = q.triangularView<Eigen::Lower>();  // D + L
  const Matrix u = q.triangularView<Eigen::StrictlyUpper>();
  GibbsUpdate out;
  out.b = -lower.triangularView<Eigen::Lower>().solve(u);
  out.offset = lower.triangularView<Eigen::Lower>().solve(info);
  Matrix dsqrt = Matrix::Zero(n, n);
  for (int t = 0; t < n; ++t) dsqrt(t, t) = std::sqrt(q(t, t));
  out.noise_factor = lower.triangularView<Eigen::Lower>().solve(dsqrt);
  return out;
}

GibbsTarget GibbsTarget::from_precision(const Matrix& q, const Vector& info,
                                        const HierarchyTree& tree) {
  const int n = tree.size();
  if (q.rows() != n || q.cols() != n || info.size() != n)
    throw ModelError("precision dimensions do not match the tree");
  if (!is_positive_definite(q))
    throw ModelError("sampler target must be positive definite");
  const double scale = q.cwiseAbs().maxCoeff();
  GibbsTarget target;
  target.tree_ = &tree;
  target.diag_.resize(n);
  target.inv_diag_.resize(n);
  target.noise_sd_.resize(n);
  target.info_.resize(n);
  target.neighbors_.resize(n);
  for (int t = 0; t < n; ++t) {
    target.diag_[t] = q(t, t);
    target.inv_diag_[t] = 1.0 / q(t, t);
    target.noise_sd_[t] = 1.0 / std::sqrt(q(t, t));
    target.info_[t] = info(t);
    for (int r = 0; r < n; ++r) {
      if (r == t || q(t, r) == 0.0) continue;
      const bool comparable = tree.is_ancestor_or_self(r, t) ||
                              tree.is_ancestor_or_self(t, r);
      if (!comparable) {
        if (std::abs(q(t, r)) > 1e-10 * scale)
          throw ModelError(
              "parametrization couples nodes across branches; the "
              "level-synchronous sweep does not apply");
        continue;  // cancellation residue of an exact structural zero
      }
      target.neighbors_[t].push_back({r, q(t, r)});
    }
  }
  return target;
}

void GibbsTarget::update_node(int t, Vector& state, const CounterRng& rng,
                              uint64_t iter) const {
  double acc = info_[t];
  for (auto [r, v] : neighbors_[t]) acc -= v * state(r);
  state(t) = acc * inv_diag_[t] +
             noise_sd_[t] *
                 rng.normal(stream_id(StreamTag::kSweepNoise, t), iter);
}

void GibbsTarget::sweep_reference(Vector& state, const CounterRng& rng,
                                  uint64_t iter) const {
  for (int d = 0; d < tree_->depth(); ++d) {
    for (int t : tree_->level_nodes(d)) update_node(t, state, rng, iter);
  }
}

// Levels narrower than this run serially inside the parallel kernel; a
// fork/join costs more than a few hundred node updates.
constexpr int kParallelWidthCutoff = 512;

// Auto dispatch picks the OpenMP kernel only for clearly wide levels, where
// the per-level region cost amortizes.
constexpr int kAutoParallelWidth = 4096;

void GibbsTarget::sweep_parallel(Vector& state, const CounterRng& rng,
                                 uint64_t iter) const {
  for (int d = 0; d < tree_->depth(); ++d) {
    const auto& nodes = tree_->level_nodes(d);
    const int width = static_cast<int>(nodes.size());
    if (width < kParallelWidthCutoff) {
      for (int i = 0; i < width; ++i) update_node(nodes[i], state, rng, iter);
      continue;
    }
#pragma omp parallel for schedule(static)
    for (int i = 0; i < width; ++i) update_node(nodes[i], state, rng, iter);
  }
}

namespace {

// Specialized sweep for balanced three-level models.  Coordinates: 0 the
// root, 1..I the groups, then the I*J leaves in breadth-first order.  The
// non-centring pattern (l1, l2) selects which of the four coordinate systems
// the state lives in; variances are passed per sweep so the unknown-variance
// sampler can reuse the kernel.
struct S3Engine {
  int I, J, K;
  int64_t n;
  std::vector<double> ybar;     // per leaf, row-major (i, j)
  std::vector<double> ybar_i;   // per group
  double ybar_all = 0.0;
  double total_ssd = 0.0;

  static S3Engine from_model(const ModelInstance& m) {
    S3Engine e;
    const auto& tree = m.tree;
    e.I = static_cast<int>(tree.level_nodes(1).size());
    e.J = static_cast<int>(tree.children(1).size());
    e.K = static_cast<int>(m.leaf_count[tree.leaves().front()]);
    e.n = m.total_count();
    e.ybar.assign(static_cast<size_t>(e.I) * e.J, 0.0);
    e.ybar_i.assign(e.I, 0.0);
    for (int i = 0; i < e.I; ++i) {
      for (int j = 0; j < e.J; ++j) {
        const int t = 1 + e.I + i * e.J + j;
        e.ybar[i * e.J + j] = m.leaf_mean[t];
        e.ybar_i[i] += m.leaf_mean[t] / e.J;
        e.total_ssd += m.leaf_ssd[t];
      }
      e.ybar_all += e.ybar_i[i] / e.I;
    }
    return e;
  }

  int leaf_index(int i, int j) const { return 1 + I + i * J + j; }

  void sweep(int l1, int l2, double var_a, double var_b, double var_e,
             Vector& state, const CounterRng& rng, uint64_t iter,
             bool parallel) const {
    // Level sums of the current state; the root and group updates read them
    // before any coordinate changes.
    double u_bar = 0.0;
    std::vector<double> v_bar(I, 0.0);
    double v_all = 0.0;
    for (int i = 0; i < I; ++i) {
      u_bar += state(1 + i) / I;
      for (int j = 0; j < J; ++j) v_bar[i] += state(leaf_index(i, j)) / J;
      v_all += v_bar[i] / I;
    }

    double m_mean, m_var;
    if (l1 == 0) {
      m_mean = u_bar;
      m_var = var_a / I;
    } else if (l2 == 0) {
      m_mean = v_all - u_bar;
      m_var = var_b / (static_cast<double>(I) * J);
    } else {
      m_mean = ybar_all - u_bar - v_all;
      m_var = var_e / static_cast<double>(n);
    }
    state(0) = m_mean + std::sqrt(m_var) *
                            rng.normal(stream_id(StreamTag::kSweepNoise, 0),
                                       iter);
    const double m = state(0);

    const auto update_group = [&](int i) {
      double prec, inf;
      if (l2 == 0) {
        prec = 1.0 / var_a + J / var_b;
        inf = J * (v_bar[i] - l1 * m) / var_b + (1 - l1) * m / var_a;
      } else {
        const double jk = static_cast<double>(J) * K;
        prec = 1.0 / var_a + jk / var_e;
        inf = jk * (ybar_i[i] - v_bar[i] - l1 * m) / var_e +
              (1 - l1) * m / var_a;
      }
      state(1 + i) =
          inf / prec + rng.normal(stream_id(StreamTag::kSweepNoise, 1 + i),
                                  iter) /
                           std::sqrt(prec);
    };
    const auto update_leaf = [&](int idx) {
      const int i = idx / J;
      const int j = idx % J;
      const int t = leaf_index(i, j);
      const double parent = state(1 + i) + l1 * m;  // current group value
      const double prec = 1.0 / var_b + K / var_e;
      const double inf = K * (ybar[idx] - l2 * parent) / var_e +
                         (1 - l2) * parent / var_b;
      state(t) = inf / prec +
                 rng.normal(stream_id(StreamTag::kSweepNoise, t), iter) /
                     std::sqrt(prec);
    };

    const int leaves = I * J;
    if (parallel && I >= kParallelWidthCutoff) {
#pragma omp parallel for schedule(static)
      for (int i = 0; i < I; ++i) update_group(i);
    } else {
      for (int i = 0; i < I; ++i) update_group(i);
    }
    if (parallel && leaves >= kParallelWidthCutoff) {
#pragma omp parallel for schedule(static)
      for (int idx = 0; idx < leaves; ++idx) update_leaf(idx);
    } else {
      for (int idx = 0; idx < leaves; ++idx) update_leaf(idx);
    }
  }
};

bool level_constant(const ModelInstance& m, int d, const std::vector<double>& v) {
  const auto& nodes = m.tree.level_nodes(d);
  for (int t : nodes) {
    if (v[t] != v[nodes.front()]) return false;
  }
  return true;
}

std::vector<std::string> node_labels(const HierarchyTree& tree) {
  std::vector<std::string> labels(tree.size());
  for (int t = 0; t < tree.size(); ++t) labels[t] = tree.label(t);
  return labels;
}

Trace generic_run(const ModelInstance& model, const Reparametrization& reparam,
                  const std::string& tag, const RunOptions& opts) {
  if (opts.iters < 1) throw ModelError("iteration count must be >= 1");
  const Matrix q = posterior_precision(model);
  const Matrix qb = reparam.apply_to_precision(q);
  const Vector ib = reparam.apply_to_information(information_vector(model));
  const GibbsTarget target = GibbsTarget::from_precision(qb, ib, model.tree);

  const int n = model.tree.size();
  Vector state = opts.init.value_or(Vector::Zero(n));
  if (state.size() != n) throw ModelError("init state has the wrong size");

  int widest = 0;
  for (int d = 0; d < model.tree.depth(); ++d)
    widest = std::max(widest,
                      static_cast<int>(model.tree.level_nodes(d).size()));
  const bool parallel = opts.kernel == Kernel::kParallel ||
                        (opts.kernel == Kernel::kAuto && widest >= kAutoParallelWidth);

  const CounterRng rng(opts.seed);
  Trace trace;
  trace.labels = node_labels(model.tree);
  trace.seed = opts.seed;
  trace.param_tag = tag;
  trace.thin = opts.thin;
  const int64_t rows = opts.iters / opts.thin;
  trace.states.resize(rows, n);
  int64_t row = 0;
  for (int64_t s = 1; s <= opts.iters; ++s) {
    if (parallel)
      target.sweep_parallel(state, rng, static_cast<uint64_t>(s));
    else
      target.sweep_reference(state, rng, static_cast<uint64_t>(s));
    if (s % opts.thin == 0 && row < rows) trace.states.row(row++) = state;
  }
  trace.states.conservativeResize(row, n);
  return trace;
}

}  // namespace

bool s3_fast_path_applicable(const ModelInstance& model) {
  if (model.levels() != 3 || !model.has_data) return false;
  const auto& tree = model.tree;
  const int j0 = static_cast<int>(tree.children(1).size());
  for (int g : tree.level_nodes(1)) {
    if (static_cast<int>(tree.children(g).size()) != j0) return false;
  }
  if (!level_constant(model, 1, model.node_precision) ||
      !level_constant(model, 2, model.node_precision) ||
      !level_constant(model, 2, model.noise_precision))
    return false;
  for (int t : tree.leaves()) {
    if (model.leaf_count[t] != model.leaf_count[tree.leaves().front()])
      return false;
  }
  return true;
}

Trace run_chain(const ModelInstance& model, const CenteringAssignment& assign,
                const RunOptions& opts) {
  bool level_const_assign = true;
  std::vector<int> pattern;
  try {
    pattern = assign.level_pattern(model.tree);
  } catch (const ModelError&) {
    level_const_assign = false;
  }
  const bool fast = opts.engine != Engine::kGeneric &&
                    level_const_assign && s3_fast_path_applicable(model);
  if (opts.engine == Engine::kFastS3 && !fast)
    throw ModelError("fast path needs a balanced three-level model and a "
                     "per-level assignment");
  if (!fast) {
    return generic_run(model,
                       Reparametrization::from_centering(assign, model.tree),
                       level_const_assign ? assign.shorthand(model.tree)
                                          : "bespoke",
                       opts);
  }

  if (opts.iters < 1) throw ModelError("iteration count must be >= 1");
  const S3Engine engine = S3Engine::from_model(model);
  const double var_a = 1.0 / model.node_precision[1];
  const double var_b = 1.0 / model.node_precision[1 + engine.I];
  const double var_e = 1.0 / model.noise_precision[1 + engine.I];
  const int n = model.tree.size();
  Vector state = opts.init.value_or(Vector::Zero(n));
  if (state.size() != n) throw ModelError("init state has the wrong size");
  const bool parallel =
      opts.kernel == Kernel::kParallel ||
      (opts.kernel == Kernel::kAuto && engine.I * engine.J >= kAutoParallelWidth);

  const CounterRng rng(opts.seed);
  Trace trace;
  trace.labels = node_labels(model.tree);
  trace.seed = opts.seed;
  trace.param_tag = assign.shorthand(model.tree);
  trace.thin = opts.thin;
  const int64_t rows = opts.iters / opts.thin;
  trace.states.resize(rows, n);
  int64_t row = 0;
  for (int64_t s = 1; s <= opts.iters; ++s) {
    engine.sweep(pattern[0], pattern[1], var_a, var_b, var_e, state, rng,
                 static_cast<uint64_t>(s), parallel);
    if (s % opts.thin == 0 && row < rows) trace.states.row(row++) = state;
  }
  trace.states.conservativeResize(row, n);
  return trace;
}

Trace run_chain(const ModelInstance& model, const Reparametrization& reparam,
                const RunOptions& opts) {
  return generic_run(model, reparam, "custom", opts);
}

Trace run_variance_augmented(const ModelInstance& model,
                             const VarianceAugmentedOptions& opts) {
  if (!s3_fast_path_applicable(model))
    throw ModelError("the unknown-variance sampler needs a balanced "
                     "three-level model with data");
  if (opts.iters < 1) throw ModelError("iteration count must be >= 1");
  const S3Engine engine = S3Engine::from_model(model);
  const int I = engine.I, J = engine.J;
  const int n = model.tree.size();

  std::array<double, 3> vars = opts.init_variances.value_or(std::array<double, 3>{
      1.0 / model.node_precision[1], 1.0 / model.node_precision[1 + I],
      1.0 / model.noise_precision[1 + I]});

  const auto select = [&](const std::array<double, 3>& v) {
    const double ta = v[0] / I;
    const double tb = v[1] / (static_cast<double>(I) * J);
    const double te = v[2] / (static_cast<double>(I) * J * engine.K);
    return std::pair<int, int>{ta >= tb + te ? 0 : 1, tb >= te ? 0 : 1};
  };

  std::pair<int, int> assign =
      opts.adaptive ? select(vars) : opts.assignment;
  if (assign.first < 0 || assign.first > 1 || assign.second < 0 ||
      assign.second > 1)
    throw ModelError("assignment indicators must be 0 or 1");

  // State in centred coordinates, then mapped into the active assignment.
  Vector centred = opts.init_state.value_or(Vector::Zero(n));
  if (centred.size() != n) throw ModelError("init state has the wrong size");
  const auto to_native = [&](const Vector& cp, std::pair<int, int> a) {
    Vector s = cp;
    for (int i = 0; i < I; ++i) {
      const int g = 1 + i;
      if (a.first) s(g) = cp(g) - cp(0);
      for (int j = 0; j < J; ++j) {
        const int t = engine.leaf_index(i, j);
        if (a.second) s(t) = cp(t) - cp(g);
      }
    }
    return s;
  };
  const auto to_centred = [&](const Vector& s, std::pair<int, int> a) {
    Vector cp = s;
    for (int i = 0; i < I; ++i) {
      const int g = 1 + i;
      if (a.first) cp(g) = s(g) + s(0);
      for (int j = 0; j < J; ++j) {
        const int t = engine.leaf_index(i, j);
        if (a.second) cp(t) = s(t) + cp(g);
      }
    }
    return cp;
  };
  Vector state = to_native(centred, assign);

  const CounterRng rng(opts.seed);
  SubstreamRng draw_a(rng, stream_id(StreamTag::kVariance, 0));
  SubstreamRng draw_b(rng, stream_id(StreamTag::kVariance, 1));
  SubstreamRng draw_e(rng, stream_id(StreamTag::kVariance, 2));

  const bool parallel = I * J >= kAutoParallelWidth;
  Trace trace;
  trace.labels = node_labels(model.tree);
  trace.seed = opts.seed;
  trace.param_tag = opts.adaptive
                        ? "adaptive"
                        : std::string(1, "cn"[opts.assignment.first]) +
                              std::string(1, "cn"[opts.assignment.second]);
  trace.thin = opts.thin;
  const int64_t rows = opts.iters / opts.thin;
  trace.states.resize(rows, n);
  trace.variance_track.resize(rows, 3);
  int64_t row = 0;
  for (int64_t s = 1; s <= opts.iters; ++s) {
    engine.sweep(assign.first, assign.second, vars[0], vars[1], vars[2],
                 state, rng, static_cast<uint64_t>(s), parallel);

    // Conjugate precision draws, written against the centred coordinates.
    const Vector cp = to_centred(state, assign);
    double ss_a = 0.0, ss_b = 0.0, ss_e = 0.0;
    for (int i = 0; i < I; ++i) {
      const int g = 1 + i;
      const double da = cp(g) - cp(0);
      ss_a += da * da;
      for (int j = 0; j < J; ++j) {
        const int t = engine.leaf_index(i, j);
        const double db = cp(t) - cp(g);
        ss_b += db * db;
        const double de = engine.ybar[i * J + j] - cp(t);
        ss_e += engine.K * de * de;
      }
    }
    ss_e += engine.total_ssd;
    vars[0] = 1.0 / draw_a.gamma(opts.prior_a.shape + 0.5 * I,
                                 opts.prior_a.rate + 0.5 * ss_a);
    vars[1] = 1.0 / draw_b.gamma(opts.prior_b.shape + 0.5 * I * J,
                                 opts.prior_b.rate + 0.5 * ss_b);
    vars[2] = 1.0 / draw_e.gamma(
                        opts.prior_e.shape + 0.5 * static_cast<double>(engine.n),
                        opts.prior_e.rate + 0.5 * ss_e);

    if (opts.adaptive) {
      const auto next = select(vars);
      if (next != assign) {
        state = to_native(cp, next);
        assign = next;
      }
      trace.assignment_track.push_back(assign);
    }

    if (s % opts.thin == 0 && row < rows) {
      trace.states.row(row) = opts.adaptive ? cp : state;
      trace.variance_track.row(row) << vars[0], vars[1], vars[2];
      ++row;
    }
  }
  trace.states.conservativeResize(row, n);
  trace.variance_track.conservativeResize(row, 3);
  return trace;
}

Matrix level_means(const Trace& trace, const HierarchyTree& tree) {
  const int k = tree.depth();
  Matrix out = Matrix::Zero(trace.states.rows(), k);
  for (int d = 0; d < k; ++d) {
    const auto& nodes = tree.level_nodes(d);
    for (int t : nodes) out.col(d) += trace.states.col(t);
    out.col(d) /= static_cast<double>(nodes.size());
  }
  return out;
}

}  // namespace hiergibbs
