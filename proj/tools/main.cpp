#include <cmath>
#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "hiergibbs/config.hpp"
#include "hiergibbs/errors.hpp"
#include "hiergibbs/gibbs.hpp"
#include "hiergibbs/model_io.hpp"
#include "hiergibbs/multigrid.hpp"
#include "hiergibbs/rates.hpp"
#include "hiergibbs/reparam.hpp"
#include "hiergibbs/report.hpp"
#include "hiergibbs/symmetry.hpp"

namespace hiergibbs {
namespace {

void apply_thread_cap() {
#ifdef _OPENMP
  if (const char* cap = std::getenv("HIERGIBBS_THREADS")) {
    const int n = std::atoi(cap);
    if (n > 0) omp_set_num_threads(std::min(n, omp_get_max_threads()));
  }
#endif
}

std::vector<std::string> pattern_names(int k) {
  std::vector<std::string> names;
  for (int mask = 0; mask < (1 << (k - 1)); ++mask) {
    std::string name;
    for (int d = 0; d < k - 1; ++d)
      name += (mask >> (k - 2 - d)) & 1 ? 'n' : 'c';
    names.push_back(name);
  }
  return names;
}

CenteringAssignment resolve_assignment(const LoadedModel& loaded,
                                       const std::string& param) {
  const HierarchyTree& tree = loaded.model.tree;
  if (param.empty()) {
    if (loaded.assignment) return *loaded.assignment;
    return CenteringAssignment::all_centred(tree);
  }
  if (param == "bespoke") {
    if (tree.depth() == 2) return bespoke_recommend_2(loaded.model);
    if (tree.depth() == 3) return bespoke_recommend_3(loaded.model);
    throw ConfigError("bespoke assignments cover 2- and 3-level models");
  }
  return CenteringAssignment::from_shorthand(tree, param);
}

int cmd_analyze(const RunConfig& cfg) {
  const LoadedModel loaded = load_model_spec(cfg.model_path);
  const ModelInstance& model = loaded.model;
  const int k = model.levels();
  const Matrix q = posterior_precision(model);
  if (!is_positive_definite(q))
    throw ModelError("posterior precision is not positive definite");

  RateReport report;
  report.levels = k;
  report.nodes = model.tree.size();
  report.model_summary = std::to_string(k) + "-level model, " +
                         std::to_string(model.tree.size()) + " nodes, n=" +
                         std::to_string(model.total_count());

  bool balanced = true;
  NormalizedVariances tv;
  try {
    tv = model.normalized_variances();
    report.tvars = tv.v;
  } catch (const ModelError&) {
    balanced = false;
  }
  if (balanced) {
    // Ratio inputs of the closed forms: per-level centred ratios and the
    // pairwise normalized-variance ratios.
    report.r_level.push_back(1.0);
    for (int l = 2; l <= k; ++l)
      report.r_level.push_back(tv.v[l - 2] / (tv.v[l - 2] + tv.v[l - 1]));
    report.pair_ratios = Matrix::Zero(k, k);
    for (int i = 0; i < k; ++i) {
      for (int j = 0; j < k; ++j)
        report.pair_ratios(i, j) = tv.v[i] / (tv.v[i] + tv.v[j]);
    }
  }

  // Spectral rates for every per-level pattern (exact for any model).
  if (k <= 5) {
    for (const auto& name : pattern_names(k)) {
      RateReport::ParamEntry entry;
      entry.name = name;
      const auto assign =
          CenteringAssignment::from_shorthand(model.tree, name);
      const Matrix qb =
          Reparametrization::from_centering(assign, model.tree)
              .apply_to_precision(q);
      entry.spectral = spectral_rate(qb);
      report.params.push_back(std::move(entry));
    }
  }

  if (balanced && k == 3) {
    const Rates3 rates = closed_form_rates_3(tv);
    const auto sub = subchain_rates_3(tv);
    const char* order[] = {"cc", "nn", "cn", "nc"};
    const double vals[] = {rates.cc, rates.nn, rates.cn, rates.nc};
    for (int i = 0; i < 4; ++i) {
      for (auto& entry : report.params) {
        if (entry.name == order[i]) {
          entry.analytic = vals[i];
          entry.subchain.assign(sub[i].begin(), sub[i].end());
        }
      }
    }
    report.recommended =
        recommend_parametrization_3(model.tree, tv).shorthand(model.tree);
  }
  if (balanced && k == 4) {
    const auto rates4 = closed_form_rates_4(tv);
    for (auto& entry : report.params) {
      int mask = 0;
      for (char c : entry.name) mask = (mask << 1) | (c == 'n');
      entry.analytic = rates4[mask];
    }
  }

  // Symmetry certification of the tree-structured parametrization, and the
  // residual-chain rates it implies.
  const auto cert = check_symmetry(q, model.tree, cfg.tol);
  if (std::holds_alternative<SymmetryCertificate>(cert)) {
    const auto& c = std::get<SymmetryCertificate>(cert);
    report.certified = true;
    report.certificate_check =
        c.check == SymmetryCertificate::Check::kChildSums ? "child-sums"
                                                          : "all-pairs";
    report.certificate_deviation = c.max_deviation;
    report.certificate_c = c.c;
    for (auto& entry : report.params) {
      if (entry.name == std::string(static_cast<size_t>(k - 1), 'c')) {
        entry.subchain.clear();
        for (int p = 0; p < k; ++p)
          entry.subchain.push_back(subchain_rate(c.c, p));
        if (std::isnan(entry.analytic)) entry.analytic = cp_rate_k(c.c);
      }
    }
  } else {
    const auto& r = std::get<SymmetryRejection>(cert);
    report.certified = false;
    report.certificate_deviation = r.deviation;
    report.certificate_check =
        "rejected at " + model.tree.label(r.node_a) + " vs " +
        model.tree.label(r.node_b);
  }

  if (k == 2) report.bespoke = bespoke_recommend_2(model).lambda;
  if (k == 3 && !balanced) {
    report.bespoke = bespoke_recommend_3(model).lambda;
    const CpBound3 bound = cp_upper_bound_3(model);
    report.bound_applicable = bound.applicable;
    if (bound.applicable) report.bound = bound.bound;
    report.r_ab = bound.r_ab;
    report.r_eb = bound.r_eb;
  }

  report.pncp_diag = optimal_pncp(q, model.tree).d;

  if (cfg.empirical_iters > 0 && k == 3) {
    for (auto& entry : report.params) {
      const auto assign =
          CenteringAssignment::from_shorthand(model.tree, entry.name);
      RunOptions opts;
      opts.iters = cfg.empirical_iters;
      opts.seed = cfg.seed;
      Trace trace = run_chain(model, assign, opts);
      const Matrix skel = level_means(trace, model.tree);
      const auto est = empirical_rate(skel, static_cast<int>(cfg.burn_in),
                                      {0, 1, 2}, cfg.seed + 1);
      entry.empirical = est.estimate;
      entry.empirical_se = est.stderr_est;
    }
  }

  if (cfg.grid) {
    // Rate surfaces over the two upper variance axes at fixed noise tvar;
    // points are independent, so they fan out across threads.
    const int steps = cfg.grid_steps;
    std::vector<GridRow> rows(static_cast<size_t>(steps) * steps * 4);
    const double lo = cfg.grid_log_min, hi = cfg.grid_log_max;
#pragma omp parallel for schedule(static)
    for (int ij = 0; ij < steps * steps; ++ij) {
      const int i = ij / steps, j = ij % steps;
      const double la = lo + (hi - lo) * i / std::max(1, steps - 1);
      const double lb = lo + (hi - lo) * j / std::max(1, steps - 1);
      const Rates3 r = closed_form_rates_3(
          NormalizedVariances::of3(std::exp(la), std::exp(lb),
                                   cfg.grid_tvar_e));
      const char* names[] = {"cc", "nn", "cn", "nc"};
      const double vals[] = {r.cc, r.nn, r.cn, r.nc};
      for (int p = 0; p < 4; ++p)
        rows[static_cast<size_t>(ij) * 4 + p] =
            GridRow{la, lb, names[p], std::log1p(-vals[p])};
    }
    if (cfg.csv_path.empty())
      throw ConfigError("--grid needs --csv for the output rows");
    emit_grid_csv(rows, cfg.csv_path);
  } else if (!cfg.csv_path.empty()) {
    emit_report(report, "csv", cfg.csv_path);
  }

  if (cfg.out_path.empty())
    std::cout << report_to_json(report).dump(2) << "\n";
  else
    emit_report(report, "json", cfg.out_path);
  return 0;
}

int cmd_sample(const RunConfig& cfg) {
  const LoadedModel loaded = load_model_spec(cfg.model_path);
  const ModelInstance& model = loaded.model;
  Trace trace;
  if (cfg.unknown_variances || cfg.adaptive) {
    VarianceAugmentedOptions opts;
    opts.iters = cfg.iters;
    opts.seed = cfg.seed;
    opts.thin = cfg.thin;
    opts.adaptive = cfg.adaptive;
    if (!cfg.adaptive) {
      const auto pattern =
          resolve_assignment(loaded, cfg.param).level_pattern(model.tree);
      opts.assignment = {pattern[0], pattern[1]};
    }
    trace = run_variance_augmented(model, opts);
  } else {
    RunOptions opts;
    opts.iters = cfg.iters;
    opts.seed = cfg.seed;
    opts.thin = cfg.thin;
    if (cfg.param == "pncp") {
      const Matrix q = posterior_precision(model);
      trace = run_chain(model, optimal_pncp(q, model.tree).lambda, opts);
      trace.param_tag = "pncp";
    } else {
      trace = run_chain(model, resolve_assignment(loaded, cfg.param), opts);
    }
  }
  if (cfg.burn_in > 0) {
    const int64_t drop = std::min<int64_t>(cfg.burn_in / cfg.thin,
                                           trace.states.rows());
    trace.states = trace.states.bottomRows(trace.states.rows() - drop).eval();
    if (trace.variance_track.size() > 0)
      trace.variance_track =
          trace.variance_track.bottomRows(trace.variance_track.rows() - drop)
              .eval();
  }
  if (!cfg.out_path.empty()) write_trace_csv(trace, cfg.out_path);
  if (!cfg.plot_path.empty()) {
    std::vector<std::string> coords = cfg.plot_coords;
    if (coords.empty()) coords.push_back(trace.labels.front());
    emit_traceplot(trace, coords, cfg.plot_path, /*fixed_range=*/true);
  }
  std::cout << "recorded " << trace.states.rows() << " rows under '"
            << trace.param_tag << "'\n";
  return 0;
}

int cmd_recommend(const RunConfig& cfg) {
  const LoadedModel loaded = load_model_spec(cfg.model_path);
  const ModelInstance& model = loaded.model;
  const int k = model.levels();
  if (k == 2) {
    const auto assign = bespoke_recommend_2(model);
    std::cout << "per-branch assignment (1 = non-centred):";
    for (int t : model.tree.leaves()) std::cout << " " << assign.lambda[t];
    std::cout << "\n";
    return 0;
  }
  if (k == 3) {
    try {
      const NormalizedVariances tv = model.normalized_variances();
      const auto assign = recommend_parametrization_3(model.tree, tv);
      const Rates3 rates = closed_form_rates_3(tv);
      std::cout << "recommended: " << assign.shorthand(model.tree)
                << " (rate " << format_g12(rates.by_pattern(
                       assign.level_pattern(model.tree)[0],
                       assign.level_pattern(model.tree)[1]))
                << ")\n";
    } catch (const ModelError&) {
      const auto assign = bespoke_recommend_3(model);
      std::cout << "per-branch assignment (1 = non-centred):";
      for (int t = 1; t < model.tree.size(); ++t)
        std::cout << " " << assign.lambda[t];
      std::cout << "\n";
    }
    return 0;
  }
  throw ModelError("recommendations cover 2- and 3-level models");
}

int cmd_verify(const RunConfig& cfg) {
  const LoadedModel loaded = load_model_spec(cfg.model_path);
  const ModelInstance& model = loaded.model;
  const auto assign = resolve_assignment(loaded, cfg.param);
  const Matrix q = posterior_precision(model);
  const Matrix qb = Reparametrization::from_centering(assign, model.tree)
                        .apply_to_precision(q);
  const Vector ib =
      Reparametrization::from_centering(assign, model.tree)
          .apply_to_information(information_vector(model));

  const auto cert = check_symmetry(qb, model.tree, cfg.tol);
  if (std::holds_alternative<SymmetryRejection>(cert)) {
    const auto& r = std::get<SymmetryRejection>(cert);
    std::cout << "not certified: worst pair " << model.tree.label(r.node_a)
              << " vs " << model.tree.label(r.node_b) << " (deviation "
              << format_g12(r.deviation) << ")\n";
  } else {
    const auto& c = std::get<SymmetryCertificate>(cert);
    std::cout << "certified (max deviation " << format_g12(c.max_deviation)
              << "); level-ratio matrix:\n";
    for (int i = 0; i < c.c.rows(); ++i) {
      for (int j = 0; j < c.c.cols(); ++j)
        std::cout << (j ? " " : "  ") << format_g12(c.c(i, j));
      std::cout << "\n";
    }
  }

  const AuxWalk walk = aux_walk(qb, model.tree);
  const Rescaling scaled = rescale(qb, walk);
  const auto decomp =
      residual_decomposition(walk, model.tree, &scaled.scale);
  const GibbsUpdate update = update_matrix(qb, ib);
  const auto fact = verify_factorization(update, decomp);

  std::cout << "residual-chain rates:";
  for (double r : fact.block_rate) std::cout << " " << format_g12(r);
  std::cout << "\nmax off-block entry " << format_g12(fact.max_off_block);
  if (fact.worst_row >= 0)
    std::cout << " (row " << fact.worst_row << ", col " << fact.worst_col
              << ")";
  std::cout << "\n";
  const bool counterexample =
      std::holds_alternative<SymmetryRejection>(cert) ||
      fact.max_off_block > cfg.tol;
  if (cfg.strict && counterexample) return 4;
  return 0;
}

int cmd_bench(const RunConfig& cfg) {
  const LoadedModel loaded = load_model_spec(cfg.model_path);
  const ModelInstance& model = loaded.model;
  const auto assign = resolve_assignment(loaded, cfg.param);
  const auto reparam =
      Reparametrization::from_centering(assign, model.tree);
  const Matrix qb = reparam.apply_to_precision(posterior_precision(model));
  const Vector ib = reparam.apply_to_information(information_vector(model));
  const GibbsTarget target =
      GibbsTarget::from_precision(qb, ib, model.tree);
  const CounterRng rng(cfg.seed);

  const auto time_run = [&](bool parallel) {
    Vector state = Vector::Zero(model.tree.size());
#ifdef _OPENMP
    const double t0 = omp_get_wtime();
#else
    const double t0 = static_cast<double>(clock()) / CLOCKS_PER_SEC;
#endif
    for (int s = 1; s <= cfg.sweeps; ++s) {
      if (parallel)
        target.sweep_parallel(state, rng, static_cast<uint64_t>(s));
      else
        target.sweep_reference(state, rng, static_cast<uint64_t>(s));
    }
#ifdef _OPENMP
    const double dt = omp_get_wtime() - t0;
#else
    const double dt = static_cast<double>(clock()) / CLOCKS_PER_SEC - t0;
#endif
    return std::pair<double, Vector>(dt, state);
  };

  const auto [serial_s, serial_state] = time_run(false);
  const auto [parallel_s, parallel_state] = time_run(true);
  const double diff =
      (serial_state - parallel_state).cwiseAbs().maxCoeff();
  std::cout << model.tree.size() << " nodes, " << cfg.sweeps << " sweeps\n";
  std::cout << "serial reference: " << format_g12(serial_s * 1e3 / cfg.sweeps)
            << " ms/sweep\n";
  std::cout << "openmp kernel:    "
            << format_g12(parallel_s * 1e3 / cfg.sweeps) << " ms/sweep ("
#ifdef _OPENMP
            << omp_get_max_threads() << " threads, "
#endif
            << "speedup " << format_g12(serial_s / parallel_s) << ")\n";
  std::cout << "max state difference " << format_g12(diff) << "\n";
  return diff == 0.0 ? 0 : 3;
}

int dispatch(const RunConfig& cfg) {
  if (cfg.command == "analyze") return cmd_analyze(cfg);
  if (cfg.command == "sample") return cmd_sample(cfg);
  if (cfg.command == "recommend") return cmd_recommend(cfg);
  if (cfg.command == "verify") return cmd_verify(cfg);
  if (cfg.command == "bench") return cmd_bench(cfg);
  throw ConfigError("unknown command '" + cfg.command + "'");
}

}  // namespace
}  // namespace hiergibbs

int main(int argc, char** argv) {
  using namespace hiergibbs;
  apply_thread_cap();
  std::vector<std::string> args(argv + 1, argv + argc);
  try {
    return dispatch(parse_config(args));
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const ModelError& e) {
    std::cerr << "model error: " << e.what() << "\n";
    return 3;
  }
}
