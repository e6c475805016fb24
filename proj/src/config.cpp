#include "hiergibbs/config.hpp"

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>

#include "hiergibbs/errors.hpp"

namespace hiergibbs {

namespace {

nlohmann::json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config file '" + path + "' is not valid JSON: " +
                      e.what());
  }
  return doc;
}

void validate(const RunConfig& cfg) {
  static const std::set<std::string> commands{"analyze", "sample", "recommend",
                                              "verify", "bench"};
  if (!commands.count(cfg.command))
    throw ConfigError("unknown command '" + cfg.command + "'");
  if (cfg.model_path.empty())
    throw ConfigError("a model spec is required (--model)");
  if (!std::filesystem::exists(cfg.model_path))
    throw ConfigError("model spec '" + cfg.model_path + "' does not exist");
  if (cfg.command == "sample" && cfg.iters <= cfg.burn_in)
    throw ConfigError("iters must exceed burn-in");
  if (cfg.command == "analyze" && cfg.empirical_iters > 0 &&
      cfg.empirical_iters <= cfg.burn_in)
    throw ConfigError("iters must exceed burn-in");
  if (cfg.thin < 1) throw ConfigError("thin must be >= 1");
  if (cfg.iters < 1) throw ConfigError("iters must be >= 1");
}

}  // namespace

RunConfig config_from_json(const nlohmann::json& doc, RunConfig base) {
  if (!doc.is_object()) throw ConfigError("config must be a JSON object");
  static const std::set<std::string> known{
      "command",    "model",          "param",        "iters",
      "seed",       "burn_in",        "thin",         "out",
      "csv",        "plot",           "plot_coords",  "tol",
      "strict",     "unknown_variances", "adaptive",  "empirical_iters",
      "sweeps",     "grid",           "grid_steps",   "grid_log_min",
      "grid_log_max", "grid_tvar_e"};
  for (auto it = doc.begin(); it != doc.end(); ++it) {
    if (!known.count(it.key()))
      throw ConfigError("unknown config key '" + it.key() + "'");
  }
  try {
    base.command = doc.value("command", base.command);
    base.model_path = doc.value("model", base.model_path);
    base.param = doc.value("param", base.param);
    base.iters = doc.value("iters", base.iters);
    base.seed = doc.value("seed", base.seed);
    base.burn_in = doc.value("burn_in", base.burn_in);
    base.thin = doc.value("thin", base.thin);
    base.out_path = doc.value("out", base.out_path);
    base.csv_path = doc.value("csv", base.csv_path);
    base.plot_path = doc.value("plot", base.plot_path);
    base.plot_coords = doc.value("plot_coords", base.plot_coords);
    base.tol = doc.value("tol", base.tol);
    base.strict = doc.value("strict", base.strict);
    base.unknown_variances =
        doc.value("unknown_variances", base.unknown_variances);
    base.adaptive = doc.value("adaptive", base.adaptive);
    base.empirical_iters = doc.value("empirical_iters", base.empirical_iters);
    base.sweeps = doc.value("sweeps", base.sweeps);
    base.grid = doc.value("grid", base.grid);
    base.grid_steps = doc.value("grid_steps", base.grid_steps);
    base.grid_log_min = doc.value("grid_log_min", base.grid_log_min);
    base.grid_log_max = doc.value("grid_log_max", base.grid_log_max);
    base.grid_tvar_e = doc.value("grid_tvar_e", base.grid_tvar_e);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad config value type: ") + e.what());
  }
  return base;
}

nlohmann::ordered_json config_to_json(const RunConfig& c) {
  nlohmann::ordered_json doc;
  doc["command"] = c.command;
  doc["model"] = c.model_path;
  doc["param"] = c.param;
  doc["iters"] = c.iters;
  doc["seed"] = c.seed;
  doc["burn_in"] = c.burn_in;
  doc["thin"] = c.thin;
  doc["out"] = c.out_path;
  doc["csv"] = c.csv_path;
  doc["plot"] = c.plot_path;
  doc["plot_coords"] = c.plot_coords;
  doc["tol"] = c.tol;
  doc["strict"] = c.strict;
  doc["unknown_variances"] = c.unknown_variances;
  doc["adaptive"] = c.adaptive;
  doc["empirical_iters"] = c.empirical_iters;
  doc["sweeps"] = c.sweeps;
  doc["grid"] = c.grid;
  doc["grid_steps"] = c.grid_steps;
  doc["grid_log_min"] = c.grid_log_min;
  doc["grid_log_max"] = c.grid_log_max;
  doc["grid_tvar_e"] = c.grid_tvar_e;
  return doc;
}

RunConfig parse_config(const std::vector<std::string>& args) {
  // Config file first, so flags can override its values.
  RunConfig cfg;
  for (size_t i = 0; i + 1 < args.size(); ++i) {
    if (args[i] == "--config")
      cfg = config_from_json(load_json_file(args[i + 1]), cfg);
  }

  CLI::App app{"Gibbs sampling and convergence analysis for Gaussian "
               "hierarchical models on trees"};
  app.require_subcommand(1);
  std::string config_path;

  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON config file");
    sub->add_option("--model", cfg.model_path, "model spec (JSON)");
    sub->add_option("--seed", cfg.seed, "RNG seed");
    sub->add_option("--tol", cfg.tol, "certification tolerance");
    return sub;
  };

  auto* analyze = add_common(app.add_subcommand(
      "analyze", "rates, certification, bounds and recommendations"));
  analyze->add_option("--out", cfg.out_path, "report destination (json)");
  analyze->add_option("--csv", cfg.csv_path, "rate-grid CSV destination");
  analyze->add_flag("--grid", cfg.grid, "sweep rates over variance axes");
  analyze->add_option("--grid-steps", cfg.grid_steps, "grid points per axis");
  analyze->add_option("--grid-log-min", cfg.grid_log_min, "log tvar minimum");
  analyze->add_option("--grid-log-max", cfg.grid_log_max, "log tvar maximum");
  analyze->add_option("--grid-tvar-e", cfg.grid_tvar_e, "fixed noise tvar");
  analyze->add_option("--empirical", cfg.empirical_iters,
                      "also estimate rates from chains of this length");
  analyze->add_option("--burn-in", cfg.burn_in, "burn-in for estimates");

  auto* sample = add_common(
      app.add_subcommand("sample", "run one chain and write the trace"));
  sample->add_option("--param", cfg.param,
                     "per-level letters (c/n), 'pncp', or 'bespoke'");
  sample->add_option("--iters", cfg.iters, "sweeps to run");
  sample->add_option("--burn-in", cfg.burn_in, "rows to drop from the trace");
  sample->add_option("--thin", cfg.thin, "record every thin-th sweep");
  sample->add_option("--out", cfg.out_path, "trace CSV destination");
  sample->add_option("--plot", cfg.plot_path, "trace plot SVG destination");
  sample->add_option("--coords", cfg.plot_coords,
                     "coordinates to plot (node labels)");
  sample->add_flag("--unknown-variances", cfg.unknown_variances,
                   "sample the level variances as well");
  sample->add_flag("--adaptive", cfg.adaptive,
                   "re-select the parametrization after each variance draw");

  auto* recommend = add_common(
      app.add_subcommand("recommend", "print the suggested parametrization"));
  (void)recommend;

  auto* verify = add_common(app.add_subcommand(
      "verify", "check the residual-chain factorization of the sweep"));
  verify->add_option("--param", cfg.param, "per-level letters (c/n)");
  verify->add_flag("--strict", cfg.strict,
                   "exit 4 when a counterexample is found");

  auto* bench = add_common(app.add_subcommand(
      "bench", "time the serial reference sweep against the OpenMP kernel"));
  bench->add_option("--sweeps", cfg.sweeps, "sweeps per timing run");
  bench->add_option("--param", cfg.param, "per-level letters (c/n)");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    std::cout << app.help();
    std::exit(0);
  } catch (const CLI::ParseError& e) {
    throw ConfigError(e.what());
  }
  cfg.command = app.get_subcommands().front()->get_name();
  validate(cfg);
  return cfg;
}

}  // namespace hiergibbs
