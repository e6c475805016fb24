#pragma once

#include <cstdint>
#include <json.hpp>
#include <string>
#include <vector>

namespace hiergibbs {

// One resolved run of the CLI.  Values come from built-in defaults, then an
// optional JSON config file, then command-line flags, later sources winning.
struct RunConfig {
  std::string command;  // analyze | sample | recommend | verify | bench
  std::string model_path;
  std::string param;  // "cc".."nn" style shorthand, "pncp", or "" (default)
  int64_t iters = 10000;
  uint64_t seed = 1;
  int64_t burn_in = 0;
  int thin = 1;
  std::string out_path;
  std::string csv_path;
  std::string plot_path;
  std::vector<std::string> plot_coords;
  double tol = 1e-9;
  bool strict = false;
  bool unknown_variances = false;
  bool adaptive = false;
  int64_t empirical_iters = 0;
  int sweeps = 2000;
  bool grid = false;
  int grid_steps = 25;
  double grid_log_min = -6.0;
  double grid_log_max = 6.0;
  double grid_tvar_e = 1.0;

  bool operator==(const RunConfig&) const = default;
};

// Flags override config-file values; unknown config keys are rejected.
// Throws ConfigError on malformed input (CLI maps it to exit code 2).
RunConfig parse_config(const std::vector<std::string>& args);

nlohmann::ordered_json config_to_json(const RunConfig& config);
RunConfig config_from_json(const nlohmann::json& doc, RunConfig base);

}  // namespace hiergibbs
