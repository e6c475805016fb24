#pragma once

#include <json.hpp>
#include <limits>
#include <string>
#include <vector>

#include "hiergibbs/gibbs.hpp"
#include "hiergibbs/model.hpp"

namespace hiergibbs {

// Everything the analyze command learns about a model.  Absent numeric
// entries are NaN and are skipped on emission.
struct RateReport {
  std::string model_summary;
  int levels = 0;
  int nodes = 0;
  std::vector<double> tvars;  // normalized variances when defined

  struct ParamEntry {
    std::string name;
    double analytic = std::numeric_limits<double>::quiet_NaN();
    double spectral = std::numeric_limits<double>::quiet_NaN();
    std::vector<double> subchain;
    double empirical = std::numeric_limits<double>::quiet_NaN();
    double empirical_se = std::numeric_limits<double>::quiet_NaN();
  };
  std::vector<ParamEntry> params;

  std::string recommended;      // per-level shorthand when one exists
  std::vector<int> bespoke;     // per-node assignment, empty when not computed
  std::vector<double> r_level;  // per-level centred ratios, balanced models
  Matrix pair_ratios;           // tvar_i / (tvar_i + tvar_j), balanced models
  bool bound_applicable = false;
  double bound = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> r_ab, r_eb;

  bool certified = false;
  std::string certificate_check;
  double certificate_deviation =
      std::numeric_limits<double>::quiet_NaN();
  Matrix certificate_c;  // empty when rejected

  std::vector<double> pncp_diag;
};

nlohmann::ordered_json report_to_json(const RateReport& report);
void emit_report(const RateReport& report, const std::string& format,
                 const std::string& path);  // format: "json" or "csv"

// Long-format grid rows for rate surfaces over the normalized-variance axes.
struct GridRow {
  double log_tvar_a = 0.0;
  double log_tvar_b = 0.0;
  std::string param;
  double log1m_rho = 0.0;
};
void emit_grid_csv(const std::vector<GridRow>& rows, const std::string& path);

// Trace CSV: header row of node labels, one row per recorded iteration;
// variance columns appended when the track is present.
void write_trace_csv(const Trace& trace, const std::string& path);

// One stacked panel per requested coordinate (matched by label).  fixed_range
// shares a single y-range across panels.
void emit_traceplot(const Trace& trace,
                    const std::vector<std::string>& coordinates,
                    const std::string& path, bool fixed_range = false);

// 12-significant-digit formatting shared by the CSV emitters.
std::string format_g12(double v);

}  // namespace hiergibbs
