#include "hiergibbs/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "hiergibbs/errors.hpp"

namespace hiergibbs {

std::string format_g12(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

namespace {

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write to '" + path + "'");
  return out;
}

void put_if_finite(nlohmann::ordered_json& obj, const char* key, double v) {
  if (std::isfinite(v)) obj[key] = v;
}

}  // namespace

nlohmann::ordered_json report_to_json(const RateReport& report) {
  nlohmann::ordered_json doc;
  doc["model"] = report.model_summary;
  doc["levels"] = report.levels;
  doc["nodes"] = report.nodes;
  if (!report.tvars.empty()) doc["normalized_variances"] = report.tvars;
  nlohmann::ordered_json params = nlohmann::ordered_json::array();
  for (const auto& p : report.params) {
    nlohmann::ordered_json e;
    e["param"] = p.name;
    put_if_finite(e, "rate", p.analytic);
    put_if_finite(e, "rate_spectral", p.spectral);
    if (!p.subchain.empty()) e["subchain_rates"] = p.subchain;
    put_if_finite(e, "rate_empirical", p.empirical);
    put_if_finite(e, "rate_empirical_se", p.empirical_se);
    params.push_back(std::move(e));
  }
  doc["parametrizations"] = std::move(params);
  if (!report.recommended.empty()) doc["recommended"] = report.recommended;
  if (!report.bespoke.empty()) doc["bespoke_assignment"] = report.bespoke;
  if (!report.r_level.empty()) doc["level_ratios"] = report.r_level;
  if (report.pair_ratios.size() > 0) {
    nlohmann::ordered_json m = nlohmann::ordered_json::array();
    for (int i = 0; i < report.pair_ratios.rows(); ++i) {
      nlohmann::ordered_json row = nlohmann::ordered_json::array();
      for (int j = 0; j < report.pair_ratios.cols(); ++j)
        row.push_back(report.pair_ratios(i, j));
      m.push_back(std::move(row));
    }
    doc["pair_ratios"] = std::move(m);
  }
  if (!report.r_ab.empty()) {
    nlohmann::ordered_json b;
    b["applicable"] = report.bound_applicable;
    put_if_finite(b, "bound", report.bound);
    b["r_ab"] = report.r_ab;
    b["r_eb"] = report.r_eb;
    doc["cp_upper_bound"] = std::move(b);
  }
  {
    nlohmann::ordered_json c;
    c["certified"] = report.certified;
    if (!report.certificate_check.empty())
      c["check"] = report.certificate_check;
    put_if_finite(c, "max_deviation", report.certificate_deviation);
    if (report.certificate_c.size() > 0) {
      nlohmann::ordered_json m = nlohmann::ordered_json::array();
      for (int i = 0; i < report.certificate_c.rows(); ++i) {
        nlohmann::ordered_json row = nlohmann::ordered_json::array();
        for (int j = 0; j < report.certificate_c.cols(); ++j)
          row.push_back(report.certificate_c(i, j));
        m.push_back(std::move(row));
      }
      c["c"] = std::move(m);
    }
    doc["symmetry"] = std::move(c);
  }
  if (!report.pncp_diag.empty()) doc["pncp_diagonal"] = report.pncp_diag;
  return doc;
}

void emit_report(const RateReport& report, const std::string& format,
                 const std::string& path) {
  if (format == "json") {
    auto out = open_out(path);
    out << report_to_json(report).dump(2) << "\n";
    return;
  }
  if (format != "csv")
    throw ConfigError("report format must be 'json' or 'csv'");
  auto out = open_out(path);
  out << "param,rho";
  size_t max_sub = 0;
  for (const auto& p : report.params)
    max_sub = std::max(max_sub, p.subchain.size());
  for (size_t i = 0; i < max_sub; ++i) out << ",rho_delta" << i;
  out << "\n";
  for (const auto& p : report.params) {
    out << p.name << "," << format_g12(p.analytic);
    for (size_t i = 0; i < max_sub; ++i)
      out << ","
          << (i < p.subchain.size() ? format_g12(p.subchain[i]) : "");
    out << "\n";
  }
}

void emit_grid_csv(const std::vector<GridRow>& rows, const std::string& path) {
  auto out = open_out(path);
  out << "log_tvar_a,log_tvar_b,param,log1m_rho\n";
  for (const auto& r : rows) {
    out << format_g12(r.log_tvar_a) << "," << format_g12(r.log_tvar_b) << ","
        << r.param << "," << format_g12(r.log1m_rho) << "\n";
  }
}

void write_trace_csv(const Trace& trace, const std::string& path) {
  auto out = open_out(path);
  const bool vars = trace.variance_track.size() > 0;
  for (size_t i = 0; i < trace.labels.size(); ++i) {
    if (i) out << ",";
    out << trace.labels[i];
  }
  if (vars) out << ",var_a,var_b,var_e";
  out << "\n";
  for (int s = 0; s < trace.states.rows(); ++s) {
    for (int j = 0; j < trace.states.cols(); ++j) {
      if (j) out << ",";
      out << format_g12(trace.states(s, j));
    }
    if (vars) {
      for (int j = 0; j < trace.variance_track.cols(); ++j)
        out << "," << format_g12(trace.variance_track(s, j));
    }
    out << "\n";
  }
}

void emit_traceplot(const Trace& trace,
                    const std::vector<std::string>& coordinates,
                    const std::string& path, bool fixed_range) {
  if (trace.states.rows() == 0)
    throw ConfigError("cannot plot an empty trace");
  if (coordinates.empty())
    throw ConfigError("no coordinates requested for the trace plot");
  std::vector<int> cols;
  for (const auto& name : coordinates) {
    const auto it =
        std::find(trace.labels.begin(), trace.labels.end(), name);
    if (it == trace.labels.end())
      throw ConfigError("trace has no coordinate named '" + name + "'");
    cols.push_back(static_cast<int>(it - trace.labels.begin()));
  }

  const int w = 640, panel_h = 130, pad = 34;
  const int rows = static_cast<int>(trace.states.rows());
  const int height = panel_h * static_cast<int>(cols.size());

  double lo_all = trace.states.col(cols[0]).minCoeff();
  double hi_all = lo_all;
  for (int c : cols) {
    lo_all = std::min(lo_all, trace.states.col(c).minCoeff());
    hi_all = std::max(hi_all, trace.states.col(c).maxCoeff());
  }

  auto out = open_out(path);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w
      << "\" height=\"" << height << "\">\n";
  for (size_t p = 0; p < cols.size(); ++p) {
    const int c = cols[p];
    double lo = fixed_range ? lo_all : trace.states.col(c).minCoeff();
    double hi = fixed_range ? hi_all : trace.states.col(c).maxCoeff();
    if (hi <= lo) hi = lo + 1.0;
    const double y0 = static_cast<double>(p) * panel_h;
    out << "<rect x=\"" << pad << "\" y=\"" << y0 + 8 << "\" width=\""
        << w - pad - 8 << "\" height=\"" << panel_h - 24
        << "\" fill=\"none\" stroke=\"#999\"/>\n";
    out << "<text x=\"" << pad + 4 << "\" y=\"" << y0 + 20
        << "\" font-size=\"11\" font-family=\"sans-serif\">"
        << coordinates[p] << "</text>\n";
    out << "<polyline fill=\"none\" stroke=\"#1f6eb4\" stroke-width=\"1\" "
           "points=\"";
    for (int s = 0; s < rows; ++s) {
      const double x =
          pad + (w - pad - 8.0) * (rows > 1 ? s / (rows - 1.0) : 0.5);
      const double frac = (trace.states(s, c) - lo) / (hi - lo);
      const double y = y0 + 8 + (panel_h - 24) * (1.0 - frac);
      out << format_g12(x) << "," << format_g12(y) << " ";
    }
    out << "\"/>\n";
  }
  out << "</svg>\n";
}

}  // namespace hiergibbs
