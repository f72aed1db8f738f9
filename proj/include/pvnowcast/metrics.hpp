#pragma once

// Error metrics, case evaluation and report emission (metrics JSON, residual
// CSV and an actual-vs-nowcast SVG).

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "pvnowcast/csv.hpp"
#include "pvnowcast/error.hpp"
#include "pvnowcast/model.hpp"
#include "pvnowcast/parallel.hpp"
#include "pvnowcast/scenario.hpp"

namespace pvnowcast {

namespace detail {
inline void check_pair(std::span<const double> pred, std::span<const double> actual) {
  if (pred.size() != actual.size()) throw DomainError("metric: series lengths differ");
  if (pred.empty()) throw DomainError("metric: empty series");
}
}  // namespace detail

inline double rmse(std::span<const double> pred, std::span<const double> actual) {
  detail::check_pair(pred, actual);
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) s += (pred[i] - actual[i]) * (pred[i] - actual[i]);
  return std::sqrt(s / static_cast<double>(pred.size()));
}

inline double mae(std::span<const double> pred, std::span<const double> actual) {
  detail::check_pair(pred, actual);
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) s += std::abs(pred[i] - actual[i]);
  return s / static_cast<double>(pred.size());
}

struct EvalReport {
  double rmse_kw = 0.0;
  double mae_kw = 0.0;
  double rmse_pct = 0.0;
  double mae_pct = 0.0;
  double capacity_kw = 0.0;
  std::size_t n_points = 0;
  // Residual series, row-aligned with the evaluated dataset.
  std::vector<int> scenario_id;
  std::vector<int> t;
  std::vector<double> actual_kw;
  std::vector<double> nowcast_kw;
};

/// Scores an arbitrary predictor f(features, row) -> kW over every row.
template <typename Predictor>
EvalReport evaluate_predictions(Predictor&& predict, const Dataset& data, double capacity_kw) {
  if (data.rows() == 0) throw DomainError("evaluate: empty scenario set");
  if (!(capacity_kw > 0.0)) throw DomainError("evaluate: capacity must be > 0");
  EvalReport r;
  r.capacity_kw = capacity_kw;
  r.n_points = data.rows();
  r.scenario_id = data.scenario_id;
  r.t = data.t;
  r.actual_kw = data.power;
  r.nowcast_kw.assign(data.rows(), 0.0);
  constexpr std::size_t kChunk = 8192;
  const std::size_t chunks = (data.rows() + kChunk - 1) / kChunk;
  parallel_for(chunks, [&](std::size_t c) {
    const std::size_t e = std::min(data.rows(), (c + 1) * kChunk);
    for (std::size_t i = c * kChunk; i < e; ++i)
      r.nowcast_kw[i] = predict(FeatureVector{data.temperature[i], data.irradiance[i], data.h3_feature[i]}, i);
  });
  r.rmse_kw = rmse(r.nowcast_kw, r.actual_kw);
  r.mae_kw = mae(r.nowcast_kw, r.actual_kw);
  r.rmse_pct = 100.0 * r.rmse_kw / capacity_kw;
  r.mae_pct = 100.0 * r.mae_kw / capacity_kw;
  return r;
}

inline EvalReport evaluate_case(const MlpModel& model, const Dataset& testing, double capacity_kw) {
  return evaluate_predictions([&](const FeatureVector& x, std::size_t) { return forward(model, x); }, testing,
                              capacity_kw);
}

inline EvalReport evaluate_case(const MlpModel& model, const std::vector<Scenario>& scenarios, double capacity_kw) {
  Dataset d;
  for (const auto& s : scenarios) {
    if (s.kind != ScenarioKind::testing) throw DomainError("evaluate_case expects testing scenarios");
    d.append(s);
  }
  return evaluate_case(model, d, capacity_kw);
}

inline nlohmann::ordered_json metrics_json(const EvalReport& r) {
  return {{"rmse_kw", r.rmse_kw},
          {"mae_kw", r.mae_kw},
          {"rmse_pct", r.rmse_pct},
          {"mae_pct", r.mae_pct},
          {"capacity_kw", r.capacity_kw},
          {"n_points", r.n_points},
          {"percent_base", "installed capacity"},
          {"units", "kW, unity power factor assumed"}};
}

inline void write_residuals_csv(std::ostream& out, const EvalReport& r) {
  out << "scenario_id,t,actual_kw,nowcast_kw,residual_kw\n";
  for (std::size_t i = 0; i < r.n_points; ++i)
    out << r.scenario_id[i] << ',' << r.t[i] << ',' << csv::format_exact(r.actual_kw[i]) << ','
        << csv::format_exact(r.nowcast_kw[i]) << ',' << csv::format_exact(r.nowcast_kw[i] - r.actual_kw[i])
        << '\n';
}

/// SVG with actual (solid) and nowcast (dashed) power of one scenario against time.
inline std::string render_svg(const EvalReport& r, int scenario_id) {
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < r.n_points; ++i)
    if (r.scenario_id[i] == scenario_id) rows.push_back(i);
  if (rows.empty()) throw DomainError("scenario " + std::to_string(scenario_id) + " not in report");

  constexpr double W = 960, H = 360, left = 60, right = 20, top = 30, bottom = 40;
  const double t_lo = r.t[rows.front()], t_hi = std::max(t_lo + 1.0, static_cast<double>(r.t[rows.back()]));
  double y_hi = 1e-9;
  for (std::size_t i : rows) y_hi = std::max({y_hi, r.actual_kw[i], r.nowcast_kw[i]});
  y_hi *= 1.05;
  const auto px = [&](double t) { return left + (t - t_lo) / (t_hi - t_lo) * (W - left - right); };
  const auto py = [&](double p) { return H - bottom - std::max(0.0, p) / y_hi * (H - top - bottom); };
  const auto polyline = [&](const std::vector<double>& v, const char* style) {
    std::string s = std::string("  <polyline fill=\"none\" ") + style + " points=\"";
    char buf[48];
    for (std::size_t k = 0; k < rows.size(); ++k) {
      std::snprintf(buf, sizeof(buf), "%s%.2f,%.2f", k ? " " : "", px(r.t[rows[k]]), py(v[rows[k]]));
      s += buf;
    }
    return s + "\"/>\n";
  };
  char head[512];
  std::snprintf(head, sizeof(head),
                "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%.0f\" height=\"%.0f\" viewBox=\"0 0 %.0f %.0f\">\n"
                "  <rect width=\"100%%\" height=\"100%%\" fill=\"white\"/>\n"
                "  <text x=\"%.0f\" y=\"20\" font-family=\"sans-serif\" font-size=\"14\">Scenario %d: actual vs "
                "nowcast aggregated PV power (kW), RMSE %.3f kW</text>\n"
                "  <line x1=\"%.0f\" y1=\"%.0f\" x2=\"%.0f\" y2=\"%.0f\" stroke=\"black\"/>\n"
                "  <line x1=\"%.0f\" y1=\"%.0f\" x2=\"%.0f\" y2=\"%.0f\" stroke=\"black\"/>\n",
                W, H, W, H, left, scenario_id, r.rmse_kw, left, H - bottom, W - right, H - bottom, left, top, left,
                H - bottom);
  std::string svg = head;
  svg += polyline(r.actual_kw, "stroke=\"#1f77b4\" stroke-width=\"1.2\" class=\"actual\"");
  svg += polyline(r.nowcast_kw, "stroke=\"#d62728\" stroke-width=\"1.2\" stroke-dasharray=\"4 2\" class=\"nowcast\"");
  svg += "</svg>\n";
  return svg;
}

struct ReportFiles {
  std::filesystem::path metrics;
  std::filesystem::path residuals;
  std::filesystem::path plot;
};

/// Writes metrics.json, residuals.csv and nowcast_<id>.svg into out_dir.
inline ReportFiles emit_report(const EvalReport& r, int scenario_id, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  ReportFiles f{out_dir / "metrics.json", out_dir / "residuals.csv",
                out_dir / ("nowcast_" + std::to_string(scenario_id) + ".svg")};
  const auto open = [](const std::filesystem::path& p) {
    std::ofstream o(p, std::ios::binary);
    if (!o) throw DataError("cannot write " + p.string());
    return o;
  };
  {
    auto o = open(f.metrics);
    o << metrics_json(r).dump(2) << '\n';
  }
  {
    auto o = open(f.residuals);
    write_residuals_csv(o, r);
  }
  {
    auto o = open(f.plot);
    o << render_svg(r, scenario_id);
  }
  return f;
}

}  // namespace pvnowcast
