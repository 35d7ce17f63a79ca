#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "msdi/harness.hpp"
#include "msdi/scenario.hpp"

namespace msdi {

/// Everything a finished run produced.
struct RunOutcome {
  Scenario scenario;
  EnsembleStats stats;
  std::vector<int> eval_indices;
  std::vector<CheckRow> rows;
  std::optional<ConcentrationReport> concentration;
  bool violated = false;
};

namespace detail {

inline int time_index(double t, double h) { return static_cast<int>(std::llround(t / h)); }

/// Position of time t on the evaluation grid (within h/2).
inline std::size_t series_at(const std::vector<double>& grid, double t, double h) {
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (std::abs(grid[i] - t) <= 0.5 * h) return i;
  }
  throw Error(ErrorCode::GridMismatch, "time " + fmt17(t) + " is not on the evaluation grid");
}

inline MetricSeries subseries(const MetricSeries& s, const std::vector<double>& times, double h) {
  MetricSeries out;
  out.name = s.name;
  out.n = s.n;
  for (double t : times) {
    const std::size_t i = series_at(s.t, t, h);
    out.t.push_back(s.t[i]);
    out.mean.push_back(s.mean[i]);
    out.var.push_back(s.var[i]);
  }
  return out;
}

inline MetricSpec labeled(MetricKind k, const std::string& label) {
  MetricSpec m;
  m.kind = k;
  m.label = label;
  return m;
}

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

}  // namespace detail

/// Runs the ensemble and every configured check.
inline RunOutcome run_scenario(const Scenario& sc, int threads = 0) {
  using detail::labeled;
  RunOutcome out;
  out.scenario = sc;
  const OperatorSpec& op = *sc.op;
  const ScenarioChecks& ck = sc.checks;
  const double h = sc.h;
  const int steps = sc.steps();

  std::vector<int> extra;
  if (ck.concentration) {
    for (double t : ck.concentration->times) extra.push_back(detail::time_index(t, h));
  }
  if (ck.tikhonov) {
    for (double r : ck.tikhonov->r_values) extra.push_back(detail::time_index(r, h));
  }
  if (ck.gap_slope) {
    const double a = std::log(ck.gap_slope->window_lo), b = std::log(ck.gap_slope->window_hi);
    for (int i = 0; i <= 15; ++i) extra.push_back(detail::time_index(std::exp(a + (b - a) * i / 15.0), h));
  }
  out.eval_indices = evaluation_indices(steps, sc.thin, extra);

  std::vector<MetricSpec> metrics = sc.metrics;
  auto add = [&](MetricSpec m) {
    for (const auto& e : metrics) {
      if (e.name() == m.name()) return;
    }
    metrics.push_back(std::move(m));
  };
  const auto xstar = unique_zero(op);
  const bool has_zero = !std::holds_alternative<ZeroEmpty>(op.zero_set());
  const Vector s0 = has_zero ? zero_set_project(op, Vector::Zero(op.dim())).point : Vector();
  const double d0_sq = has_zero ? std::pow(zero_set_project(op, sc.x0).distance, 2) : 0.0;

  if (ck.strong_rate) add(labeled(MetricKind::DistSqToPoint, "strong_rate_dist_sq"));
  if (ck.ergodic_value) {
    for (auto v : ck.ergodic_value->variants) {
      add(v == ErgodicVariant::Value ? labeled(MetricKind::ErgodicValueGap, "ergodic_value_gap")
                                     : labeled(MetricKind::ErgodicDistSqToPoint, "ergodic_dist_sq"));
    }
  }
  if (ck.concentration) {
    add(labeled(MetricKind::ErgodicValueGap, "concentration_gap"));
    add(labeled(MetricKind::AuxiliaryDeltaIntegral, "concentration_delta"));
  }
  if (ck.tikhonov) {
    MetricSpec flow = labeled(MetricKind::FlowDiscrepancy, "tikhonov_flow_tail");
    flow.tail_sup = true;
    MetricSpec curve = labeled(MetricKind::TikhonovDiscrepancy, "tikhonov_curve_tail");
    curve.tail_sup = true;
    MetricSpec fin = labeled(MetricKind::DistSqToPoint, "tikhonov_dist_sq_min_norm");
    fin.point = s0;
    add(flow);
    add(curve);
    add(fin);
  }
  if (ck.gap_slope) {
    MetricSpec g = labeled(MetricKind::ErgodicGapFunction, "gap_slope_gap");
    g.K = ck.gap_slope->K;
    g.n_grid = ck.gap_slope->n_grid;
    add(g);
  }
  if (ck.exact_oracle) add(labeled(MetricKind::OracleErrorSq, "oracle_error_sq"));

  EnsembleRequest req;
  req.setup = sc.setup();
  req.metrics = metrics;
  req.eval_indices = out.eval_indices;
  req.n_paths = sc.n_paths;
  req.master_seed = sc.master_seed;
  req.retain_paths = sc.retain_paths;
  req.threads = threads;
  out.stats = run_ensemble(req);
  const EnsembleStats& st = out.stats;

  auto take = [&](const CheckResult& r) {
    out.violated = out.violated || r.violated;
    for (const auto& row : r.rows) out.rows.push_back(row);
  };

  if (ck.strong_rate) {
    const double init = (sc.x0 - *xstar).squaredNorm();
    take(strong_rate_check(st.find("strong_rate_dist_sq"), op, init, sc.noise, sc.h, ck.strong_rate->slack));
  }
  if (ck.ergodic_value) {
    for (auto v : ck.ergodic_value->variants) {
      const bool value = v == ErgodicVariant::Value;
      const double init = value ? d0_sq : (sc.x0 - *xstar).squaredNorm();
      take(ergodic_value_check(st.find(value ? "ergodic_value_gap" : "ergodic_dist_sq"), op, init, sc.noise, v,
                               ck.ergodic_value->slack));
    }
  }
  if (ck.concentration) {
    const auto& cfg = *ck.concentration;
    const auto& gap = st.samples[st.index_of("concentration_gap")];
    const MetricSeries delta = detail::subseries(st.find("concentration_delta"), cfg.times, h);
    std::vector<std::size_t> cols;
    for (double t : cfg.times) cols.push_back(detail::series_at(st.t, t, h));
    std::vector<std::vector<double>> g(gap.size());
    for (std::size_t i = 0; i < gap.size(); ++i) {
      for (std::size_t c : cols) g[i].push_back(gap[i][c]);
    }
    ConcentrationReport rep = concentration_check(g, delta.t, delta.mean, d0_sq, sc.noise, cfg.eps_levels, cfg.slack);
    for (const auto& r : rep.rows) {
      out.rows.push_back({"concentration", "t=" + detail::num(r.t) + " eps=" + detail::num(r.eps), r.empirical_tail,
                          r.bound + cfg.slack * r.se, !r.violated});
    }
    out.violated = out.violated || rep.violated;
    out.concentration = std::move(rep);
  }
  if (ck.tikhonov) {
    const auto& cfg = *ck.tikhonov;
    const MetricSeries flow = detail::subseries(st.find("tikhonov_flow_tail"), cfg.r_values, h);
    const MetricSeries curve = detail::subseries(st.find("tikhonov_curve_tail"), cfg.r_values, h);
    const auto& fin = st.find("tikhonov_dist_sq_min_norm");
    TikhonovReport rep = tikhonov_checks(flow, curve, op, sc.noise, sc.tik, fin.mean.back(), sc.T, cfg.flow_threshold,
                                         cfg.ratio_factor, cfg.slack);
    for (const auto& r : rep.rows) out.rows.push_back(r);
    out.violated = out.violated || rep.violated;
  }
  if (ck.gap_slope) {
    const auto& cfg = *ck.gap_slope;
    const auto& s = st.find("gap_slope_gap");
    const RateFit fit = fit_rate(s.t, s.mean, RateModel::PowerLaw, cfg.window_lo - 0.5 * h, cfg.window_hi + 0.5 * h);
    const bool ok = fit.exponent_or_rate >= cfg.range_lo && fit.exponent_or_rate <= cfg.range_hi;
    out.rows.push_back({"gap_slope",
                        "fitted exponent on [" + detail::num(cfg.window_lo) + "," + detail::num(cfg.window_hi) +
                            "], accepted [" + detail::num(cfg.range_lo) + "," + detail::num(cfg.range_hi) +
                            "], constant " + detail::num(std::exp(fit.intercept)),
                        fit.exponent_or_rate, cfg.range_hi, ok});
    out.violated = out.violated || !ok;
  }
  if (ck.exact_oracle) {
    const double rms = std::sqrt(st.find("oracle_error_sq").mean.back());
    const bool ok = rms <= ck.exact_oracle->tolerance;
    out.rows.push_back({"oracle_rms", "RMS |X_T - exact_T| over paths", rms, ck.exact_oracle->tolerance, ok});
    out.violated = out.violated || !ok;
  }
  return out;
}

inline std::string checks_csv(const std::vector<CheckRow>& rows) {
  std::string s = "check,detail,observed,bound,verdict\n";
  for (const auto& r : rows) {
    s += r.check + ",\"" + r.detail + "\"," + fmt17(r.observed) + "," + fmt17(r.bound) + "," +
         (r.pass ? "pass" : "FAIL") + "\n";
  }
  return s;
}

inline std::string manifest_text(const RunOutcome& o) {
  const Scenario& s = o.scenario;
  std::string m;
  m += "version=" + std::string(kVersion) + "\n";
  m += "scenario=" + s.name + "\n";
  m += "digest=" + s.digest() + "\n";
  m += "master_seed=" + std::to_string(s.master_seed) + "\n";
  m += "n_paths=" + std::to_string(s.n_paths) + "\n";
  m += "T=" + fmt17(s.T) + "\n";
  m += "h=" + fmt17(s.h) + "\n";
  m += "violated=" + std::string(o.violated ? "true" : "false") + "\n";
  return m;
}

/// Writes ensemble.csv, concentration.csv, checks.csv, paths/ and manifest under `dir`.
inline void write_report(const RunOutcome& o, const std::filesystem::path& dir) {
  export_ensemble_csv(o.stats.series, dir / "ensemble.csv");
  export_concentration_csv(o.concentration.value_or(ConcentrationReport{}), dir / "concentration.csv");
  detail::write_text(dir / "checks.csv", checks_csv(o.rows));
  for (std::size_t i = 0; i < o.stats.retained.size(); ++i) {
    export_path_csv(o.stats.retained[i], dir / "paths" / ("path_" + std::to_string(i) + ".csv"), o.eval_indices);
  }
  detail::write_text(dir / "manifest", manifest_text(o));
}

inline std::string summary_table(const std::vector<CheckRow>& rows) {
  std::string s;
  char buf[512];
  std::snprintf(buf, sizeof buf, "%-20s %-14s %-14s %-7s %s\n", "check", "observed", "bound", "verdict", "detail");
  s += buf;
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%-20s %-14.6g %-14.6g %-7s %s\n", r.check.c_str(), r.observed, r.bound,
                  r.pass ? "pass" : "FAIL", r.detail.c_str());
    s += buf;
  }
  if (rows.empty()) s += "(no checks configured)\n";
  return s;
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  bool quoted = false;
  for (char c : line) {
    if (c == '"') {
      quoted = !quoted;
    } else if (c == ',' && !quoted) {
      cells.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  cells.push_back(cur);
  return cells;
}

inline std::map<std::string, std::string> read_manifest(const std::filesystem::path& dir) {
  std::ifstream f(dir / "manifest");
  if (!f) throw Error(ErrorCode::MissingManifest, "no manifest in " + dir.string());
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(f, line)) {
    const auto eq = line.find('=');
    if (eq != std::string::npos) kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  if (!kv.count("digest")) throw Error(ErrorCode::MissingManifest, "manifest lacks a digest");
  return kv;
}

}  // namespace detail

inline std::vector<CheckRow> read_checks_csv(const std::filesystem::path& file) {
  std::ifstream f(file);
  if (!f) throw Error(ErrorCode::IoFailure, "cannot open " + file.string());
  std::string line;
  std::getline(f, line);
  std::vector<CheckRow> rows;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    const auto c = detail::split_csv_line(line);
    if (c.size() != 5) throw Error(ErrorCode::IoFailure, "malformed row in " + file.string());
    rows.push_back({c[0], c[1], std::strtod(c[2].c_str(), nullptr), std::strtod(c[3].c_str(), nullptr), c[4] == "pass"});
  }
  return rows;
}

/// Writes plot/<metric>.csv with columns t,value (the ensemble mean) from ensemble.csv.
inline std::vector<std::filesystem::path> write_plot_data(const std::filesystem::path& dir) {
  std::ifstream f(dir / "ensemble.csv");
  if (!f) throw Error(ErrorCode::IoFailure, "cannot open " + (dir / "ensemble.csv").string());
  std::string line;
  std::getline(f, line);
  std::vector<std::string> order;
  std::map<std::string, std::string> body;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    const auto c = detail::split_csv_line(line);
    if (c.size() < 3) throw Error(ErrorCode::IoFailure, "malformed row in ensemble.csv");
    if (!body.count(c[1])) order.push_back(c[1]);
    body[c[1]] += c[0] + "," + c[2] + "\n";
  }
  std::vector<std::filesystem::path> written;
  for (const auto& name : order) {
    const auto target = dir / "plot" / (name + ".csv");
    detail::write_text(target, "t,value\n" + body[name]);
    written.push_back(target);
  }
  return written;
}

}  // namespace msdi
