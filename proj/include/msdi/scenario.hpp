#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <initializer_list>
#include <limits>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "msdi/diagnostics.hpp"
#include "msdi/harness.hpp"

namespace msdi {

using Json = nlohmann::json;

struct StrongRateCheck {
  double slack = 3.0;
};
struct ErgodicValueCheckCfg {
  double slack = 3.0;
  std::vector<ErgodicVariant> variants{ErgodicVariant::Value};
};
struct ConcentrationCheckCfg {
  std::vector<double> eps_levels{1.0, 2.0, 3.0};
  std::vector<double> times;
  double slack = 3.0;
};
struct TikhonovCheckCfg {
  std::vector<double> r_values;
  double flow_threshold = 0.05;
  double ratio_factor = 3.0;
  double slack = 3.0;
};
struct GapSlopeCheckCfg {
  CompactSet K;
  double window_lo = 0.0;
  double window_hi = 0.0;
  int n_grid = 65;
  double range_lo = -1.3;
  double range_hi = -0.7;
};
struct ExactOracleCheckCfg {
  double tolerance = 0.05;
};

struct ScenarioChecks {
  std::optional<StrongRateCheck> strong_rate;
  std::optional<ErgodicValueCheckCfg> ergodic_value;
  std::optional<ConcentrationCheckCfg> concentration;
  std::optional<TikhonovCheckCfg> tikhonov;
  std::optional<GapSlopeCheckCfg> gap_slope;
  std::optional<ExactOracleCheckCfg> exact_oracle;
};

/// A fully validated experiment.
struct Scenario {
  std::string name;
  std::shared_ptr<const OperatorSpec> op;
  NoiseModel noise;
  TikhonovSchedule tik;
  Vector x0;
  double T = 20.0;
  double h = 0x1.0p-7;
  int thin = 1;
  long n_paths = 256;
  std::uint64_t master_seed = 0;
  int retain_paths = 8;
  std::vector<MetricSpec> metrics;
  ScenarioChecks checks;
  std::string output_dir = "report";
  Json source;  // the parsed document, kept for hashing

  int steps() const { return static_cast<int>(std::llround(T / h)); }

  SimulationSetup setup() const { return SimulationSetup::make(*op, noise, tik, x0, h, T); }

  /// Canonical encoding: the document with effective ensemble values and without output_dir.
  std::string canonical() const {
    Json j = source;
    j.erase("output_dir");
    j["ensemble"]["n_paths"] = n_paths;
    j["ensemble"]["master_seed"] = master_seed;
    return j.dump();
  }
  std::string digest() const { return hex64(fnv1a64(canonical())); }
};

namespace detail {

[[noreturn]] inline void invalid(const std::string& field, const std::string& rule) { throw ValidationError(field, rule); }

inline std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }

inline void require_object(const Json& j, const std::string& path) {
  if (!j.is_object()) invalid(path.empty() ? "<root>" : path, "must be an object");
}

inline void allow_keys(const Json& j, const std::string& path, std::initializer_list<const char*> keys) {
  require_object(j, path);
  std::set<std::string> ok(keys.begin(), keys.end());
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!ok.count(it.key())) invalid(join(path, it.key()), "unknown field");
  }
}

inline double number(const Json& j, const std::string& path, bool allow_inf = false) {
  if (j.is_number()) {
    const double v = j.get<double>();
    if (!std::isfinite(v)) invalid(path, "must be finite");
    return v;
  }
  if (allow_inf && j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf" || s == "+inf") return kInf;
    if (s == "-inf") return -kInf;
  }
  invalid(path, allow_inf ? "must be a number or \"inf\"/\"-inf\"" : "must be a number");
}

inline double number_or(const Json& obj, const char* key, const std::string& path, double fallback,
                        bool allow_inf = false) {
  if (!obj.contains(key)) return fallback;
  return number(obj.at(key), join(path, key), allow_inf);
}

inline long long integer(const Json& j, const std::string& path, long long lo, long long hi) {
  if (!j.is_number_integer() && !j.is_number_unsigned()) invalid(path, "must be an integer");
  if (j.is_number_unsigned()) {
    const auto u = j.get<unsigned long long>();
    if (u > static_cast<unsigned long long>(hi)) invalid(path, "must be at most " + std::to_string(hi));
    return static_cast<long long>(u);
  }
  const auto v = j.get<long long>();
  if (v < lo || v > hi) invalid(path, "must lie in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
  return v;
}

inline std::string text(const Json& j, const std::string& path) {
  if (!j.is_string()) invalid(path, "must be a string");
  return j.get<std::string>();
}

inline bool boolean(const Json& j, const std::string& path) {
  if (!j.is_boolean()) invalid(path, "must be true or false");
  return j.get<bool>();
}

inline Vector vector(const Json& j, const std::string& path, Index expect = -1) {
  if (!j.is_array()) invalid(path, "must be an array of numbers");
  Vector v(static_cast<Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Index>(i)) = number(j[i], path + "[" + std::to_string(i) + "]");
  if (expect >= 0 && v.size() != expect) invalid(path, "must have length " + std::to_string(expect));
  return v;
}

inline std::vector<double> numbers(const Json& j, const std::string& path) {
  const Vector v = vector(j, path);
  return {v.data(), v.data() + v.size()};
}

/// Row-major matrix; `cols` pins the column count (needed for matrices with zero rows).
inline Matrix matrix(const Json& j, const std::string& path, Index rows = -1, Index cols = -1) {
  if (!j.is_array()) invalid(path, "must be an array of rows");
  const auto r = static_cast<Index>(j.size());
  if (rows >= 0 && r != rows) invalid(path, "must have " + std::to_string(rows) + " rows");
  Index c = cols;
  if (r > 0) {
    if (!j[0].is_array()) invalid(path, "must be an array of rows");
    if (c < 0) c = static_cast<Index>(j[0].size());
  }
  if (c < 0) c = 0;
  Matrix m(r, c);
  for (Index i = 0; i < r; ++i) {
    const std::string rp = path + "[" + std::to_string(i) + "]";
    const Vector row = vector(j[static_cast<std::size_t>(i)], rp, c);
    m.row(i) = row.transpose();
  }
  if (m.size() > 0 && !m.allFinite()) invalid(path, "must be finite");
  return m;
}

inline Index square_dim(const Json& j, const std::string& path) {
  if (!j.is_array() || j.empty()) invalid(path, "must be a non-empty square matrix");
  return static_cast<Index>(j.size());
}

inline Plq1d parse_plq(const Json& j, const std::string& path) {
  require_object(j, path);
  try {
    if (j.contains("preset")) {
      const std::string preset = text(j.at("preset"), join(path, "preset"));
      if (preset == "abs") {
        allow_keys(j, path, {"preset", "scale", "center"});
        const double scale = number_or(j, "scale", path, 1.0);
        if (!(scale >= 0.0)) invalid(join(path, "scale"), "must be nonnegative");
        return Plq1d::abs(scale, number_or(j, "center", path, 0.0));
      }
      if (preset == "hinge") {
        allow_keys(j, path, {"preset", "radius", "slope"});
        const double r = number_or(j, "radius", path, 1.0);
        const double s = number_or(j, "slope", path, 1.0);
        if (!(r >= 0.0)) invalid(join(path, "radius"), "must be nonnegative");
        if (!(s >= 0.0)) invalid(join(path, "slope"), "must be nonnegative");
        return Plq1d::hinge(r, s);
      }
      if (preset == "quadratic") {
        allow_keys(j, path, {"preset", "a", "c"});
        const double a = number_or(j, "a", path, 1.0);
        if (!(a >= 0.0)) invalid(join(path, "a"), "must be nonnegative");
        return Plq1d::quadratic(a, number_or(j, "c", path, 0.0));
      }
      if (preset == "point") {
        allow_keys(j, path, {"preset", "at"});
        return Plq1d::point(number_or(j, "at", path, 0.0));
      }
      if (preset == "interval") {
        allow_keys(j, path, {"preset", "lo", "hi"});
        const double lo = number_or(j, "lo", path, -1.0, true);
        const double hi = number_or(j, "hi", path, 1.0, true);
        if (!(lo <= hi)) invalid(path, "requires lo <= hi");
        return Plq1d::interval(lo, hi);
      }
      invalid(join(path, "preset"), "must be one of abs, hinge, quadratic, point, interval");
    }
    allow_keys(j, path, {"lo", "hi", "knots", "pieces", "offset"});
    const double lo = number_or(j, "lo", path, -kInf, true);
    const double hi = number_or(j, "hi", path, kInf, true);
    std::vector<double> knots = j.contains("knots") ? numbers(j.at("knots"), join(path, "knots")) : std::vector<double>{};
    if (!j.contains("pieces")) invalid(join(path, "pieces"), "is required");
    const Json& pj = j.at("pieces");
    if (!pj.is_array()) invalid(join(path, "pieces"), "must be an array of [quad, lin] pairs");
    std::vector<Plq1d::Piece> pieces;
    for (std::size_t i = 0; i < pj.size(); ++i) {
      const Vector pr = vector(pj[i], join(path, "pieces") + "[" + std::to_string(i) + "]", 2);
      pieces.push_back({pr(0), pr(1)});
    }
    return Plq1d::make(lo, hi, std::move(knots), std::move(pieces), number_or(j, "offset", path, 0.0));
  } catch (const ValidationError&) {
    throw;
  } catch (const Error& e) {
    invalid(path, e.what());
  }
}

inline OperatorSpec parse_operator(const Json& j, const std::string& path) {
  require_object(j, path);
  if (!j.contains("kind")) invalid(join(path, "kind"), "is required");
  const std::string kind = text(j.at("kind"), join(path, "kind"));
  try {
    if (kind == "linear") {
      allow_keys(j, path, {"kind", "Q", "b"});
      if (!j.contains("Q")) invalid(join(path, "Q"), "is required");
      const Index d = square_dim(j.at("Q"), join(path, "Q"));
      const Matrix q = matrix(j.at("Q"), join(path, "Q"), d, d);
      const Vector b = j.contains("b") ? vector(j.at("b"), join(path, "b"), d) : Vector(Vector::Zero(d));
      return OperatorSpec::linear(q, b);
    }
    if (kind == "separable_plq") {
      allow_keys(j, path, {"kind", "coords", "error_bound"});
      if (!j.contains("coords") || !j.at("coords").is_array() || j.at("coords").empty()) {
        invalid(join(path, "coords"), "must be a non-empty array");
      }
      std::vector<Plq1d> coords;
      for (std::size_t i = 0; i < j.at("coords").size(); ++i) {
        coords.push_back(parse_plq(j.at("coords")[i], join(path, "coords") + "[" + std::to_string(i) + "]"));
      }
      std::optional<ErrorBound> eb;
      if (j.contains("error_bound")) {
        const std::string ep = join(path, "error_bound");
        const Json& e = j.at("error_bound");
        allow_keys(e, ep, {"p", "gamma", "level"});
        ErrorBound b{number_or(e, "p", ep, 1.0), number_or(e, "gamma", ep, 0.0), number_or(e, "level", ep, 0.0)};
        if (!(b.p >= 1.0)) invalid(join(ep, "p"), "requires p >= 1");
        if (!(b.gamma > 0.0)) invalid(join(ep, "gamma"), "requires gamma > 0");
        eb = b;
      }
      auto op = OperatorSpec::separable_plq(std::move(coords), eb);
      if (eb && (!op.potential() || !(eb->level > op.potential()->min_value))) {
        invalid(join(path, "error_bound.level"), "requires level > min phi");
      }
      return op;
    }
    if (kind == "affine_normal_cone") {
      allow_keys(j, path, {"kind", "C", "d", "dim"});
      const Index dim = j.contains("dim") ? integer(j.at("dim"), join(path, "dim"), 1, 64) : -1;
      if (!j.contains("C")) invalid(join(path, "C"), "is required");
      const Matrix c = matrix(j.at("C"), join(path, "C"), -1, dim);
      if (c.cols() == 0) invalid(join(path, "C"), "needs at least one row or an explicit dim");
      const Vector d = j.contains("d") ? vector(j.at("d"), join(path, "d"), c.rows()) : Vector(Vector::Zero(c.rows()));
      return OperatorSpec::affine_normal_cone(c, d);
    }
    if (kind == "restricted_quadratic" || kind == "sum") {
      const char* qk = kind == "sum" ? "Q" : "H";
      const char* bk = kind == "sum" ? "b" : "g";
      allow_keys(j, path, {"kind", qk, bk, "C", "d"});
      if (!j.contains(qk)) invalid(join(path, qk), "is required");
      const Index d = square_dim(j.at(qk), join(path, qk));
      const Matrix q = matrix(j.at(qk), join(path, qk), d, d);
      const Vector b = j.contains(bk) ? vector(j.at(bk), join(path, bk), d) : Vector(Vector::Zero(d));
      const Matrix c = j.contains("C") ? matrix(j.at("C"), join(path, "C"), -1, d) : Matrix(0, d);
      const Vector rhs = j.contains("d") ? vector(j.at("d"), join(path, "d"), c.rows()) : Vector(Vector::Zero(c.rows()));
      return kind == "sum" ? OperatorSpec::sum(q, b, c, rhs) : OperatorSpec::restricted_quadratic(q, b, c, rhs);
    }
    if (kind == "shifted") {
      allow_keys(j, path, {"kind", "inner", "shift"});
      if (!j.contains("inner")) invalid(join(path, "inner"), "is required");
      const OperatorSpec inner = parse_operator(j.at("inner"), join(path, "inner"));
      if (!j.contains("shift")) invalid(join(path, "shift"), "is required");
      return OperatorSpec::shifted(inner, vector(j.at("shift"), join(path, "shift"), inner.dim()));
    }
    if (kind == "scaled") {
      allow_keys(j, path, {"kind", "inner", "factor"});
      if (!j.contains("inner")) invalid(join(path, "inner"), "is required");
      const OperatorSpec inner = parse_operator(j.at("inner"), join(path, "inner"));
      const double f = number_or(j, "factor", path, 1.0);
      if (!(f > 0.0)) invalid(join(path, "factor"), "requires factor > 0");
      return OperatorSpec::scaled(inner, f);
    }
  } catch (const ValidationError&) {
    throw;
  } catch (const Error& e) {
    invalid(path, e.what());
  }
  invalid(join(path, "kind"),
          "must be one of linear, separable_plq, affine_normal_cone, restricted_quadratic, shifted, scaled, sum");
}

inline NoiseModel parse_noise(const Json* j, Index d) {
  NoiseModel n = NoiseModel::isotropic(d, NoiseSchedule::power_decay(0.5, 1.0));
  if (!j) return n;
  const std::string path = "noise";
  allow_keys(*j, path, {"schedule", "sigma0", "p", "base", "coupling"});
  const std::string kind = j->contains("schedule") ? text(j->at("schedule"), "noise.schedule") : "power_decay";
  if (kind == "power_decay") {
    const double s0 = number_or(*j, "sigma0", path, 0.5);
    const double p = number_or(*j, "p", path, 1.0);
    if (!(s0 >= 0.0)) invalid("noise.sigma0", "requires sigma0 >= 0");
    if (!(p >= 0.0)) invalid("noise.p", "requires p >= 0");
    n.schedule = NoiseSchedule::power_decay(s0, p);
  } else if (kind == "constant") {
    if (j->contains("p")) invalid("noise.p", "only applies to power_decay");
    const double s0 = number_or(*j, "sigma0", path, 0.5);
    if (!(s0 >= 0.0)) invalid("noise.sigma0", "requires sigma0 >= 0");
    n.schedule = NoiseSchedule::constant(s0);
  } else if (kind == "zero") {
    if (j->contains("p") || j->contains("sigma0")) invalid("noise", "zero schedule takes no sigma0 or p");
    n.schedule = NoiseSchedule::zero();
  } else {
    invalid("noise.schedule", "must be one of power_decay, constant, zero");
  }
  if (j->contains("base")) {
    const Json& b = j->at("base");
    if (b.is_string()) {
      if (b.get<std::string>() != "identity") invalid("noise.base", "must be \"identity\" or a matrix");
    } else {
      n.base = matrix(b, "noise.base", d);
      if (n.base.cols() == 0) invalid("noise.base", "needs at least one column");
    }
  }
  if (j->contains("coupling")) {
    const Json& c = j->at("coupling");
    allow_keys(c, "noise.coupling", {"direction", "kappa"});
    if (!c.contains("direction")) invalid("noise.coupling.direction", "is required");
    n.coupling = matrix(c.at("direction"), "noise.coupling.direction", d, n.base.cols());
    n.kappa = number_or(c, "kappa", "noise.coupling", 1.0);
    if (!(n.kappa >= 0.0)) invalid("noise.coupling.kappa", "requires kappa >= 0");
  }
  return n;
}

inline TikhonovSchedule parse_tikhonov(const Json* j) {
  if (!j) return TikhonovSchedule::power_eps(1.0, 0.5);
  allow_keys(*j, "tikhonov", {"kind", "eps0", "q"});
  const std::string kind = j->contains("kind") ? text(j->at("kind"), "tikhonov.kind") : "power_eps";
  if (kind == "off") {
    if (j->contains("eps0") || j->contains("q")) invalid("tikhonov", "off takes no eps0 or q");
    return TikhonovSchedule::off();
  }
  if (kind != "power_eps") invalid("tikhonov.kind", "must be off or power_eps");
  const double e0 = number_or(*j, "eps0", "tikhonov", 1.0);
  const double q = number_or(*j, "q", "tikhonov", 0.5);
  if (!(e0 > 0.0)) invalid("tikhonov.eps0", "requires eps0 > 0");
  if (!(q > 0.0 && q < 1.0)) invalid("tikhonov.q", "requires 0 < q < 1");
  return TikhonovSchedule::power_eps(e0, q);
}

inline CompactSet parse_compact(const Json& j, const std::string& path, Index d) {
  require_object(j, path);
  if (j.contains("box")) {
    allow_keys(j, path, {"box"});
    const Json& b = j.at("box");
    allow_keys(b, join(path, "box"), {"lo", "hi"});
    if (!b.contains("lo") || !b.contains("hi")) invalid(join(path, "box"), "needs lo and hi");
    const Vector lo = vector(b.at("lo"), join(path, "box.lo"), d);
    const Vector hi = vector(b.at("hi"), join(path, "box.hi"), d);
    if ((lo.array() > hi.array()).any()) invalid(join(path, "box"), "requires lo <= hi");
    return CompactSet::make_box(lo, hi);
  }
  if (j.contains("ball")) {
    allow_keys(j, path, {"ball"});
    const Json& b = j.at("ball");
    allow_keys(b, join(path, "ball"), {"center", "radius"});
    const Vector c = b.contains("center") ? vector(b.at("center"), join(path, "ball.center"), d) : Vector(Vector::Zero(d));
    const double r = number_or(b, "radius", join(path, "ball"), 1.0);
    if (!(r >= 0.0)) invalid(join(path, "ball.radius"), "requires radius >= 0");
    return CompactSet::make_ball(c, r);
  }
  invalid(path, "must be {\"box\": ...} or {\"ball\": ...}");
}

inline Vector parse_x0(const Json* j, const OperatorSpec& op) {
  const Index d = op.dim();
  auto base = [&]() {
    if (std::holds_alternative<ZeroEmpty>(op.zero_set())) invalid("x0", "zero_set_point needs a nonempty zero set");
    return zero_set_project(op, Vector::Zero(d)).point;
  };
  Vector x;
  if (!j) {
    x = base();
  } else if (j->is_array()) {
    x = vector(*j, "x0", d);
  } else if (j->is_string()) {
    const std::string s = j->get<std::string>();
    if (s == "zero_set_point") {
      x = base();
    } else if (s.rfind("offset:", 0) == 0) {
      Json off;
      try {
        off = Json::parse(s.substr(7));
      } catch (const Json::exception&) {
        invalid("x0", "offset must be followed by a JSON array, e.g. offset:[1,0]");
      }
      x = base() + vector(off, "x0.offset", d);
    } else {
      invalid("x0", "must be a vector, \"zero_set_point\" or \"offset:[...]\"");
    }
  } else {
    invalid("x0", "must be a vector, \"zero_set_point\" or \"offset:[...]\"");
  }
  if (!in_domain(op, x)) invalid("x0", "must lie in the closure of dom A");
  return x;
}

inline void require_square_integrable(const NoiseModel& n, const std::string& check) {
  if (!n.schedule.square_integrable()) {
    if (n.schedule.kind == NoiseSchedule::Kind::PowerDecay) invalid("noise.p", "requires p > 1/2");
    invalid("noise.schedule", "requires a square-integrable schedule (" + check + ")");
  }
}

inline void require_tik_off(const TikhonovSchedule& t, const std::string& check) {
  if (t.enabled()) invalid("tikhonov.kind", "must be off for " + check);
}

inline std::vector<double> times_in(const Json& j, const std::string& path, double T) {
  auto v = numbers(j, path);
  if (v.empty()) invalid(path, "must not be empty");
  for (double t : v) {
    if (!(t > 0.0 && t <= T + 1e-12)) invalid(path, "times must lie in (0, T]");
  }
  return v;
}

inline std::pair<std::size_t, std::size_t> json_line_col(const std::string& s, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i + 1 < byte && i < s.size(); ++i) {
    if (s[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

}  // namespace detail

/// Parses and validates a scenario document (JSON).
inline Scenario parse_scenario(const std::string& doc) {
  using namespace detail;
  Json root;
  try {
    root = Json::parse(doc);
  } catch (const Json::parse_error& e) {
    const auto [line, col] = json_line_col(doc, e.byte);
    std::string msg = e.what();
    const auto pos = msg.find("syntax error");
    throw ParseError(line, col, pos == std::string::npos ? msg : msg.substr(pos));
  }
  try {
    allow_keys(root, "", {"name", "operator", "noise", "tikhonov", "x0", "grid", "ensemble", "metrics", "checks",
                          "output_dir"});
    Scenario s;
    s.source = root;
    s.name = root.contains("name") ? text(root.at("name"), "name") : "scenario";
    if (!root.contains("operator")) invalid("operator", "is required");
    s.op = std::make_shared<const OperatorSpec>(parse_operator(root.at("operator"), "operator"));
    const OperatorSpec& op = *s.op;
    const Index d = op.dim();
    s.noise = parse_noise(root.contains("noise") ? &root.at("noise") : nullptr, d);
    s.tik = parse_tikhonov(root.contains("tikhonov") ? &root.at("tikhonov") : nullptr);
    s.x0 = parse_x0(root.contains("x0") ? &root.at("x0") : nullptr, op);

    if (root.contains("grid")) {
      const Json& g = root.at("grid");
      allow_keys(g, "grid", {"T", "h", "thin"});
      s.T = number_or(g, "T", "grid", 20.0);
      s.h = number_or(g, "h", "grid", 0x1.0p-7);
    }
    if (!(s.h > 0.0)) invalid("grid.h", "requires h > 0");
    if (!(s.T >= 10.0 * s.h)) invalid("grid.T", "requires T >= 10 h");
    if (s.T / s.h > 5.0e7) invalid("grid.h", "too many steps (T/h above 5e7)");
    if (std::abs(s.steps() * s.h - s.T) > 1e-9 * s.T) invalid("grid.h", "must divide T");
    s.thin = std::max(1, s.steps() / 200);
    if (root.contains("grid") && root.at("grid").contains("thin")) {
      s.thin = static_cast<int>(integer(root.at("grid").at("thin"), "grid.thin", 1, s.steps()));
    }

    if (root.contains("ensemble")) {
      const Json& e = root.at("ensemble");
      allow_keys(e, "ensemble", {"n_paths", "master_seed", "retain_paths"});
      if (e.contains("n_paths")) s.n_paths = integer(e.at("n_paths"), "ensemble.n_paths", 1, 100000000);
      if (e.contains("master_seed")) {
        const Json& m = e.at("master_seed");
        if (!m.is_number_unsigned() && !(m.is_number_integer() && m.get<long long>() >= 0)) {
          invalid("ensemble.master_seed", "must be a nonnegative integer");
        }
        s.master_seed = m.get<std::uint64_t>();
      }
      if (e.contains("retain_paths")) s.retain_paths = static_cast<int>(integer(e.at("retain_paths"), "ensemble.retain_paths", 0, 100000));
    }
    if (root.contains("output_dir")) s.output_dir = text(root.at("output_dir"), "output_dir");

    const SimulationSetup setup = s.setup();
    if (root.contains("metrics")) {
      const Json& ms = root.at("metrics");
      if (!ms.is_array()) invalid("metrics", "must be an array");
      std::set<std::string> names;
      for (std::size_t i = 0; i < ms.size(); ++i) {
        const std::string mp = "metrics[" + std::to_string(i) + "]";
        const Json& m = ms[i];
        allow_keys(m, mp, {"kind", "point", "K", "n_grid", "tail_sup", "label"});
        if (!m.contains("kind")) invalid(join(mp, "kind"), "is required");
        const auto kind = parse_metric_kind(text(m.at("kind"), join(mp, "kind")));
        if (!kind) invalid(join(mp, "kind"), "unknown metric kind");
        MetricSpec spec;
        spec.kind = *kind;
        if (m.contains("point")) spec.point = vector(m.at("point"), join(mp, "point"), d);
        if (m.contains("K")) spec.K = parse_compact(m.at("K"), join(mp, "K"), d);
        if (m.contains("n_grid")) spec.n_grid = static_cast<int>(integer(m.at("n_grid"), join(mp, "n_grid"), 2, 4097));
        if (m.contains("tail_sup")) spec.tail_sup = boolean(m.at("tail_sup"), join(mp, "tail_sup"));
        if (m.contains("label")) spec.label = text(m.at("label"), join(mp, "label"));
        if (!names.insert(spec.name()).second) invalid(mp, "duplicate metric name " + spec.name());
        try {
          MetricContext(setup, {}, {}).check_compatible(spec);
        } catch (const Error& e) {
          invalid(mp, e.what());
        }
        s.metrics.push_back(spec);
      }
    }

    if (root.contains("checks")) {
      const Json& c = root.at("checks");
      allow_keys(c, "checks", {"strong_rate", "ergodic_value", "concentration", "tikhonov", "gap_slope", "exact_oracle"});
      if (c.contains("strong_rate")) {
        const Json& j = c.at("strong_rate");
        allow_keys(j, "checks.strong_rate", {"slack"});
        StrongRateCheck cfg{number_or(j, "slack", "checks.strong_rate", 3.0)};
        if (!(cfg.slack >= 0.0)) invalid("checks.strong_rate.slack", "requires slack >= 0");
        if (!(op.strong_monotonicity_modulus() > 0.0)) invalid("checks.strong_rate", "requires a strongly monotone operator");
        if (!unique_zero(op)) invalid("checks.strong_rate", "requires a unique zero");
        require_tik_off(s.tik, "strong_rate");
        require_square_integrable(s.noise, "strong_rate");
        s.checks.strong_rate = cfg;
      }
      if (c.contains("ergodic_value")) {
        const Json& j = c.at("ergodic_value");
        allow_keys(j, "checks.ergodic_value", {"slack", "variant"});
        ErgodicValueCheckCfg cfg;
        cfg.slack = number_or(j, "slack", "checks.ergodic_value", 3.0);
        if (!(cfg.slack >= 0.0)) invalid("checks.ergodic_value.slack", "requires slack >= 0");
        const std::string v = j.contains("variant") ? text(j.at("variant"), "checks.ergodic_value.variant") : "value";
        if (v == "value") {
          cfg.variants = {ErgodicVariant::Value};
        } else if (v == "strong_convexity") {
          cfg.variants = {ErgodicVariant::StrongConvexity};
        } else if (v == "both") {
          cfg.variants = {ErgodicVariant::Value, ErgodicVariant::StrongConvexity};
        } else {
          invalid("checks.ergodic_value.variant", "must be value, strong_convexity or both");
        }
        if (!op.potential()) invalid("checks.ergodic_value", "requires an operator with a potential");
        if (v != "value" && (!(op.potential()->strong_convexity > 0.0) || !unique_zero(op))) {
          invalid("checks.ergodic_value.variant", "strong_convexity requires mu > 0");
        }
        require_tik_off(s.tik, "ergodic_value");
        require_square_integrable(s.noise, "ergodic_value");
        s.checks.ergodic_value = cfg;
      }
      if (c.contains("concentration")) {
        const Json& j = c.at("concentration");
        const std::string p = "checks.concentration";
        allow_keys(j, p, {"eps_levels", "times", "slack"});
        ConcentrationCheckCfg cfg;
        if (j.contains("eps_levels")) cfg.eps_levels = numbers(j.at("eps_levels"), join(p, "eps_levels"));
        for (double e : cfg.eps_levels) {
          if (!(e > 0.0)) invalid(join(p, "eps_levels"), "levels must be positive");
        }
        if (cfg.eps_levels.empty()) invalid(join(p, "eps_levels"), "must not be empty");
        cfg.times = j.contains("times") ? times_in(j.at("times"), join(p, "times"), s.T) : std::vector<double>{s.T};
        cfg.slack = number_or(j, "slack", p, 3.0);
        if (!(cfg.slack >= 0.0)) invalid(join(p, "slack"), "requires slack >= 0");
        if (!op.potential()) invalid(p, "requires an operator with a potential");
        require_tik_off(s.tik, "concentration");
        require_square_integrable(s.noise, "concentration");
        s.checks.concentration = cfg;
      }
      if (c.contains("tikhonov")) {
        const Json& j = c.at("tikhonov");
        const std::string p = "checks.tikhonov";
        allow_keys(j, p, {"r_values", "flow_threshold", "ratio_factor", "slack"});
        TikhonovCheckCfg cfg;
        if (j.contains("r_values")) {
          cfg.r_values = numbers(j.at("r_values"), join(p, "r_values"));
        } else {
          cfg.r_values = {s.T / 8, s.T / 4, s.T / 2};
        }
        if (cfg.r_values.empty()) invalid(join(p, "r_values"), "must not be empty");
        for (std::size_t i = 0; i < cfg.r_values.size(); ++i) {
          if (!(cfg.r_values[i] >= 0.0 && cfg.r_values[i] <= s.T)) invalid(join(p, "r_values"), "values must lie in [0, T]");
          if (i > 0 && !(cfg.r_values[i] > cfg.r_values[i - 1])) invalid(join(p, "r_values"), "must be increasing");
        }
        cfg.flow_threshold = number_or(j, "flow_threshold", p, 0.05);
        cfg.ratio_factor = number_or(j, "ratio_factor", p, 3.0);
        cfg.slack = number_or(j, "slack", p, 3.0);
        if (!(cfg.flow_threshold >= 0.0)) invalid(join(p, "flow_threshold"), "requires flow_threshold >= 0");
        if (!(cfg.ratio_factor >= 1.0)) invalid(join(p, "ratio_factor"), "requires ratio_factor >= 1");
        if (!(cfg.slack >= 0.0)) invalid(join(p, "slack"), "requires slack >= 0");
        if (!s.tik.enabled()) invalid("checks.tikhonov", "requires tikhonov.kind = power_eps");
        if (std::holds_alternative<ZeroEmpty>(op.zero_set())) invalid(p, "requires a nonempty zero set");
        require_square_integrable(s.noise, "tikhonov");
        s.checks.tikhonov = cfg;
      }
      if (c.contains("gap_slope")) {
        const Json& j = c.at("gap_slope");
        const std::string p = "checks.gap_slope";
        allow_keys(j, p, {"K", "window", "n_grid", "range"});
        if (!j.contains("K")) invalid(join(p, "K"), "is required");
        GapSlopeCheckCfg cfg;
        cfg.K = parse_compact(j.at("K"), join(p, "K"), d);
        cfg.window_lo = s.T / 4;
        cfg.window_hi = s.T;
        if (j.contains("window")) {
          const Vector w = vector(j.at("window"), join(p, "window"), 2);
          cfg.window_lo = w(0);
          cfg.window_hi = w(1);
        }
        if (!(cfg.window_lo > 0.0 && cfg.window_lo < cfg.window_hi && cfg.window_hi <= s.T + 1e-12)) {
          invalid(join(p, "window"), "requires 0 < lo < hi <= T");
        }
        if (j.contains("n_grid")) cfg.n_grid = static_cast<int>(integer(j.at("n_grid"), join(p, "n_grid"), 2, 4097));
        if (j.contains("range")) {
          const Vector r = vector(j.at("range"), join(p, "range"), 2);
          cfg.range_lo = r(0);
          cfg.range_hi = r(1);
        }
        if (!(cfg.range_lo < cfg.range_hi)) invalid(join(p, "range"), "requires lo < hi");
        require_tik_off(s.tik, "gap_slope");
        s.checks.gap_slope = cfg;
      }
      if (c.contains("exact_oracle")) {
        const Json& j = c.at("exact_oracle");
        allow_keys(j, "checks.exact_oracle", {"tolerance"});
        ExactOracleCheckCfg cfg{number_or(j, "tolerance", "checks.exact_oracle", 0.05)};
        if (!(cfg.tolerance > 0.0)) invalid("checks.exact_oracle.tolerance", "requires tolerance > 0");
        MetricSpec probe;
        probe.kind = MetricKind::OracleErrorSq;
        try {
          MetricContext(setup, {}, {}).check_compatible(probe);
        } catch (const Error& e) {
          invalid("checks.exact_oracle", e.what());
        }
        s.checks.exact_oracle = cfg;
      }
    }
    return s;
  } catch (const ValidationError&) {
    throw;
  } catch (const Json::exception& e) {
    throw ValidationError("<document>", e.what());
  } catch (const Error& e) {
    throw ValidationError("<document>", e.what());
  }
}

inline Scenario load_scenario(const std::string& file) {
  std::ifstream f(file, std::ios::binary);
  if (!f) throw Error(ErrorCode::IoFailure, "cannot read " + file);
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_scenario(ss.str());
}

}  // namespace msdi
