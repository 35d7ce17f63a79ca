#pragma once

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "msdi/gap.hpp"
#include "msdi/integrator.hpp"

namespace msdi {

/// Running trapezoidal average Xbar_k = (1/t_k) int_0^{t_k} X ds, with Xbar_0 = X_0.
inline Matrix ergodic_average(const Matrix& X, const std::vector<double>& t) {
  Matrix avg(X.rows(), X.cols());
  if (X.rows() == 0) return avg;
  avg.row(0) = X.row(0);
  Eigen::RowVectorXd integral = Eigen::RowVectorXd::Zero(X.cols());
  for (Index k = 1; k < X.rows(); ++k) {
    const double dt = t[static_cast<std::size_t>(k)] - t[static_cast<std::size_t>(k) - 1];
    integral += 0.5 * dt * (X.row(k - 1) + X.row(k));
    avg.row(k) = integral / (t[static_cast<std::size_t>(k)] - t[0]);
  }
  return avg;
}

inline Matrix ergodic_average(const Path& p) { return ergodic_average(p.X, p.t); }

enum class MetricKind {
  DistSqToPoint,
  DistSqToZeroSet,
  ValueGap,
  ErgodicValueGap,
  ErgodicGapFunction,
  OperatorNormSq,
  TikhonovDiscrepancy,
  FlowDiscrepancy,
  NormOfAverage,
  ErgodicDistSqToPoint,
  AuxiliaryDeltaIntegral,
  OracleErrorSq,
};

inline std::string metric_kind_name(MetricKind k) {
  switch (k) {
    case MetricKind::DistSqToPoint: return "dist_sq_to_point";
    case MetricKind::DistSqToZeroSet: return "dist_sq_to_zero_set";
    case MetricKind::ValueGap: return "value_gap";
    case MetricKind::ErgodicValueGap: return "ergodic_value_gap";
    case MetricKind::ErgodicGapFunction: return "ergodic_gap_function";
    case MetricKind::OperatorNormSq: return "operator_norm_sq";
    case MetricKind::TikhonovDiscrepancy: return "tikhonov_discrepancy";
    case MetricKind::FlowDiscrepancy: return "flow_discrepancy";
    case MetricKind::NormOfAverage: return "norm_of_average";
    case MetricKind::ErgodicDistSqToPoint: return "ergodic_dist_sq_to_point";
    case MetricKind::AuxiliaryDeltaIntegral: return "auxiliary_delta_integral";
    case MetricKind::OracleErrorSq: return "oracle_error_sq";
  }
  return "unknown";
}

inline std::optional<MetricKind> parse_metric_kind(const std::string& s) {
  for (int i = 0; i <= static_cast<int>(MetricKind::OracleErrorSq); ++i) {
    const auto k = static_cast<MetricKind>(i);
    if (metric_kind_name(k) == s) return k;
  }
  return std::nullopt;
}

struct MetricSpec {
  MetricKind kind = MetricKind::DistSqToPoint;
  std::optional<Vector> point;      // x* for the point metrics (defaults to the unique zero)
  std::optional<CompactSet> K;      // ErgodicGapFunction
  int n_grid = 65;
  bool tail_sup = false;            // report sup over later evaluation times
  std::string label;                // overrides the derived name when set

  std::string name() const {
    if (!label.empty()) return label;
    return metric_kind_name(kind) + (tail_sup ? "_tail_sup" : "");
  }
};

/// Per-time ensemble statistics of one metric.
struct MetricSeries {
  std::string name;
  std::vector<double> t;
  std::vector<double> mean;
  std::vector<double> var;
  long n = 0;

  double se(std::size_t i) const { return n > 0 ? std::sqrt(var[i] / static_cast<double>(n)) : 0.0; }
  bool degenerate() const { return n < 2; }
};

/// Scenario-wide data that metric evaluation needs, computed once.
class MetricContext {
 public:
  MetricContext(const SimulationSetup& setup, const std::vector<MetricSpec>& specs, const std::vector<int>& eval_idx)
      : setup_(setup), eval_idx_(eval_idx) {
    const OperatorSpec& op = *setup.op;
    for (const auto& s : specs) check_compatible(s);
    for (const auto& s : specs) {
      if (s.kind == MetricKind::FlowDiscrepancy && !flow_) {
        flow_ = simulate_deterministic_flow(op, setup.tik, setup.x0, setup.h, setup.horizon()).X;
      }
      if (s.kind == MetricKind::TikhonovDiscrepancy && tik_points_.empty()) {
        for (int k : eval_idx_) tik_points_[k] = tikhonov_point(op, setup.tik.eps(k * setup.h));
      }
      if (s.kind == MetricKind::OracleErrorSq && !oracle_) oracle_ = make_oracle();
    }
  }

  const SimulationSetup& setup() const { return setup_; }
  const std::vector<int>& eval_indices() const { return eval_idx_; }

  Vector target_point(const MetricSpec& s) const {
    if (s.point) return *s.point;
    if (auto z = unique_zero(*setup_.op)) return *z;
    return zero_set_project(*setup_.op, Vector::Zero(setup_.op->dim())).point;
  }

  void check_compatible(const MetricSpec& s) const {
    const OperatorSpec& op = *setup_.op;
    auto fail = [&](const std::string& why) { throw Error(ErrorCode::IncompatibleMetric, s.name() + ": " + why); };
    switch (s.kind) {
      case MetricKind::ValueGap:
      case MetricKind::ErgodicValueGap:
        if (!op.potential()) fail("requires a potential");
        break;
      case MetricKind::OperatorNormSq:
        if (!op.lipschitz_constant()) fail("requires a single-valued Lipschitz operator");
        break;
      case MetricKind::TikhonovDiscrepancy:
        if (!setup_.tik.enabled()) fail("requires a Tikhonov schedule");
        break;
      case MetricKind::ErgodicGapFunction:
        if (!s.K) fail("requires a compact set K");
        if (s.K->dim() != op.dim()) fail("K has the wrong dimension");
        break;
      case MetricKind::DistSqToPoint:
      case MetricKind::ErgodicDistSqToPoint:
        if (s.point && s.point->size() != op.dim()) fail("point has the wrong dimension");
        if (!s.point && std::holds_alternative<ZeroEmpty>(op.zero_set())) fail("no zero to measure against");
        break;
      case MetricKind::DistSqToZeroSet:
        if (std::holds_alternative<ZeroEmpty>(op.zero_set())) fail("zero set is empty");
        break;
      case MetricKind::OracleErrorSq:
        if (setup_.tik.enabled() || setup_.noise.coupling) fail("requires tikhonov off and state-independent noise");
        try {
          make_oracle();
        } catch (const Error& e) {
          fail(e.what());
        }
        break;
      default: break;
    }
  }

  /// Metric values of one path at the evaluation indices.
  std::vector<double> evaluate(const MetricSpec& s, const Path& p, const Matrix* xbar = nullptr) const {
    const OperatorSpec& op = *setup_.op;
    Matrix local_avg;
    auto avg = [&]() -> const Matrix& {
      if (xbar) return *xbar;
      if (local_avg.rows() == 0) local_avg = ergodic_average(p);
      return local_avg;
    };
    std::vector<double> out;
    out.reserve(eval_idx_.size());
    const Vector target = needs_point(s.kind) ? target_point(s) : Vector();
    const double min_phi = op.potential() ? op.potential()->min_value : 0.0;

    std::vector<double> delta;
    if (s.kind == MetricKind::AuxiliaryDeltaIntegral) {
      delta.assign(static_cast<std::size_t>(p.X.rows()), 0.0);
      for (Index k = 0; k + 1 < p.X.rows(); ++k) {
        const double si = setup_.noise.sigma_inf(p.t[static_cast<std::size_t>(k)]);
        delta[static_cast<std::size_t>(k) + 1] =
            delta[static_cast<std::size_t>(k)] + si * si * (p.W.row(k) - p.X.row(k)).squaredNorm() * p.h();
      }
    }
    Matrix exact;
    if (s.kind == MetricKind::OracleErrorSq) exact = exact_solution(p.dB);
    for (int k : eval_idx_) {
      const Vector x = p.X.row(k).transpose();
      double v = 0.0;
      switch (s.kind) {
        case MetricKind::DistSqToPoint: v = (x - target).squaredNorm(); break;
        case MetricKind::ErgodicDistSqToPoint: v = (avg().row(k).transpose() - target).squaredNorm(); break;
        case MetricKind::DistSqToZeroSet: v = std::pow(zero_set_project(op, x).distance, 2); break;
        case MetricKind::ValueGap: v = potential_value(op, x) - min_phi; break;
        case MetricKind::ErgodicValueGap: v = potential_value(op, avg().row(k).transpose()) - min_phi; break;
        case MetricKind::ErgodicGapFunction:
          v = gap_function(op, avg().row(k).transpose(), *s.K, s.n_grid).value;
          break;
        case MetricKind::OperatorNormSq: v = minimal_norm_element(op, x).squaredNorm(); break;
        case MetricKind::TikhonovDiscrepancy: v = (x - tik_points_.at(k)).squaredNorm(); break;
        case MetricKind::FlowDiscrepancy: v = (x - flow_->row(k).transpose()).squaredNorm(); break;
        case MetricKind::NormOfAverage: v = avg().row(k).squaredNorm(); break;
        case MetricKind::AuxiliaryDeltaIntegral: v = delta[static_cast<std::size_t>(k)]; break;
        case MetricKind::OracleErrorSq: v = (x - exact.row(k).transpose()).squaredNorm(); break;
      }
      out.push_back(std::max(0.0, v));
    }
    if (s.tail_sup) {
      for (std::size_t i = out.size(); i-- > 1;) out[i - 1] = std::max(out[i - 1], out[i]);
    }
    return out;
  }

  /// Closed-form solution of the linear reduced dynamics dz = -(Qr z + qr) dt + B sigma(t) dB,
  /// discretized with the path's own increments:
  ///   y_{k+1} = e^{-Qr h} (y_k + B sigma(t_k) dB_k),  y = z - z*,  lifted back to R^d.
  Matrix exact_solution(const Matrix& dB) const {
    if (!oracle_) throw Error(ErrorCode::IncompatibleMetric, "oracle not prepared");
    const SubspaceInfo& info = setup_.info;
    const int n = static_cast<int>(dB.rows());
    Matrix out(n + 1, setup_.op->dim());
    Vector y = info.to_reduced(setup_.x0) - oracle_->z_star;
    out.row(0) = setup_.x0.transpose();
    for (int k = 0; k < n; ++k) {
      const Vector noise = setup_.noise.sigma(k * setup_.h, Vector::Zero(setup_.op->dim())) * dB.row(k).transpose();
      y = oracle_->propagator * (y + info.basis * noise);
      out.row(k + 1) = info.lift(y + oracle_->z_star).transpose();
    }
    return out;
  }

  static bool needs_point(MetricKind k) {
    return k == MetricKind::DistSqToPoint || k == MetricKind::ErgodicDistSqToPoint;
  }
  static bool needs_average(MetricKind k) {
    return k == MetricKind::ErgodicValueGap || k == MetricKind::ErgodicGapFunction ||
           k == MetricKind::NormOfAverage || k == MetricKind::ErgodicDistSqToPoint;
  }

 private:
  SimulationSetup setup_;
  std::vector<int> eval_idx_;
  std::optional<Matrix> flow_;
  std::map<int, Vector> tik_points_;

  struct Oracle {
    Matrix propagator;
    Vector z_star;
  };
  std::optional<Oracle> oracle_;

  Oracle make_oracle() const {
    const OperatorSpec reduced = reduce_operator(*setup_.op, setup_.info);
    const auto lin = as_linear(reduced);
    if (!lin) throw Error(ErrorCode::IncompatibleMetric, "oracle needs a linear reduced operator");
    Oracle o;
    const Index k = lin->Q.rows();
    o.z_star = Vector::Zero(k);
    if (lin->b.cwiseAbs().maxCoeff() > 0.0) {
      Eigen::FullPivLU<Matrix> lu(lin->Q);
      if (!lu.isInvertible()) throw Error(ErrorCode::IncompatibleMetric, "oracle needs an invertible reduced operator");
      o.z_star = -lu.solve(lin->b);
    }
    o.propagator = (-setup_.h * lin->Q).exp();
    return o;
  }
};

enum class RateModel { PowerLaw, Exponential };

struct RateFit {
  double exponent_or_rate = 0.0;  // PowerLaw: slope of log y on log t; Exponential: decay rate
  double intercept = 0.0;
  double r_squared = 0.0;
  int points = 0;
  bool clipped = false;  // values <= 1e-14 were dropped
};

/// Least squares on (log t, log y) or (t, log y) over t in [t_lo, t_hi].
inline RateFit fit_rate(const std::vector<double>& t, const std::vector<double>& y, RateModel model, double t_lo,
                        double t_hi) {
  if (t.size() != y.size()) throw Error(ErrorCode::InvalidArgument, "fit_rate: t and y differ in length");
  std::vector<double> xs, ys;
  RateFit fit;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (t[i] < t_lo || t[i] > t_hi) continue;
    if (model == RateModel::PowerLaw && t[i] <= 0.0) continue;
    if (!(y[i] > 1e-14)) {
      fit.clipped = true;
      continue;
    }
    xs.push_back(model == RateModel::PowerLaw ? std::log(t[i]) : t[i]);
    ys.push_back(std::log(y[i]));
  }
  if (xs.size() < 5) throw Error(ErrorCode::DegenerateWindow, "fewer than 5 usable points in the fit window");
  const double n = static_cast<double>(xs.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  if (sxx <= 0.0) throw Error(ErrorCode::DegenerateWindow, "fit window has a single abscissa");
  const double slope = sxy / sxx;
  fit.intercept = my - slope * mx;
  fit.exponent_or_rate = model == RateModel::PowerLaw ? slope : -slope;
  fit.r_squared = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
  fit.points = static_cast<int>(xs.size());
  return fit;
}

/// One line of the run summary.
struct CheckRow {
  std::string check;
  std::string detail;
  double observed = 0.0;
  double bound = 0.0;
  bool pass = true;
};

struct CheckResult {
  std::string name;
  std::vector<double> t;
  std::vector<double> lhs;
  std::vector<double> lhs_se;
  std::vector<double> rhs;
  bool violated = false;
  std::vector<CheckRow> rows;
};

namespace detail {
inline CheckResult one_sided(std::string name, const MetricSeries& lhs, const std::vector<double>& rhs, double slack) {
  CheckResult r;
  r.name = std::move(name);
  r.t = lhs.t;
  r.lhs = lhs.mean;
  r.rhs = rhs;
  double worst_excess = -kInf;
  std::size_t worst = 0;
  for (std::size_t i = 0; i < lhs.t.size(); ++i) {
    r.lhs_se.push_back(lhs.se(i));
    // Rounding allowance for deterministic runs where lhs and rhs coincide; lhs is often a squared
    // difference, so its rounding error scales like sqrt(rhs).
    const double round_off = 1e-12 * (std::abs(rhs[i]) + std::sqrt(std::abs(rhs[i])));
    const double excess = lhs.mean[i] - (rhs[i] + slack * lhs.se(i) + round_off);
    if (excess > 0.0) r.violated = true;
    if (lhs.t[i] > 0.0 && excess > worst_excess) {
      worst_excess = excess;
      worst = i;
    }
  }
  if (!lhs.t.empty()) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "tightest at t=%.4g", lhs.t[worst]);
    r.rows.push_back({r.name, buf, lhs.mean[worst], rhs[worst] + slack * lhs.se(worst), !r.violated});
  }
  return r;
}
}  // namespace detail

/// int_0^t e^{-2 rho (t - s)} sigma_inf(s)^2 ds by adaptive Gauss-Kronrod on the closed-form integrand.
inline double strong_rate_noise_term(const NoiseModel& noise, double rho, double t) {
  if (t <= 0.0 || noise.is_zero()) return 0.0;
  auto f = [&](double s) {
    const double si = noise.sigma_inf(s);
    return std::exp(-2.0 * rho * (t - s)) * si * si;
  };
  return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, 0.0, t, 15, 1e-12);
}

/// E|X_t - x*|^2 <= e^{-2 rho t} E|X_0 - x*|^2 + int_0^t e^{-2 rho (t-s)} sigma_inf(s)^2 ds.
/// With a step h > 0 the rate is the one the implicit scheme contracts at, log(1 + h rho) / h.
/// `rhs_factor` scales the bound (detector sanity uses 0.5).
inline CheckResult strong_rate_check(const MetricSeries& dist_sq, const OperatorSpec& op, double initial_dist_sq,
                                     const NoiseModel& noise, double h, double slack = 3.0, double rhs_factor = 1.0) {
  const double modulus = op.strong_monotonicity_modulus();
  if (!(modulus > 0.0)) throw Error(ErrorCode::NotStronglyMonotone, "strong_rate needs rho > 0");
  const double rho = h > 0.0 ? std::log1p(h * modulus) / h : modulus;
  std::vector<double> rhs;
  for (double t : dist_sq.t) {
    rhs.push_back(rhs_factor * (std::exp(-2.0 * rho * t) * initial_dist_sq + strong_rate_noise_term(noise, rho, t)));
  }
  return detail::one_sided("strong_rate", dist_sq, rhs, slack);
}

enum class ErgodicVariant { Value, StrongConvexity };

/// Value variant:  E(phi(Xbar_t) - min phi) <= (1/2t) (E d(X_0; S)^2 + int_0^t sigma_inf^2).
/// Strong variant: E|Xbar_t - x*|^2 <= (1/(mu t)) (E|X_0 - x*|^2 + int_0^t sigma_inf^2).
/// `rhs_factor` scales the bound.
inline CheckResult ergodic_value_check(const MetricSeries& lhs, const OperatorSpec& op, double initial_sq,
                                       const NoiseModel& noise, ErgodicVariant variant, double slack = 3.0,
                                       double rhs_factor = 1.0) {
  if (!op.potential()) throw Error(ErrorCode::NoPotential, "ergodic_value needs a potential");
  double coef = 0.5;
  if (variant == ErgodicVariant::StrongConvexity) {
    const double mu = op.potential()->strong_convexity;
    if (!(mu > 0.0)) throw Error(ErrorCode::NotStronglyConvex, "strong-convexity variant needs mu > 0");
    coef = 1.0 / mu;
  }
  std::vector<double> rhs;
  for (double t : lhs.t) {
    rhs.push_back(t > 0.0 ? rhs_factor * coef / t * (initial_sq + noise.sigma_inf_sq_integral(0.0, t)) : kInf);
  }
  return detail::one_sided(variant == ErgodicVariant::Value ? "ergodic_value" : "ergodic_value_strong", lhs, rhs,
                           slack);
}

struct ConcentrationRow {
  double t = 0.0;
  double eps = 0.0;
  double q0 = 0.0;
  double q1_hat = 0.0;
  double empirical_tail = 0.0;
  double bound = 0.0;
  double se = 0.0;
  bool violated = false;
};

struct ConcentrationReport {
  std::vector<ConcentrationRow> rows;
  long n_paths = 0;
  bool violated = false;
};

/// P(Delta phi(Xbar_t) >= Q0(t) + eps Q1(t)) <= exp(-eps^2/4) with
///   Q0(t) = (1/t)(int_0^t sigma_inf^2 + |X_0 - x*|^2),  Q1(t) = sqrt(delta(t)) / t.
/// `gap_samples[i][j]` is Delta phi(Xbar) of path i at times[j]; `delta_hat[j]` the MC mean
/// of the auxiliary integral. The standard error is the binomial one at the bound.
inline ConcentrationReport concentration_check(const std::vector<std::vector<double>>& gap_samples,
                                               const std::vector<double>& times, const std::vector<double>& delta_hat,
                                               double initial_sq, const NoiseModel& noise,
                                               const std::vector<double>& eps_levels, double slack = 3.0) {
  if (delta_hat.size() != times.size()) throw Error(ErrorCode::MissingAuxiliary, "auxiliary process W is missing");
  ConcentrationReport rep;
  rep.n_paths = static_cast<long>(gap_samples.size());
  const double n = static_cast<double>(rep.n_paths);
  for (std::size_t j = 0; j < times.size(); ++j) {
    const double t = times[j];
    const double q0 = (noise.sigma_inf_sq_integral(0.0, t) + initial_sq) / t;
    const double q1 = std::sqrt(std::max(0.0, delta_hat[j])) / t;
    for (double eps : eps_levels) {
      ConcentrationRow row{t, eps, q0, q1, 0.0, std::exp(-eps * eps / 4.0), 0.0, false};
      long hits = 0;
      for (const auto& s : gap_samples) {
        if (s[j] >= q0 + eps * q1) ++hits;
      }
      row.empirical_tail = n > 0 ? static_cast<double>(hits) / n : 0.0;
      row.se = n > 0 ? std::sqrt(row.bound * (1.0 - row.bound) / n) : 0.0;
      row.violated = row.empirical_tail > row.bound + slack * row.se;
      rep.violated = rep.violated || row.violated;
      rep.rows.push_back(row);
    }
  }
  return rep;
}

struct TikhonovReport {
  std::vector<double> r_values;
  std::vector<double> flow_tail;        // E sup_{s>=r} |X_s - x(s)|^2
  std::vector<double> flow_tail_se;
  std::vector<double> curve_tail;       // E sup_{s>=r} |X_s - x_eps(s)|^2
  std::vector<double> budget;           // z_r + int_r^inf sigma_inf^2
  std::vector<double> ratio;            // curve_tail / budget
  double constant = 0.0;                // max ratio
  double ratio_spread = 0.0;            // max ratio / min ratio
  bool flow_decreasing = true;
  std::optional<double> final_dist_sq;  // E|X_T - proj_S(0)|^2
  std::optional<double> final_budget;   // eps(T)^{1/p} + z_T^2 + int_T^inf sigma_inf^2
  bool violated = false;
  std::vector<CheckRow> rows;
};

/// Tikhonov diagnostics from tail-sup series sampled at the r values (series.t == r_values).
inline TikhonovReport tikhonov_checks(const MetricSeries& flow_tail, const MetricSeries& curve_tail,
                                      const OperatorSpec& op, const NoiseModel& noise, const TikhonovSchedule& tik,
                                      std::optional<double> final_dist_sq, double T, double flow_threshold,
                                      double ratio_factor, double slack = 3.0) {
  if (!tik.enabled()) throw Error(ErrorCode::ScheduleOff, "tikhonov checks need a PowerEps schedule");
  TikhonovReport rep;
  rep.r_values = flow_tail.t;
  rep.flow_tail = flow_tail.mean;
  rep.curve_tail = curve_tail.mean;
  double rmin = kInf;
  for (std::size_t i = 0; i < rep.r_values.size(); ++i) {
    const double r = rep.r_values[i];
    rep.flow_tail_se.push_back(flow_tail.se(i));
    if (i > 0 && flow_tail.mean[i] > flow_tail.mean[i - 1] + slack * std::hypot(flow_tail.se(i), flow_tail.se(i - 1))) {
      rep.flow_decreasing = false;
    }
    const double b = tik.z(r) + noise.sigma_inf_sq_integral(r, kInf);
    rep.budget.push_back(b);
    const double ratio = b > 0.0 ? curve_tail.mean[i] / b : kInf;
    rep.ratio.push_back(ratio);
    rep.constant = std::max(rep.constant, ratio);
    rmin = std::min(rmin, ratio);
  }
  rep.ratio_spread = rmin > 0.0 ? rep.constant / rmin : kInf;
  if (!rep.r_values.empty()) {
    const double last = rep.flow_tail.back();
    const bool tail_ok = last <= flow_threshold + slack * flow_tail.se(rep.r_values.size() - 1);
    rep.rows.push_back({"tikhonov_flow_tail", "E sup|X-x(s)|^2 at r=" + std::to_string(rep.r_values.back()), last,
                        flow_threshold, tail_ok && rep.flow_decreasing});
    const bool ratio_ok = std::isfinite(rep.constant) && rep.ratio_spread <= ratio_factor;
    rep.rows.push_back({"tikhonov_ratio", "max/min discrepancy-to-budget ratio", rep.ratio_spread, ratio_factor, ratio_ok});
    rep.violated = !(tail_ok && rep.flow_decreasing && ratio_ok);
  }
  if (final_dist_sq && op.potential() && op.potential()->error_bound) {
    const double p = op.potential()->error_bound->p;
    rep.final_dist_sq = final_dist_sq;
    rep.final_budget = std::pow(tik.eps(T), 1.0 / p) + std::pow(tik.z(T), 2) + noise.sigma_inf_sq_integral(T, kInf);
    rep.rows.push_back({"tikhonov_final", "E|X_T - proj_S(0)|^2 vs eps^(1/p)+z^2+tail (reported)", *final_dist_sq,
                        *rep.final_budget, true});
  }
  return rep;
}

}  // namespace msdi
