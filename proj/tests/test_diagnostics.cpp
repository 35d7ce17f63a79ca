#include <gtest/gtest.h>

#include <cmath>

#include "catalog.hpp"

using namespace msdi;
using namespace msdi::test;

namespace {

EnsembleStats ensemble(const OperatorSpec& op, const Vector& x0, NoiseModel noise, TikhonovSchedule tik, double h,
                       double T, std::vector<MetricSpec> metrics, long n_paths, std::uint64_t seed,
                       std::vector<int> extra = {}) {
  EnsembleRequest req;
  req.setup = SimulationSetup::make(op, std::move(noise), tik, x0, h, T);
  req.metrics = std::move(metrics);
  req.eval_indices = evaluation_indices(req.setup.steps, std::max(1, req.setup.steps / 64), extra);
  req.n_paths = n_paths;
  req.master_seed = seed;
  req.retain_paths = 0;
  return run_ensemble(req);
}

MetricSpec metric(MetricKind k) {
  MetricSpec s;
  s.kind = k;
  return s;
}

NoiseModel zero_noise(Index d) { return NoiseModel::isotropic(d, NoiseSchedule::zero()); }
NoiseModel default_noise(Index d) { return NoiseModel::isotropic(d, NoiseSchedule::power_decay(0.5, 1.0)); }

OperatorSpec half_square() { return OperatorSpec::separable_plq({Plq1d::quadratic(1.0)}); }

}  // namespace

TEST(ErgodicAverage, ConstantAndAffineInputsAreExact) {
  std::vector<double> t;
  for (int k = 0; k <= 50; ++k) t.push_back(0.1 * k);
  Matrix c(51, 2), a(51, 1);
  for (int k = 0; k <= 50; ++k) {
    c.row(k) << 3.0, -1.5;
    a(k, 0) = 2.0 - 4.0 * t[static_cast<std::size_t>(k)];
  }
  const Matrix ac = ergodic_average(c, t), aa = ergodic_average(a, t);
  for (int k = 0; k <= 50; ++k) {
    EXPECT_NEAR(ac(k, 0), 3.0, 1e-14);
    EXPECT_NEAR(ac(k, 1), -1.5, 1e-14);
    EXPECT_NEAR(aa(k, 0), 2.0 - 2.0 * t[static_cast<std::size_t>(k)], 1e-13);
  }
}

TEST(ErgodicAverage, SkewRotationAverageShrinks) {
  const Path p = simulate_deterministic_flow(skew_op(), TikhonovSchedule::off(), vec({1, 0}), 1e-3, 20.0);
  const Matrix avg = ergodic_average(p);
  for (Index k = 1000; k < avg.rows(); k += 250) EXPECT_LE(avg.row(k).norm(), 2.0 / p.t[static_cast<std::size_t>(k)]);
}

TEST(Metrics, Examples) {
  // Constant path at the zero: distance series vanishes.
  {
    const auto s = SimulationSetup::make(hinge_op(), zero_noise(1), TikhonovSchedule::off(), vec({0.5}), 0.25, 2.0);
    const MetricContext ctx(s, {}, evaluation_indices(s.steps, 1));
    MetricSpec d = metric(MetricKind::DistSqToPoint);
    d.point = vec({0.5});
    for (double v : ctx.evaluate(d, simulate_path(s, 0))) EXPECT_EQ(v, 0.0);
  }
  // Soft-threshold path for |x|: value gap reaches 0 at t = x0.
  {
    const double h = 0x1.0p-6;
    const auto s = SimulationSetup::make(abs_op(), zero_noise(1), TikhonovSchedule::off(), vec({1}), h, 2.0);
    const MetricContext ctx(s, {}, evaluation_indices(s.steps, 1));
    const auto v = ctx.evaluate(metric(MetricKind::ValueGap), simulate_path(s, 0));
    std::size_t first = v.size();
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (v[i] == 0.0) {
        first = i;
        break;
      }
    }
    EXPECT_NEAR(static_cast<double>(first) * h, 1.0, h);
  }
  // Tikhonov discrepancy for A(x) = x - 1 against 1 / (1 + eps(t)).
  {
    const auto op = OperatorSpec::linear(Matrix::Identity(1, 1), vec({-1}));
    const auto tik = TikhonovSchedule::power_eps(1.0, 0.5);
    const auto s = SimulationSetup::make(op, zero_noise(1), tik, vec({0}), 0x1.0p-5, 4.0);
    const auto idx = evaluation_indices(s.steps, 8);
    const MetricContext ctx(s, {metric(MetricKind::TikhonovDiscrepancy)}, idx);
    const Path p = simulate_path(s, 0);
    const auto v = ctx.evaluate(metric(MetricKind::TikhonovDiscrepancy), p);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      const double target = 1.0 / (1.0 + tik.eps(idx[i] * s.h));
      EXPECT_NEAR(v[i], std::pow(p.X(idx[i], 0) - target, 2), 1e-14);
    }
    EXPECT_LT(v.back(), 1e-3);
  }
  // Operator norm and zero-set distance.
  {
    const auto s = SimulationSetup::make(identity_op(), zero_noise(1), TikhonovSchedule::off(), vec({2}), 0.5, 1.0);
    const MetricContext ctx(s, {}, {0, 1, 2});
    const auto v = ctx.evaluate(metric(MetricKind::OperatorNormSq), simulate_path(s, 0));
    EXPECT_NEAR(v[0], 4.0, 1e-15);
    EXPECT_NEAR(v[1], 16.0 / 9.0, 1e-15);
    EXPECT_NEAR(v[2], 64.0 / 81.0, 1e-15);
    const auto hs = SimulationSetup::make(hinge_op(), zero_noise(1), TikhonovSchedule::off(), vec({3}), 0.5, 1.0);
    const MetricContext hctx(hs, {}, {0, 1, 2});
    const auto hv = hctx.evaluate(metric(MetricKind::DistSqToZeroSet), simulate_path(hs, 0));
    EXPECT_NEAR(hv[0], 4.0, 1e-15);
    EXPECT_NEAR(hv[1], 2.25, 1e-15);
    EXPECT_NEAR(hv[2], 1.0, 1e-15);
  }
}

TEST(Metrics, IncompatibleSpecsAreRejected) {
  const auto s = SimulationSetup::make(skew_op(), zero_noise(2), TikhonovSchedule::off(), vec({1, 0}), 0.1, 1.0);
  for (MetricKind k : {MetricKind::ValueGap, MetricKind::TikhonovDiscrepancy, MetricKind::ErgodicGapFunction}) {
    try {
      MetricContext ctx(s, {metric(k)}, {0});
      FAIL() << metric_kind_name(k);
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::IncompatibleMetric);
    }
  }
}

TEST(FitRate, RecoversPlantedRates) {
  std::vector<double> t, inv, ex, planted;
  for (int i = 0; i <= 200; ++i) {
    const double s = 1.0 + 99.0 * i / 200.0;
    t.push_back(s);
    inv.push_back(1.0 / s);
    planted.push_back(3.7 * std::pow(s, -0.63));
  }
  EXPECT_NEAR(fit_rate(t, inv, RateModel::PowerLaw, 1.0, 100.0).exponent_or_rate, -1.0, 1e-6);
  const RateFit pf = fit_rate(t, planted, RateModel::PowerLaw, 1.0, 100.0);
  EXPECT_NEAR(pf.exponent_or_rate, -0.63, 1e-6);
  EXPECT_NEAR(std::exp(pf.intercept), 3.7, 1e-6);
  EXPECT_NEAR(pf.r_squared, 1.0, 1e-9);

  std::vector<double> te;
  for (int i = 0; i <= 100; ++i) {
    te.push_back(0.05 * i);
    ex.push_back(std::exp(-2.0 * te.back()));
  }
  EXPECT_NEAR(fit_rate(te, ex, RateModel::Exponential, 0.0, 5.0).exponent_or_rate, 2.0, 1e-6);
}

TEST(FitRate, DegenerateAndClippedWindows) {
  const std::vector<double> t{1, 2, 3, 4, 5, 6}, y{1, 0.5, 0.0, 0.25, 0.2, 1.0 / 6};
  const RateFit f = fit_rate(t, y, RateModel::PowerLaw, 1.0, 6.0);
  EXPECT_TRUE(f.clipped);
  EXPECT_EQ(f.points, 5);
  try {
    fit_rate(t, y, RateModel::PowerLaw, 1.0, 3.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DegenerateWindow);
  }
}

TEST(StrongRate, ZeroNoiseNeverViolates) {
  for (const auto& [name, op] : catalog()) {
    if (!(op.strong_monotonicity_modulus() > 0.0)) continue;
    const Vector xs = *unique_zero(op);
    const Vector x0 = project_domain(op, xs + Vector::LinSpaced(op.dim(), 2.0, -1.0));
    if ((x0 - xs).norm() < 0.1) continue;
    MetricSpec d = metric(MetricKind::DistSqToPoint);
    const auto st = ensemble(op, x0, zero_noise(op.dim()), TikhonovSchedule::off(), 0x1.0p-7, 10.0, {d}, 3, 1);
    const auto r = strong_rate_check(st.series[0], op, (x0 - xs).squaredNorm(), zero_noise(op.dim()), 0x1.0p-7, 0.0);
    EXPECT_FALSE(r.violated) << name;
  }
}

TEST(StrongRate, IdentityEnsembleAndDetector) {
  const auto noise = default_noise(1);
  const auto st = ensemble(identity_op(), vec({2}), noise, TikhonovSchedule::off(), 0x1.0p-7, 20.0,
                           {metric(MetricKind::DistSqToPoint)}, 4096, 21);
  EXPECT_FALSE(strong_rate_check(st.series[0], identity_op(), 4.0, noise, 0x1.0p-7).violated);
  EXPECT_TRUE(strong_rate_check(st.series[0], identity_op(), 4.0, noise, 0x1.0p-7, 3.0, 0.5).violated);
  EXPECT_THROW(strong_rate_check(st.series[0], skew_op(), 4.0, noise, 0x1.0p-7), Error);
}

TEST(StrongRate, NoiseTermMatchesClosedForm) {
  // Constant schedule: int_0^t e^{-2 rho (t-s)} s0^2 ds = s0^2 (1 - e^{-2 rho t}) / (2 rho).
  const auto noise = NoiseModel::isotropic(2, NoiseSchedule::constant(0.3));
  for (double t : {0.5, 2.0, 10.0}) {
    EXPECT_NEAR(strong_rate_noise_term(noise, 1.5, t), 2 * 0.09 * (1 - std::exp(-3.0 * t)) / 3.0, 1e-12);
  }
}

TEST(ErgodicValue, ZeroNoiseAtSolutionIsZero) {
  const auto st = ensemble(hinge_op(), vec({0.5}), zero_noise(1), TikhonovSchedule::off(), 0x1.0p-7, 5.0,
                           {metric(MetricKind::ErgodicValueGap)}, 2, 1);
  for (double v : st.series[0].mean) EXPECT_EQ(v, 0.0);
  EXPECT_FALSE(ergodic_value_check(st.series[0], hinge_op(), 0.0, zero_noise(1), ErgodicVariant::Value, 0.0).violated);
}

TEST(ErgodicValue, HalfSquareEnsembleLooserAndDetector) {
  const auto op = half_square();
  const auto noise = default_noise(1);
  const auto st = ensemble(op, vec({2}), noise, TikhonovSchedule::off(), 0x1.0p-7, 20.0,
                           {metric(MetricKind::ErgodicValueGap), metric(MetricKind::ErgodicDistSqToPoint)}, 4096, 22);
  const auto value = ergodic_value_check(st.series[0], op, 4.0, noise, ErgodicVariant::Value);
  EXPECT_FALSE(value.violated);
  const auto looser = ergodic_value_check(st.series[0], op, 4.0, noise, ErgodicVariant::Value, 3.0, 2.0);
  EXPECT_FALSE(looser.violated);
  for (std::size_t i = 0; i < value.rhs.size(); ++i) EXPECT_GE(looser.rhs[i], value.rhs[i]);
  EXPECT_FALSE(ergodic_value_check(st.series[1], op, 4.0, noise, ErgodicVariant::StrongConvexity).violated);
  EXPECT_TRUE(ergodic_value_check(st.series[0], op, 4.0, noise, ErgodicVariant::Value, 3.0, 0.05).violated);
  EXPECT_THROW(ergodic_value_check(st.series[0], skew_op(), 4.0, noise, ErgodicVariant::Value), Error);
  EXPECT_THROW(ergodic_value_check(st.series[0], abs_op(), 4.0, noise, ErgodicVariant::StrongConvexity), Error);
}

TEST(Concentration, BoundValuesAndZeroNoiseTail) {
  EXPECT_NEAR(std::exp(-1.0), 0.36787944117144233, 1e-16);
  const auto op = half_square();
  const double h = 0x1.0p-7;
  const std::vector<int> idx{static_cast<int>(5 / h), static_cast<int>(10 / h), static_cast<int>(20 / h)};
  const auto st = ensemble(op, vec({2}), zero_noise(1), TikhonovSchedule::off(), h, 20.0,
                           {metric(MetricKind::ErgodicValueGap), metric(MetricKind::AuxiliaryDeltaIntegral)}, 4, 1, idx);
  std::vector<double> times, delta;
  std::vector<std::vector<double>> samples(4);
  for (int k : idx) {
    const std::size_t j = static_cast<std::size_t>(std::find(st.t.begin(), st.t.end(), k * h) - st.t.begin());
    times.push_back(k * h);
    delta.push_back(st.series[1].mean[j]);
    for (std::size_t i = 0; i < 4; ++i) samples[i].push_back(st.samples[0][i][j]);
  }
  const auto rep = concentration_check(samples, times, delta, 4.0, zero_noise(1), {1, 2, 3});
  EXPECT_FALSE(rep.violated);
  for (const auto& row : rep.rows) {
    EXPECT_EQ(row.empirical_tail, 0.0);
    EXPECT_NEAR(row.bound, std::exp(-row.eps * row.eps / 4.0), 1e-16);
  }
  EXPECT_NEAR(rep.rows[1].bound, std::exp(-1.0), 1e-16);
  EXPECT_THROW(concentration_check(samples, times, {}, 4.0, zero_noise(1), {1}), Error);
}

TEST(Concentration, DetectorOnPlantedTail) {
  // Every path sits above the threshold: the empirical tail is 1 and must be flagged.
  const auto noise = default_noise(1);
  std::vector<std::vector<double>> samples(100, std::vector<double>{10.0});
  const auto rep = concentration_check(samples, {5.0}, {0.01}, 0.0, noise, {2.0});
  EXPECT_EQ(rep.rows[0].empirical_tail, 1.0);
  EXPECT_NEAR(rep.rows[0].se, std::sqrt(std::exp(-1.0) * (1 - std::exp(-1.0)) / 100.0), 1e-15);
  EXPECT_TRUE(rep.violated);
}

TEST(Tikhonov, BudgetClosedFormAndDecreasing) {
  const auto tik = TikhonovSchedule::power_eps(1.0, 0.5);
  const auto noise = default_noise(1);
  double prev = kInf;
  for (double r : {0.0, 1.0, 2.5, 5.0, 10.0, 40.0}) {
    EXPECT_NEAR(tik.z(r), 0.5 / std::sqrt(1.0 + r), 1e-15);
    const double b = tik.z(r) + noise.sigma_inf_sq_integral(r, kInf);
    EXPECT_NEAR(noise.sigma_inf_sq_integral(r, kInf), 0.25 / (1.0 + r), 1e-15);
    EXPECT_LT(b, prev);
    prev = b;
  }
}

TEST(Tikhonov, MinimumNormSelectionIsObservable) {
  const auto noise = default_noise(1);
  const double h = 0x1.0p-7;
  MetricSpec d = metric(MetricKind::DistSqToPoint);
  d.point = vec({0});
  const auto on = ensemble(hinge_op(), vec({3}), noise, TikhonovSchedule::power_eps(1.0, 0.5), h, 20.0, {d}, 256, 5);
  const auto off = ensemble(hinge_op(), vec({3}), noise, TikhonovSchedule::off(), h, 20.0, {d}, 256, 5);
  EXPECT_LT(on.series[0].mean.back(), 0.05);
  EXPECT_GT(off.series[0].mean.back(), 0.3);
  EXPECT_LE(off.series[0].mean.back(), 1.0 + 3 * off.series[0].se(off.t.size() - 1));
}

TEST(Tikhonov, ZeroNoiseIdentityConverges) {
  const auto tik = TikhonovSchedule::power_eps(1.0, 0.5);
  MetricSpec flow = metric(MetricKind::FlowDiscrepancy);
  flow.tail_sup = true;
  MetricSpec curve = metric(MetricKind::TikhonovDiscrepancy);
  curve.tail_sup = true;
  const double h = 0x1.0p-7;
  const std::vector<int> r_idx{static_cast<int>(2 / h), static_cast<int>(5 / h), static_cast<int>(10 / h)};
  EnsembleRequest req;
  req.setup = SimulationSetup::make(identity_op(), zero_noise(1), tik, vec({2}), h, 20.0);
  req.metrics = {flow, curve};
  req.eval_indices = r_idx;
  req.n_paths = 2;
  const auto st = run_ensemble(req);
  const auto rep = tikhonov_checks(st.series[0], st.series[1], identity_op(), zero_noise(1), tik, 0.0, 20.0, 0.05, 3.0);
  for (double v : rep.flow_tail) EXPECT_EQ(v, 0.0);
  for (std::size_t i = 1; i < rep.curve_tail.size(); ++i) EXPECT_LT(rep.curve_tail[i], rep.curve_tail[i - 1]);
  EXPECT_LT(rep.curve_tail.back(), 1e-3);
  EXPECT_THROW(
      tikhonov_checks(st.series[0], st.series[1], identity_op(), zero_noise(1), TikhonovSchedule::off(), 0.0, 20.0, 0.05, 3.0),
      Error);
}

TEST(Jensen, ValueOfAverageBelowAverageValue) {
  for (const auto& [name, op] : catalog()) {
    if (!op.potential()) continue;
    const auto s = SimulationSetup::make(op, default_noise(op.dim()), TikhonovSchedule::off(),
                                         project_domain(op, Vector::Constant(op.dim(), 1.5)), 0x1.0p-6, 5.0);
    for (std::uint64_t i = 0; i < 4; ++i) {
      const Path p = simulate_path(s, 9, i);
      const Matrix avg = ergodic_average(p);
      std::vector<double> phi(static_cast<std::size_t>(p.X.rows()));
      double max_phi = 0.0;
      for (Index k = 0; k < p.X.rows(); ++k) {
        phi[static_cast<std::size_t>(k)] = potential_value(op, p.X.row(k).transpose());
        max_phi = std::max(max_phi, std::abs(phi[static_cast<std::size_t>(k)]));
      }
      double integral = 0.0;
      for (Index k = 1; k < p.X.rows(); ++k) {
        integral += 0.5 * p.h() * (phi[static_cast<std::size_t>(k) - 1] + phi[static_cast<std::size_t>(k)]);
        const double lhs = potential_value(op, avg.row(k).transpose());
        ASSERT_LE(lhs, integral / p.t[static_cast<std::size_t>(k)] + 1e-8 * (1.0 + max_phi)) << name;
      }
    }
  }
}
