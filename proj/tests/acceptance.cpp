// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any criterion fails.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "catalog.hpp"

using namespace msdi;
using namespace msdi::test;
namespace fs = std::filesystem;

namespace {

const fs::path kSource = MSDI_SOURCE_DIR;

struct Verdict {
  bool pass = true;
  std::string detail;
};

std::string f(const char* format, double a, double b = 0.0, double c = 0.0, double d = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, format, a, b, c, d);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Scenario fixture(const std::string& name) { return load_scenario((kSource / "scenarios" / (name + ".json")).string()); }

Scenario fixture_with(const std::string& name, const std::function<void(Json&)>& edit) {
  Json doc = Json::parse(slurp(kSource / "scenarios" / (name + ".json")));
  edit(doc);
  return parse_scenario(doc.dump());
}

std::vector<std::string> fixture_names() {
  std::vector<std::string> names;
  for (const auto& e : fs::directory_iterator(kSource / "scenarios")) names.push_back(e.path().stem().string());
  std::sort(names.begin(), names.end());
  return names;
}

const CheckRow* row(const RunOutcome& o, const std::string& check, const std::string& detail_prefix = "") {
  for (const auto& r : o.rows) {
    if (r.check == check && r.detail.rfind(detail_prefix, 0) == 0) return &r;
  }
  return nullptr;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// 1. Exact-solution oracle on the two-dimensional example with sigma(t) = 1/(1+t).
Verdict exact_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto op = section3_op();
  const auto noise = NoiseModel::isotropic(2, NoiseSchedule::power_decay(1.0, 1.0));
  const int fine_level = 14, fine_steps = 1 << fine_level;
  const double hf = 1.0 / fine_steps;
  const std::vector<int> levels{6, 7, 8, 9, 10};
  const int paths = 256;
  std::vector<double> mse(levels.size(), 0.0);
  double worst_x2 = 0.0, worst_y2 = 0.0, worst_m2 = 0.0;
  for (int i = 0; i < paths; ++i) {
    const Matrix fine = draw_increments(101, static_cast<std::uint64_t>(i), fine_steps, 2, hf);
    // First coordinate: X_t = e^{-t} x0 + int e^{-(t-s)} sigma(s) dB_s, propagated exactly on the fine grid.
    double exact = 1.0;
    for (int k = 0; k < fine_steps; ++k) {
      const double s = k * hf;
      exact = std::exp(-hf) * exact + std::exp(-0.5 * hf) * fine(k, 0) / (1.0 + s + 0.5 * hf);
    }
    for (std::size_t j = 0; j < levels.size(); ++j) {
      const int n = 1 << levels[j];
      const int agg = fine_steps / n;
      Matrix dB = Matrix::Zero(n, 2);
      for (int k = 0; k < fine_steps; ++k) dB.row(k / agg) += fine.row(k);
      const auto setup = SimulationSetup::make(op, noise, TikhonovSchedule::off(), vec({1, 0}), 1.0 / n, 1.0);
      const Path p = simulate_with_increments(setup, dB);
      mse[j] += std::pow(p.X(n, 0) - exact, 2) / paths;
      double m2 = 0.0;
      for (int k = 0; k < n; ++k) {
        m2 -= dB(k, 1) / (1.0 + k * setup.h);
        worst_x2 = std::max(worst_x2, std::abs(p.X(k + 1, 1)));
        worst_y2 = std::max(worst_y2, std::abs(p.Y(k + 1, 1)));
        worst_m2 = std::max(worst_m2, std::abs(p.M(k + 1, 1) - m2));
      }
    }
  }
  std::vector<double> lh, le;
  for (std::size_t j = 0; j < levels.size(); ++j) {
    lh.push_back(-levels[j]);
    le.push_back(0.5 * std::log2(mse[j]));
  }
  double mx = 0, my = 0;
  for (std::size_t j = 0; j < lh.size(); ++j) {
    mx += lh[j] / lh.size();
    my += le[j] / le.size();
  }
  double sxy = 0, sxx = 0;
  for (std::size_t j = 0; j < lh.size(); ++j) {
    sxy += (lh[j] - mx) * (le[j] - my);
    sxx += (lh[j] - mx) * (lh[j] - mx);
  }
  const double order = sxy / sxx;
  const double secs = seconds_since(t0);
  bool decreasing = true;
  for (std::size_t j = 1; j < mse.size(); ++j) decreasing = decreasing && mse[j] < mse[j - 1];
  const bool pass = order >= 0.8 && decreasing && worst_x2 == 0.0 && worst_y2 == 0.0 && worst_m2 <= 1e-12 && secs < 30.0;
  return {pass, f("log2-order %.3f (>= 0.8), RMS at h=2^-10 %.3g, |M2 - minus noise| %.2g, ", order,
                  std::sqrt(mse.back()), worst_m2) +
                    f("X2, Y2 max %.1g, %.1g; %.1f s", worst_x2, worst_y2, secs)};
}

// 2. Solution-concept invariants on every bundled scenario.
Verdict invariants() {
  bool pass = true;
  std::string worst;
  double worst_res = 0.0, worst_pm = 0.0, worst_mono = kInf, worst_val = kInf;
  for (const auto& name : fixture_names()) {
    const Scenario sc = fixture(name);
    const SimulationSetup setup = sc.setup();
    const OperatorSpec& op = *sc.op;
    RandomStream rng(sc.master_seed, 999);
    const auto pairs = graph_sample(op, Box::cube(op.dim(), 3.0), 10, rng);
    std::vector<GraphProbe> probes;
    for (const auto& gp : pairs) probes.push_back({gp.u, gp.v});
    std::vector<Vector> alphas;
    for (int i = 0; i < 10; ++i) alphas.push_back(project_domain(op, random_point(rng, op.dim(), 3.0)));
    const Matrix pi = setup.info.projector();
    for (std::uint64_t i = 0; i < 4; ++i) {
      const Path p = simulate_path(setup, sc.master_seed, i);
      const double tol = certificate_tolerance(p);
      const double res = decomposition_residual(p);
      worst_res = std::max(worst_res, res / setup.steps);
      if (res > 1e-9 * setup.steps) {
        pass = false;
        worst += " residual:" + name;
      }
      for (Index k = 0; k < p.M.rows(); ++k) {
        const double pm = (pi * p.M.row(k).transpose()).norm();
        worst_pm = std::max(worst_pm, pm);
        if (pm > 1e-12) {
          pass = false;
          worst += " orthogonality:" + name;
          break;
        }
      }
      const double mono = monotonicity_certificate(p, op, probes);
      worst_mono = std::min(worst_mono, mono / tol);
      if (mono < -tol) {
        pass = false;
        worst += " monotonicity:" + name;
      }
      if (op.potential()) {
        for (const Vector& a : alphas) {
          const double v = convex_value_certificate(p, op, a);
          worst_val = std::min(worst_val, v / tol);
          if (v < -tol) {
            pass = false;
            worst += " value:" + name;
          }
        }
      }
    }
  }
  return {pass, f("residual/N %.2g (<= 1e-9), |Pi M| %.2g (<= 1e-12), min certificate/tol %.3g (monotone), %.3g (value)",
                  worst_res, worst_pm, worst_mono, worst_val) +
                    (worst.empty() ? "" : ";" + worst)};
}

// 3. Full-space vs lifted reduced simulation.
Verdict reduction() {
  double worst = 0.0;
  for (const char* name : {"example_section3", "affine_cone"}) {
    const Scenario sc = fixture(name);
    const SimulationSetup setup = sc.setup();
    for (std::uint64_t i = 0; i < 8; ++i) {
      const Path p = simulate_path(setup, sc.master_seed, i);
      const LiftedSimulation l = simulate_reduced_lifted(setup, p.dB);
      worst = std::max(worst, (l.X - p.X).cwiseAbs().maxCoeff());
    }
  }
  return {worst <= 1e-10, f("max |X_full - X_lifted| %.2g (<= 1e-10)", worst)};
}

// 4. Strong-monotonicity rate for A(x) = x.
Verdict strong_rate() {
  const auto t0 = std::chrono::steady_clock::now();
  const Scenario sc = fixture_with("identity", [](Json& d) {
    d["grid"]["T"] = 10;
    d["ensemble"]["n_paths"] = 4096;
    d["checks"] = Json::parse(R"({"strong_rate": {"slack": 3}})");
  });
  const RunOutcome o = run_scenario(sc, 0);
  const CheckRow* r = row(o, "strong_rate");
  const double secs = seconds_since(t0);
  return {r && r->pass && secs < 60.0,
          r ? f("tightest observed %.4g vs bound+3SE %.4g over %.0f times; %.1f s", r->observed, r->bound,
                static_cast<double>(o.stats.t.size()), secs)
            : "no strong_rate row"};
}

// 5 and 7 share the half-square fixture run.
struct HalfSquareRun {
  RunOutcome outcome;
  double secs = 0.0;
};

const HalfSquareRun& half_square_run() {
  static const HalfSquareRun run = [] {
    const auto t0 = std::chrono::steady_clock::now();
    HalfSquareRun r{run_scenario(fixture("identity"), 0), 0.0};
    r.secs = seconds_since(t0);
    return r;
  }();
  return run;
}

Verdict ergodic_value() {
  const RunOutcome& o = half_square_run().outcome;
  const CheckRow* v = row(o, "ergodic_value");
  const CheckRow* s = row(o, "ergodic_value_strong");
  const auto& gap = o.stats.find("ergodic_value_gap");
  const double h = o.scenario.h;
  const RateFit fit = fit_rate(gap.t, gap.mean, RateModel::PowerLaw, 5.0 - 0.5 * h, 20.0 + 0.5 * h);
  const bool slope_ok = fit.exponent_or_rate >= -1.4 && fit.exponent_or_rate <= -0.6;
  const bool pass = v && s && v->pass && s->pass && slope_ok;
  return {pass, std::string("value bound ") + (v && v->pass ? "holds" : "VIOLATED") + ", strong-convexity bound " +
                    (s && s->pass ? "holds" : "VIOLATED") +
                    f(", fitted exponent %.3f on [5,20] (accepted [-1.4,-0.6], r^2 %.4f)", fit.exponent_or_rate,
                      fit.r_squared)};
}

// 6. Gap function O(1/t) on the skew rotation.
Verdict gap_slope() {
  const RunOutcome o = run_scenario(fixture("skew_rotation"), 0);
  const CheckRow* r = row(o, "gap_slope");
  return {r && r->pass && r->observed >= -1.3 && r->observed <= -0.7,
          r ? f("fitted exponent %.3f on [5,20] (accepted [-1.3,-0.7])", r->observed) : "no gap_slope row"};
}

// 7. Concentration.
Verdict concentration() {
  const HalfSquareRun& run = half_square_run();
  const auto& rep = *run.outcome.concentration;
  double worst_margin = -kInf;
  for (const auto& r : rep.rows) worst_margin = std::max(worst_margin, r.empirical_tail - (r.bound + 3.0 * r.se));
  return {!rep.violated && rep.rows.size() == 9 && run.secs < 120.0,
          f("%.0f (t, eps) rows, max tail - (bound + 3SE) = %.4f, %.0f paths; shared run %.1f s",
            static_cast<double>(rep.rows.size()), worst_margin, static_cast<double>(rep.n_paths), run.secs)};
}

// 8. Tikhonov selection and bounds on the hinge fixture.
Verdict tikhonov() {
  const Scenario on = fixture("hinge");
  const RunOutcome o = run_scenario(on, 0);
  const Scenario off = fixture_with("hinge", [](Json& d) {
    d["tikhonov"] = Json::parse(R"({"kind": "off"})");
    d["checks"] = Json::object();
  });
  EnsembleRequest req;
  req.setup = off.setup();
  MetricSpec norm;
  norm.kind = MetricKind::DistSqToPoint;
  norm.point = vec({0});
  MetricSpec dist;
  dist.kind = MetricKind::DistSqToZeroSet;
  req.metrics = {norm, dist};
  req.eval_indices = {off.steps()};
  req.n_paths = off.n_paths;
  req.master_seed = off.master_seed;
  req.retain_paths = 0;
  const auto st_off = run_ensemble(req);

  const double on_final = o.stats.find("tikhonov_dist_sq_min_norm").mean.back();
  const double off_norm = st_off.series[0].mean.back();
  const double off_dist = st_off.series[1].mean.back();
  const bool sel = on_final <= 0.05 && off_dist <= 0.05 && off_norm >= 0.5;

  const CheckRow* flow = row(o, "tikhonov_flow_tail");
  const CheckRow* ratio = row(o, "tikhonov_ratio");
  const bool flow_ok = flow && flow->pass;
  const bool ratio_ok = ratio && ratio->pass;
  return {sel && flow_ok && ratio_ok,
          f("(i) E|X_T|^2 tik on %.4f (<= 0.05), off: E d^2 %.4f (<= 0.05), E|X_T|^2 %.3f (>= 0.5); ", on_final, off_dist,
            off_norm) +
              (flow ? f("(ii) flow tail at r=10 %.4f (<= 0.05), ", flow->observed) +
                          (flow_ok ? "decreasing; " : "NOT decreasing; ")
                    : "(ii) missing; ") +
              (ratio ? f("(iii) ratio spread %.2f (<= 3)", ratio->observed) : "(iii) missing")};
}

// 9. Tikhonov curve properties on every fixture operator.
Verdict tikhonov_curve() {
  bool pass = true;
  double worst_norm = -kInf, worst_deriv = 0.0;
  for (const auto& name : fixture_names()) {
    const Scenario sc = fixture(name);
    const OperatorSpec& op = *sc.op;
    if (std::holds_alternative<ZeroEmpty>(op.zero_set())) continue;
    const double s0 = zero_set_project(op, Vector::Zero(op.dim())).point.norm();
    for (int e = -20; e <= 20; ++e) {
      const double eta = std::pow(10.0, e / 10.0);
      const double excess = tikhonov_point(op, eta).norm() - s0;
      worst_norm = std::max(worst_norm, excess);
      pass = pass && excess <= 1e-8;
    }
    for (double eta : {0.1, 1.0, 10.0}) {
      const double d = 1e-5 * eta;
      const double deriv = (tikhonov_point(op, eta + d) - tikhonov_point(op, eta - d)).norm() / (2 * d);
      const double bound = 1.05 * s0 / eta;
      if (bound > 0.0) worst_deriv = std::max(worst_deriv, deriv / bound);
      pass = pass && deriv <= bound + 1e-9;
    }
  }
  return {pass, f("max |x_eta| - |proj_S(0)| = %.2g (<= 1e-8), max derivative / bound %.3f (<= 1)", worst_norm, worst_deriv)};
}

// 10. Determinism and plumbing.
Verdict determinism() {
  bool pass = true;
  std::string notes;
  Scenario sc = fixture("example_section3");
  sc.n_paths = 64;
  const fs::path root = fs::temp_directory_path() / "msdi_acceptance";
  fs::remove_all(root);
  std::map<std::string, std::string> reference;
  for (int threads : {1, 2, 8}) {
    const fs::path dir = root / std::to_string(threads);
    write_report(run_scenario(sc, threads), dir);
    std::map<std::string, std::string> files;
    for (const auto& e : fs::recursive_directory_iterator(dir)) {
      if (e.is_regular_file()) files[fs::relative(e.path(), dir).string()] = slurp(e.path());
    }
    if (reference.empty()) {
      reference = files;
    } else if (files != reference) {
      pass = false;
      notes += " reports differ at " + std::to_string(threads) + " workers;";
    }
  }

  EnsembleRequest req;
  req.setup = SimulationSetup::make(section3_op(), NoiseModel::isotropic(2, NoiseSchedule::power_decay(0.5, 1.0)),
                                    TikhonovSchedule::off(), vec({1, 0}), 0x1.0p-4, 1.0);
  MetricSpec a, b;
  a.kind = MetricKind::DistSqToPoint;
  b.kind = MetricKind::OracleErrorSq;
  req.metrics = {a, b};
  req.eval_indices = evaluation_indices(req.setup.steps, 4);
  req.n_paths = 16;
  req.master_seed = 17;
  req.retain_paths = 3;
  const bool golden = ensemble_csv(run_ensemble(req).series) == slurp(kSource / "tests" / "data" / "golden_ensemble.csv");
  if (!golden) notes += " golden CSV mismatch;";

  RandomStream rng(77, 0);
  std::vector<std::string> seeds;
  for (const auto& name : fixture_names()) seeds.push_back(slurp(kSource / "scenarios" / (name + ".json")));
  int crashes = 0, rejected = 0;
  const int trials = 2000;
  for (int i = 0; i < trials; ++i) {
    std::string doc = seeds[rng.below(seeds.size())];
    for (int e = 0; e < 3 && !doc.empty(); ++e) {
      const std::size_t pos = rng.below(doc.size());
      if (rng.below(2) == 0) {
        doc[pos] = static_cast<char>(32 + rng.below(95));
      } else {
        doc.erase(pos, 1 + rng.below(6));
      }
    }
    try {
      parse_scenario(doc);
    } catch (const Error&) {
      ++rejected;
    } catch (...) {
      ++crashes;
    }
  }
  if (crashes) notes += " fuzz crashes;";
  pass = pass && golden && crashes == 0;
  return {pass, "1/2/8-worker reports " + std::string(notes.find("reports") == std::string::npos ? "identical" : "DIFFER") +
                    ", golden CSV " + (golden ? "matches" : "MISMATCH") +
                    f(", fuzz: %.0f mutated configs, %.0f rejected, %.0f crashes", trials, rejected, crashes)};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria{
      {"exact-solution oracle", exact_oracle},
      {"solution-concept invariants", invariants},
      {"reduction equivalence", reduction},
      {"strong-monotonicity rate", strong_rate},
      {"ergodic value rates", ergodic_value},
      {"gap-function rate", gap_slope},
      {"concentration", concentration},
      {"Tikhonov selection and bounds", tikhonov},
      {"Tikhonov curve properties", tikhonov_curve},
      {"determinism and plumbing", determinism},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v = {false, std::string("error: ") + e.what()};
    }
    if (!v.pass) ++failed;
    std::printf("criterion %2zu %s  %s: %s\n", i + 1, v.pass ? "PASS" : "FAIL", criteria[i].first.c_str(), v.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%zu/%zu criteria pass\n", criteria.size() - static_cast<std::size_t>(failed), criteria.size());
  return failed == 0 ? 0 : 1;
}
