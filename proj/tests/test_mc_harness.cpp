#include <gtest/gtest.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "catalog.hpp"

using namespace msdi;
using namespace msdi::test;
namespace fs = std::filesystem;

namespace {

MetricSpec metric(MetricKind k) {
  MetricSpec s;
  s.kind = k;
  return s;
}

EnsembleRequest identity_request(long n_paths, NoiseSchedule schedule = NoiseSchedule::power_decay(0.5, 1.0)) {
  EnsembleRequest req;
  req.setup = SimulationSetup::make(identity_op(), NoiseModel::isotropic(1, schedule), TikhonovSchedule::off(), vec({2}),
                                    0x1.0p-7, 4.0);
  req.metrics = {metric(MetricKind::DistSqToPoint), metric(MetricKind::ErgodicValueGap),
                 metric(MetricKind::AuxiliaryDeltaIntegral)};
  req.eval_indices = evaluation_indices(req.setup.steps, 32);
  req.n_paths = n_paths;
  req.master_seed = 17;
  req.retain_paths = 3;
  return req;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("msdi_harness_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST(ReduceStats, TwoConstantSeries) {
  const auto s = reduce_stats("m", {0, 1, 2}, {{1, 1, 1}, {3, 3, 3}});
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(s.mean[i], 2.0);
    EXPECT_EQ(s.var[i], 2.0);
  }
  EXPECT_EQ(s.n, 2);
  EXPECT_FALSE(s.degenerate());
}

TEST(ReduceStats, SingleSeriesIsDegenerate) {
  const auto s = reduce_stats("m", {0, 1}, {{5, 7}});
  EXPECT_EQ(s.var[0], 0.0);
  EXPECT_EQ(s.var[1], 0.0);
  EXPECT_TRUE(s.degenerate());
}

TEST(ReduceStats, MatchesTwoPassOracle) {
  RandomStream rng(4, 0);
  std::vector<std::vector<double>> data(500, std::vector<double>(3));
  for (auto& row : data) {
    for (double& v : row) v = 1e3 + rng.normal();
  }
  const auto s = reduce_stats("m", {0, 1, 2}, data);
  for (std::size_t i = 0; i < 3; ++i) {
    double mean = 0.0, ss = 0.0;
    for (const auto& row : data) mean += row[i];
    mean /= 500.0;
    for (const auto& row : data) ss += (row[i] - mean) * (row[i] - mean);
    EXPECT_NEAR(s.mean[i], mean, 1e-10);
    EXPECT_NEAR(s.var[i], ss / 499.0, 1e-10);
  }
}

TEST(ReduceStats, PermutedPathsGiveTheSameStatistics) {
  RandomStream rng(5, 0);
  std::vector<std::vector<double>> data(64, std::vector<double>(2));
  for (auto& row : data) {
    for (double& v : row) v = rng.normal();
  }
  const auto a = reduce_stats("m", {0, 1}, data);
  std::reverse(data.begin(), data.end());
  const auto b = reduce_stats("m", {0, 1}, data);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_NEAR(a.mean[i], b.mean[i], 1e-14);
    EXPECT_NEAR(a.var[i], b.var[i], 1e-13);
  }
}

TEST(ReduceStats, GridMismatch) {
  try {
    reduce_stats("m", {0, 1, 2}, {{1, 2, 3}, {1, 2}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::GridMismatch);
  }
}

TEST(Ensemble, ZeroNoiseMatchesFlowWithZeroVariance) {
  EnsembleRequest req = identity_request(37, NoiseSchedule::zero());
  const auto st = run_ensemble(req);
  for (const auto& s : st.series) {
    for (double v : s.var) EXPECT_EQ(v, 0.0) << s.name;
  }
  const Path flow = simulate_deterministic_flow(identity_op(), TikhonovSchedule::off(), vec({2}), 0x1.0p-7, 4.0);
  for (const Path& p : st.retained) EXPECT_EQ(p.X, flow.X);
  const auto& d = st.find("dist_sq_to_point");
  for (std::size_t i = 0; i < d.t.size(); ++i) EXPECT_EQ(d.mean[i], std::pow(flow.X(req.eval_indices[i], 0), 2));
}

TEST(Ensemble, BitIdenticalAcrossThreadCounts) {
  std::string reference;
  std::vector<std::string> ref_paths;
  for (int threads : {1, 2, 8}) {
    EnsembleRequest req = identity_request(200);
    req.threads = threads;
    const auto st = run_ensemble(req);
    const std::string csv = ensemble_csv(st.series);
    std::vector<std::string> paths;
    for (const Path& p : st.retained) paths.push_back(path_csv(p));
    if (reference.empty()) {
      reference = csv;
      ref_paths = paths;
    } else {
      EXPECT_EQ(csv, reference) << threads;
      EXPECT_EQ(paths, ref_paths) << threads;
    }
  }
}

TEST(Ensemble, PathIndexUsesItsOwnStream) {
  EnsembleRequest req = identity_request(3);
  const auto st = run_ensemble(req);
  ASSERT_EQ(st.retained.size(), 3u);
  for (std::uint64_t i = 0; i < 3; ++i) EXPECT_EQ(st.retained[i].X, simulate_path(req.setup, 17, i).X);
}

TEST(Ensemble, ErrorsCarryThePathIndex) {
  EnsembleRequest req = identity_request(2);
  req.setup.x0 = vec({1, 2});
  try {
    run_ensemble(req);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("path 0"), std::string::npos);
  }
  req.n_paths = 0;
  EXPECT_THROW(run_ensemble(req), Error);
}

TEST(Ensemble, ConfidenceWidthHalvesWithFourTimesThePaths) {
  auto width_at_T = [](long n) {
    EnsembleRequest req = identity_request(n);
    req.metrics = {metric(MetricKind::DistSqToPoint)};
    req.retain_paths = 0;
    const auto st = run_ensemble(req);
    return st.series[0].se(st.t.size() - 1);
  };
  const double ratio = width_at_T(4096) / width_at_T(1024);
  EXPECT_GE(ratio, 0.45);
  EXPECT_LE(ratio, 0.55);
}

TEST(Export, HeaderOnlyForEmptyMetricList) {
  const fs::path dir = scratch("empty");
  const std::size_t bytes = export_ensemble_csv({}, dir / "ensemble.csv");
  const std::string text = slurp(dir / "ensemble.csv");
  EXPECT_EQ(text, "t,metric,mean,var,ci_lo,ci_hi,n_paths\n");
  EXPECT_EQ(bytes, text.size());
  EXPECT_EQ(concentration_csv({}), "t,eps,q0,q1_hat,empirical_tail,bound,se\n");
}

TEST(Export, UnwritableTargetIsAnIoFailure) {
  const fs::path dir = scratch("blocked");
  std::ofstream(dir / "file") << "x";
  try {
    export_ensemble_csv({}, dir / "file" / "ensemble.csv");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::IoFailure);
  }
}

TEST(Export, FormatUsesSeventeenDigitsAndLf) {
  MetricSeries s = reduce_stats("m", {0.1}, {{1.0 / 3.0}, {2.0 / 3.0}});
  const std::string csv = ensemble_csv({s});
  EXPECT_EQ(csv.find('\r'), std::string::npos);
  EXPECT_NE(csv.find("0.10000000000000001,m,0.5,"), std::string::npos) << csv;
}

TEST(Export, GoldenEnsembleCsv) {
  EnsembleRequest req = identity_request(16);
  req.setup = SimulationSetup::make(section3_op(), NoiseModel::isotropic(2, NoiseSchedule::power_decay(0.5, 1.0)),
                                    TikhonovSchedule::off(), vec({1, 0}), 0x1.0p-4, 1.0);
  req.metrics = {metric(MetricKind::DistSqToPoint), metric(MetricKind::OracleErrorSq)};
  req.eval_indices = evaluation_indices(req.setup.steps, 4);
  const std::string csv = ensemble_csv(run_ensemble(req).series);
  const fs::path golden = fs::path(MSDI_SOURCE_DIR) / "tests" / "data" / "golden_ensemble.csv";
  if (std::getenv("MSDI_REGENERATE_GOLDEN")) detail::write_text(golden, csv);
  EXPECT_EQ(csv, slurp(golden));
}

TEST(Export, PathCsvRoundTripKeepsTheResidual) {
  const auto s = SimulationSetup::make(hinge_op(), NoiseModel::isotropic(1, NoiseSchedule::power_decay(0.5, 1.0)),
                                       TikhonovSchedule::power_eps(1.0, 0.5), vec({3}), 0x1.0p-7, 2.0);
  const Path p = simulate_path(s, 3, 1);
  const fs::path dir = scratch("roundtrip");
  export_path_csv(p, dir / "path_0.csv");
  const Path q = read_path_csv(dir / "path_0.csv");
  EXPECT_EQ(q.X, p.X);
  EXPECT_EQ(q.W, p.W);
  EXPECT_NEAR(decomposition_residual(q), decomposition_residual(p), 1e-12);
}
