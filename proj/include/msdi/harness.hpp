#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "msdi/diagnostics.hpp"

namespace msdi {

inline constexpr const char* kVersion = "0.3.0";

/// Worker count: explicit request, else MONOTONE_SDI_THREADS, else hardware concurrency (0 = auto).
inline int resolve_threads(int requested = 0) {
  int n = requested;
  if (n <= 0) {
    if (const char* env = std::getenv("MONOTONE_SDI_THREADS")) n = std::atoi(env);
  }
  if (n <= 0) n = static_cast<int>(std::thread::hardware_concurrency());
  return std::max(1, n);
}

/// Single-pass mean and unbiased variance.
class Welford {
 public:
  void add(double x) {
    ++n_;
    const double d = x - mean_;
    mean_ += d / static_cast<double>(n_);
    m2_ += d * (x - mean_);
  }
  long count() const { return n_; }
  double mean() const { return mean_; }
  double variance() const { return n_ > 1 ? m2_ / static_cast<double>(n_ - 1) : 0.0; }

 private:
  long n_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

/// Reduces per-path series (all on the grid t) in the given order.
inline MetricSeries reduce_stats(const std::string& name, const std::vector<double>& t,
                                 const std::vector<std::vector<double>>& per_path) {
  MetricSeries s;
  s.name = name;
  s.t = t;
  std::vector<Welford> acc(t.size());
  for (const auto& series : per_path) {
    if (series.size() != t.size()) throw Error(ErrorCode::GridMismatch, name + ": series length differs from grid");
    for (std::size_t i = 0; i < t.size(); ++i) acc[i].add(series[i]);
  }
  for (const auto& a : acc) {
    s.mean.push_back(a.mean());
    s.var.push_back(a.variance());
  }
  s.n = static_cast<long>(per_path.size());
  return s;
}

struct EnsembleRequest {
  SimulationSetup setup;
  std::vector<MetricSpec> metrics;
  std::vector<int> eval_indices;
  long n_paths = 1;
  std::uint64_t master_seed = 0;
  int retain_paths = 8;
  int threads = 0;
};

struct EnsembleStats {
  long n_paths = 0;
  std::uint64_t master_seed = 0;
  std::vector<double> t;
  std::vector<MetricSeries> series;
  std::vector<std::vector<std::vector<double>>> samples;  // [metric][path][time]
  std::vector<Path> retained;

  const MetricSeries& find(const std::string& name) const {
    for (const auto& s : series) {
      if (s.name == name) return s;
    }
    throw Error(ErrorCode::InvalidArgument, "no metric named " + name);
  }
  std::size_t index_of(const std::string& name) const {
    for (std::size_t i = 0; i < series.size(); ++i) {
      if (series[i].name == name) return i;
    }
    throw Error(ErrorCode::InvalidArgument, "no metric named " + name);
  }
};

/// Evaluation indices every `thin` steps, always including 0 and the last step, plus `extra`.
inline std::vector<int> evaluation_indices(int steps, int thin, const std::vector<int>& extra = {}) {
  std::vector<int> idx;
  thin = std::max(1, thin);
  for (int k = 0; k <= steps; k += thin) idx.push_back(k);
  idx.push_back(steps);
  for (int k : extra) {
    if (k >= 0 && k <= steps) idx.push_back(k);
  }
  std::sort(idx.begin(), idx.end());
  idx.erase(std::unique(idx.begin(), idx.end()), idx.end());
  return idx;
}

/// Simulates n_paths paths (path i uses stream (master_seed, i)) and reduces the metrics
/// in ascending path order, so the result does not depend on the worker count.
inline EnsembleStats run_ensemble(const EnsembleRequest& req) {
  if (req.n_paths < 1) throw Error(ErrorCode::InvalidArgument, "n_paths must be at least 1");
  const MetricContext ctx(req.setup, req.metrics, req.eval_indices);
  const std::size_t n = static_cast<std::size_t>(req.n_paths);
  const std::size_t m = req.metrics.size();
  EnsembleStats out;
  out.n_paths = req.n_paths;
  out.master_seed = req.master_seed;
  for (int k : req.eval_indices) out.t.push_back(k * req.setup.h);
  out.samples.assign(m, std::vector<std::vector<double>>(n));
  const std::size_t keep = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(0, req.retain_paths)));
  out.retained.resize(keep);

  bool need_avg = false;
  for (const auto& s : req.metrics) need_avg = need_avg || MetricContext::needs_average(s.kind);

  std::atomic<std::size_t> next{0};
  std::mutex err_mu;
  std::size_t err_index = n;
  std::string err_msg;
  ErrorCode err_code = ErrorCode::InvalidArgument;
  constexpr std::size_t kChunk = 16;

  auto worker = [&]() {
    for (;;) {
      const std::size_t start = next.fetch_add(kChunk);
      if (start >= n) return;
      const std::size_t stop = std::min(n, start + kChunk);
      for (std::size_t i = start; i < stop; ++i) {
        try {
          Path p = simulate_path(req.setup, req.master_seed, i);
          Matrix avg;
          if (need_avg) avg = ergodic_average(p);
          for (std::size_t j = 0; j < m; ++j) out.samples[j][i] = ctx.evaluate(req.metrics[j], p, need_avg ? &avg : nullptr);
          if (i < keep) out.retained[i] = std::move(p);
        } catch (const Error& e) {
          std::lock_guard<std::mutex> lock(err_mu);
          if (i < err_index) {
            err_index = i;
            err_msg = e.what();
            err_code = e.code();
          }
          return;
        } catch (const std::exception& e) {
          std::lock_guard<std::mutex> lock(err_mu);
          if (i < err_index) {
            err_index = i;
            err_msg = e.what();
          }
          return;
        }
      }
    }
  };
  const int threads = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(resolve_threads(req.threads)), n));
  std::vector<std::thread> pool;
  for (int w = 1; w < threads; ++w) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  if (err_index < n) throw Error(err_code, "path " + std::to_string(err_index) + ": " + err_msg);

  for (std::size_t j = 0; j < m; ++j) out.series.push_back(reduce_stats(req.metrics[j].name(), out.t, out.samples[j]));
  return out;
}

/// "%.17g" formatting, the round-trip precision for doubles.
inline std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace detail {
inline std::size_t write_text(const std::filesystem::path& target, const std::string& text) {
  std::error_code ec;
  if (target.has_parent_path()) std::filesystem::create_directories(target.parent_path(), ec);
  std::ofstream f(target, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(ErrorCode::IoFailure, "cannot open " + target.string() + " for writing");
  f.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!f) throw Error(ErrorCode::IoFailure, "write failed for " + target.string());
  return text.size();
}
}  // namespace detail

inline std::string ensemble_csv(const std::vector<MetricSeries>& series) {
  std::string s = "t,metric,mean,var,ci_lo,ci_hi,n_paths\n";
  for (const auto& m : series) {
    for (std::size_t i = 0; i < m.t.size(); ++i) {
      const double half = 1.96 * m.se(i);
      s += fmt17(m.t[i]) + "," + m.name + "," + fmt17(m.mean[i]) + "," + fmt17(m.var[i]) + "," +
           fmt17(m.mean[i] - half) + "," + fmt17(m.mean[i] + half) + "," + std::to_string(m.n) + "\n";
    }
  }
  return s;
}

inline std::size_t export_ensemble_csv(const std::vector<MetricSeries>& series, const std::filesystem::path& target) {
  return detail::write_text(target, ensemble_csv(series));
}

inline std::string concentration_csv(const ConcentrationReport& rep) {
  std::string s = "t,eps,q0,q1_hat,empirical_tail,bound,se\n";
  for (const auto& r : rep.rows) {
    s += fmt17(r.t) + "," + fmt17(r.eps) + "," + fmt17(r.q0) + "," + fmt17(r.q1_hat) + "," + fmt17(r.empirical_tail) +
         "," + fmt17(r.bound) + "," + fmt17(r.se) + "\n";
  }
  return s;
}

inline std::size_t export_concentration_csv(const ConcentrationReport& rep, const std::filesystem::path& target) {
  return detail::write_text(target, concentration_csv(rep));
}

/// Per-path dump `t,x_*,y_*,m_*,w_*,f_*,s_*` at the given row indices (all rows when empty);
/// f is the accumulated drift and s the accumulated noise.
inline std::string path_csv(const Path& p, const std::vector<int>& rows = {}) {
  const Index d = p.dim();
  std::string s = "t";
  for (const char c : std::string("xymwfs")) {
    for (Index i = 0; i < d; ++i) s += "," + std::string(1, c) + "_" + std::to_string(i);
  }
  s += "\n";
  auto emit = [&](Index k) {
    s += fmt17(p.t[static_cast<std::size_t>(k)]);
    for (const Matrix* m : {&p.X, &p.Y, &p.M, &p.W, &p.drift_integral, &p.noise_integral}) {
      for (Index i = 0; i < d; ++i) s += "," + fmt17((*m)(k, i));
    }
    s += "\n";
  };
  if (rows.empty()) {
    for (Index k = 0; k < p.X.rows(); ++k) emit(k);
  } else {
    for (int k : rows) emit(k);
  }
  return s;
}

inline std::size_t export_path_csv(const Path& p, const std::filesystem::path& target, const std::vector<int>& rows = {}) {
  return detail::write_text(target, path_csv(p, rows));
}

/// Reads back a path dump (dB is not stored).
inline Path read_path_csv(const std::filesystem::path& source) {
  std::ifstream f(source, std::ios::binary);
  if (!f) throw Error(ErrorCode::IoFailure, "cannot open " + source.string());
  std::string line;
  if (!std::getline(f, line)) throw Error(ErrorCode::IoFailure, "empty path file");
  const auto cols = static_cast<Index>(std::count(line.begin(), line.end(), ','));
  if (cols % 6 != 0 || cols == 0) throw Error(ErrorCode::IoFailure, "malformed path header");
  const Index d = cols / 6;
  std::vector<std::vector<double>> rows;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    std::vector<double> r;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) r.push_back(std::strtod(cell.c_str(), nullptr));
    if (static_cast<Index>(r.size()) != cols + 1) throw Error(ErrorCode::IoFailure, "malformed path row");
    rows.push_back(std::move(r));
  }
  Path p;
  const auto n = static_cast<Index>(rows.size());
  p.X = p.Y = p.M = p.W = p.drift_integral = p.noise_integral = Matrix(n, d);
  for (Index k = 0; k < n; ++k) {
    const auto& r = rows[static_cast<std::size_t>(k)];
    p.t.push_back(r[0]);
    for (Index i = 0; i < d; ++i) {
      p.X(k, i) = r[static_cast<std::size_t>(1 + i)];
      p.Y(k, i) = r[static_cast<std::size_t>(1 + d + i)];
      p.M(k, i) = r[static_cast<std::size_t>(1 + 2 * d + i)];
      p.W(k, i) = r[static_cast<std::size_t>(1 + 3 * d + i)];
      p.drift_integral(k, i) = r[static_cast<std::size_t>(1 + 4 * d + i)];
      p.noise_integral(k, i) = r[static_cast<std::size_t>(1 + 5 * d + i)];
    }
  }
  return p;
}

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace msdi
