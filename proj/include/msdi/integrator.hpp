#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <utility>
#include <vector>

#include "msdi/noise.hpp"
#include "msdi/operator_ops.hpp"
#include "msdi/rng.hpp"
#include "msdi/subspace.hpp"

namespace msdi {

struct StepResult {
  Vector x_next;
  Vector dY;
  Vector dM;
  Vector drift;  // h F(t_k, x_k)
  Vector noise;  // sigma(t_k, x_k) dB
};

/// One resolvent Euler-Maruyama step.
///
///   p      = x_k + h F(t_k, x_k) + sigma dB,   F(t, x) = -eps(t) x
///   x_next = J_{hA}(p)
///   dM     = -(I - Pi) sigma dB
///   dY     = p - x_next - (I - Pi) sigma dB  =  Pi (p - x_next) + (I - Pi) h F
///
/// so that x_next = x_k - dY + dM + h F + sigma dB.
inline StepResult step(const OperatorSpec& op, const SubspaceInfo& info, const Vector& x_k, double t_k, double h,
                       const Vector& dB, const NoiseModel& noise, const TikhonovSchedule& tik) {
  if (!(h > 0.0)) throw Error(ErrorCode::InvalidArgument, "step size must be positive");
  StepResult r;
  r.drift = -h * tik.eps(t_k) * x_k;
  r.noise = noise.is_zero() ? Vector(Vector::Zero(x_k.size())) : Vector(noise.sigma(t_k, x_k) * dB);
  const Vector p = x_k + r.drift + r.noise;
  r.x_next = resolvent(op, h, p);
  const Vector normal_noise = r.noise - info.tangential(r.noise);
  r.dM = -normal_noise;
  r.dY = p - r.x_next - normal_noise;
  if (!r.x_next.allFinite()) throw Error(ErrorCode::NonFiniteState, "state became non-finite");
  return r;
}

/// Everything a single path needs. Shared read-only across workers.
struct SimulationSetup {
  std::shared_ptr<const OperatorSpec> op;
  SubspaceInfo info;
  NoiseModel noise;
  TikhonovSchedule tik;
  Vector x0;
  double h = 0x1.0p-7;
  int steps = 0;

  static SimulationSetup make(const OperatorSpec& op, NoiseModel noise, TikhonovSchedule tik, Vector x0, double h,
                              double T) {
    SimulationSetup s;
    s.op = std::make_shared<const OperatorSpec>(op);
    s.info = domain_subspace(op);
    s.noise = std::move(noise);
    s.tik = tik;
    s.x0 = std::move(x0);
    s.h = h;
    s.steps = static_cast<int>(std::llround(T / h));
    return s;
  }
  double horizon() const { return h * steps; }
};

/// Discretized solution triplet (X, Y, M) with auxiliary W and the driving noise.
/// Matrices have one row per grid point (dB has one row per step).
struct Path {
  std::vector<double> t;
  Matrix X, Y, M, W;
  Matrix dB;
  Matrix drift_integral;
  Matrix noise_integral;  // running sum of sigma(t_j, X_j) dB_j

  int steps() const { return static_cast<int>(t.size()) - 1; }
  double h() const { return t.size() > 1 ? t[1] - t[0] : 0.0; }
  Index dim() const { return X.cols(); }
};

inline Matrix draw_increments(std::uint64_t master_seed, std::uint64_t path_index, int steps, Index noise_dim,
                              double h) {
  RandomStream rng(master_seed, path_index);
  Matrix dB(steps, noise_dim);
  const double sh = std::sqrt(h);
  for (int k = 0; k < steps; ++k) {
    for (Index j = 0; j < noise_dim; ++j) dB(k, j) = sh * rng.normal();
  }
  return dB;
}

/// Runs the scheme with given Brownian increments (one row per step).
inline Path simulate_with_increments(const SimulationSetup& s, const Matrix& dB) {
  const OperatorSpec& op = *s.op;
  const Index d = op.dim();
  if (s.x0.size() != d) throw Error(ErrorCode::InvalidArgument, "x0 has wrong dimension");
  if (!in_domain(op, s.x0)) {
    throw Error(ErrorCode::InitialConditionOutsideDomain, "initial condition is not in the closure of dom A");
  }
  if (dB.rows() != s.steps || dB.cols() != s.noise.noise_dim()) {
    throw Error(ErrorCode::InvalidArgument, "increment matrix does not match the grid");
  }
  const int n = s.steps;
  Path p;
  p.t.resize(static_cast<std::size_t>(n) + 1);
  for (int k = 0; k <= n; ++k) p.t[static_cast<std::size_t>(k)] = k * s.h;
  p.X = Matrix::Zero(n + 1, d);
  p.Y = Matrix::Zero(n + 1, d);
  p.M = Matrix::Zero(n + 1, d);
  p.W = Matrix::Zero(n + 1, d);
  p.drift_integral = Matrix::Zero(n + 1, d);
  p.noise_integral = Matrix::Zero(n + 1, d);
  p.dB = dB;
  p.X.row(0) = s.x0.transpose();
  p.W.row(0) = s.x0.transpose();
  Vector x = s.x0;
  for (int k = 0; k < n; ++k) {
    const Vector db = dB.row(k).transpose();
    const StepResult r = step(op, s.info, x, p.t[static_cast<std::size_t>(k)], s.h, db, s.noise, s.tik);
    p.X.row(k + 1) = r.x_next.transpose();
    p.Y.row(k + 1) = p.Y.row(k) + r.dY.transpose();
    p.M.row(k + 1) = p.M.row(k) + r.dM.transpose();
    p.W.row(k + 1) = p.W.row(k) - s.info.tangential(r.noise).transpose();
    p.drift_integral.row(k + 1) = p.drift_integral.row(k) + r.drift.transpose();
    p.noise_integral.row(k + 1) = p.noise_integral.row(k) + r.noise.transpose();
    x = r.x_next;
  }
  return p;
}

/// Path i of an ensemble: increments from stream (master_seed, path_index).
inline Path simulate_path(const SimulationSetup& s, std::uint64_t master_seed, std::uint64_t path_index = 0) {
  const Matrix dB = draw_increments(master_seed, path_index, s.steps, s.noise.noise_dim(), s.h);
  return simulate_with_increments(s, dB);
}

/// Comparison flow: the same stepper with sigma = 0.
inline Path simulate_deterministic_flow(const OperatorSpec& op, const TikhonovSchedule& tik, const Vector& x0, double h,
                                        double T) {
  NoiseModel zero = NoiseModel::isotropic(op.dim(), NoiseSchedule::zero());
  SimulationSetup s = SimulationSetup::make(op, zero, tik, x0, h, T);
  return simulate_with_increments(s, Matrix::Zero(s.steps, op.dim()));
}

struct LiftedSimulation {
  Matrix X;  // lifted states, one row per grid point
  Matrix M;  // minus the accumulated normal noise
};

/// Simulates the reduced operator on R^{dim_L} with the projected noise basis sigma dB
/// and lifts each state back through anchor + basis^T z.
inline LiftedSimulation simulate_reduced_lifted(const SimulationSetup& s, const Matrix& dB) {
  const OperatorSpec reduced = reduce_operator(*s.op, s.info);
  const Matrix& B = s.info.basis;
  const Index d = s.op->dim();
  const int n = s.steps;
  LiftedSimulation out{Matrix::Zero(n + 1, d), Matrix::Zero(n + 1, d)};
  if (!in_domain(*s.op, s.x0)) {
    throw Error(ErrorCode::InitialConditionOutsideDomain, "initial condition is not in the closure of dom A");
  }
  Vector z = s.info.to_reduced(s.x0);
  out.X.row(0) = s.info.lift(z).transpose();
  for (int k = 0; k < n; ++k) {
    const double t = k * s.h;
    const Vector x = s.info.lift(z);
    const Vector noise = s.noise.is_zero() ? Vector(Vector::Zero(d)) : Vector(s.noise.sigma(t, x) * dB.row(k).transpose());
    const Vector drift = -s.h * s.tik.eps(t) * x;
    z = resolvent(reduced, s.h, z + B * drift + B * noise);
    out.X.row(k + 1) = s.info.lift(z).transpose();
    out.M.row(k + 1) = out.M.row(k) - (noise - s.info.tangential(noise)).transpose();
  }
  return out;
}

/// max_k |X_k - (X_0 - Y_k + M_k + drift_k + noise_k)|_inf.
inline double decomposition_residual(const Path& p) {
  double worst = 0.0;
  for (Index k = 0; k < p.X.rows(); ++k) {
    const Vector rebuilt = p.X.row(0) - p.Y.row(k) + p.M.row(k) + p.drift_integral.row(k) + p.noise_integral.row(k);
    worst = std::max(worst, (p.X.row(k).transpose() - rebuilt).cwiseAbs().maxCoeff());
  }
  return worst;
}

/// Tolerance policy for the certificates: 0.05 (1 + sup_k |X_k|) h T.
inline double certificate_tolerance(const Path& p) {
  double sup = 0.0;
  for (Index k = 0; k < p.X.rows(); ++k) sup = std::max(sup, p.X.row(k).norm());
  return 0.05 * (1.0 + sup) * p.h() * (p.t.back() - p.t.front());
}

namespace detail {
/// Index ranges [a, b) of steps for dyadic subintervals of the grid, levels 0..max_level.
inline std::vector<std::pair<int, int>> dyadic_windows(int steps, int max_level = 4) {
  std::vector<std::pair<int, int>> w;
  for (int level = 0; level <= max_level; ++level) {
    const int parts = 1 << level;
    if (parts > steps) break;
    for (int j = 0; j < parts; ++j) {
      const int a = static_cast<int>(static_cast<long long>(steps) * j / parts);
      const int b = static_cast<int>(static_cast<long long>(steps) * (j + 1) / parts);
      if (b > a) w.emplace_back(a, b);
    }
  }
  return w;
}

template <class Term>
double min_over_windows(const Path& p, Term term) {
  const int n = p.steps();
  std::vector<double> prefix(static_cast<std::size_t>(n) + 1, 0.0);
  for (int k = 0; k < n; ++k) prefix[static_cast<std::size_t>(k) + 1] = prefix[static_cast<std::size_t>(k)] + term(k);
  double best = kInf;
  for (const auto& [a, b] : dyadic_windows(n)) {
    best = std::min(best, prefix[static_cast<std::size_t>(b)] - prefix[static_cast<std::size_t>(a)]);
  }
  return n == 0 ? 0.0 : best;
}
}  // namespace detail

struct GraphProbe {
  Vector alpha;
  Vector beta;
};

/// min over probes and dyadic windows of sum <X_{k+1} - alpha, dY_k> - <X_{k+1} - alpha, beta> h.
/// Each increment is paired with the state it produced (the implicit end of the step).
inline double monotonicity_certificate(const Path& p, const OperatorSpec& op, const std::vector<GraphProbe>& probes) {
  const double h = p.h();
  double best = kInf;
  for (const auto& probe : probes) {
    if (!in_graph(op, probe.alpha, probe.beta)) throw Error(ErrorCode::InvalidProbe, "probe is not a graph pair");
    best = std::min(best, detail::min_over_windows(p, [&](int k) {
      const Vector diff = p.X.row(k + 1).transpose() - probe.alpha;
      const Vector dy = (p.Y.row(k + 1) - p.Y.row(k)).transpose();
      return diff.dot(dy) - h * diff.dot(probe.beta);
    }));
  }
  return probes.empty() ? 0.0 : best;
}

/// min over dyadic windows of sum (phi(alpha) - phi(X_{k+1})) h - <alpha - X_{k+1}, dY_k>.
inline double convex_value_certificate(const Path& p, const OperatorSpec& op, const Vector& alpha) {
  if (!op.potential()) throw Error(ErrorCode::NoPotential, "operator is not declared as a subdifferential");
  const double fa = potential_value(op, alpha);
  if (!std::isfinite(fa)) throw Error(ErrorCode::InvalidProbe, "alpha is outside dom phi");
  const double h = p.h();
  std::vector<double> fx(static_cast<std::size_t>(p.X.rows()));
  for (Index k = 0; k < p.X.rows(); ++k) fx[static_cast<std::size_t>(k)] = potential_value(op, p.X.row(k).transpose());
  return detail::min_over_windows(p, [&](int k) {
    const Vector diff = alpha - p.X.row(k + 1).transpose();
    const Vector dy = (p.Y.row(k + 1) - p.Y.row(k)).transpose();
    return (fa - fx[static_cast<std::size_t>(k) + 1]) * h - diff.dot(dy);
  });
}

}  // namespace msdi
