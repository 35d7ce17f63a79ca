#pragma once

#include <cmath>
#include <optional>
#include <string>

#include "msdi/linalg.hpp"

namespace msdi {

/// Time profile s(t) of the diffusion coefficient.
struct NoiseSchedule {
  enum class Kind { PowerDecay, Constant, Zero };
  Kind kind = Kind::PowerDecay;
  double sigma0 = 0.5;
  double p = 1.0;

  static NoiseSchedule power_decay(double sigma0, double p) { return {Kind::PowerDecay, sigma0, p}; }
  static NoiseSchedule constant(double sigma0) { return {Kind::Constant, sigma0, 0.0}; }
  static NoiseSchedule zero() { return {Kind::Zero, 0.0, 0.0}; }

  double operator()(double t) const {
    switch (kind) {
      case Kind::PowerDecay: return sigma0 * std::pow(1.0 + t, -p);
      case Kind::Constant: return sigma0;
      case Kind::Zero: return 0.0;
    }
    return 0.0;
  }

  /// int_a^b s(t)^2 dt in closed form (b may be +inf).
  double integral_sq(double a, double b) const {
    if (b <= a) return 0.0;
    switch (kind) {
      case Kind::Zero: return 0.0;
      case Kind::Constant: return sigma0 == 0.0 ? 0.0 : sigma0 * sigma0 * (b - a);
      case Kind::PowerDecay: {
        if (sigma0 == 0.0) return 0.0;
        const double s2 = sigma0 * sigma0;
        const double e = 1.0 - 2.0 * p;
        if (std::abs(e) < 1e-15) return s2 * (std::log1p(b) - std::log1p(a));
        if (std::isinf(b)) return e < 0.0 ? s2 * std::pow(1.0 + a, e) / (-e) : kInf;
        return s2 * (std::pow(1.0 + b, e) - std::pow(1.0 + a, e)) / e;
      }
    }
    return 0.0;
  }

  bool square_integrable() const {
    switch (kind) {
      case Kind::Zero: return true;
      case Kind::Constant: return sigma0 == 0.0;
      case Kind::PowerDecay: return sigma0 == 0.0 || p > 0.5;
    }
    return false;
  }
};

/// sigma(t, x) = s(t) (Sigma0 + tanh(kappa |x|) Sigma1).
/// The coupling term is Lipschitz in x with constant kappa |Sigma1|_F.
/// Norms of sigma are Frobenius norms, the ones that enter E|sigma dB|^2.
struct NoiseModel {
  Matrix base;  // d x l
  NoiseSchedule schedule;
  std::optional<Matrix> coupling;  // d x l
  double kappa = 0.0;

  static NoiseModel isotropic(Index d, NoiseSchedule s) { return {Matrix::Identity(d, d), s, std::nullopt, 0.0}; }

  Index dim() const { return base.rows(); }
  Index noise_dim() const { return base.cols(); }
  bool is_zero() const { return schedule.kind == NoiseSchedule::Kind::Zero || schedule.sigma0 == 0.0; }

  Matrix sigma(double t, const Vector& x) const {
    const double s = schedule(t);
    if (!coupling) return s * base;
    return s * (base + std::tanh(kappa * x.norm()) * *coupling);
  }

  /// sup_x |Sigma0 + tau Sigma1|_F over tau in [0, 1) equals the larger endpoint by convexity.
  double state_sup_norm() const {
    const double n0 = base.norm();
    if (!coupling) return n0;
    return std::max(n0, (base + *coupling).norm());
  }

  double sigma_inf(double t) const { return schedule(t) * state_sup_norm(); }

  /// int_a^b sigma_inf(t)^2 dt.
  double sigma_inf_sq_integral(double a, double b) const {
    const double c = state_sup_norm();
    return c * c * schedule.integral_sq(a, b);
  }

  double lipschitz_constant() const { return coupling ? kappa * coupling->norm() : 0.0; }
};

/// Vanishing regularization eps(t).
struct TikhonovSchedule {
  enum class Kind { Off, PowerEps };
  Kind kind = Kind::Off;
  double eps0 = 1.0;
  double q = 0.5;

  static TikhonovSchedule off() { return {}; }
  static TikhonovSchedule power_eps(double eps0, double q) { return {Kind::PowerEps, eps0, q}; }

  bool enabled() const { return kind == Kind::PowerEps; }
  double eps(double t) const { return enabled() ? eps0 * std::pow(1.0 + t, -q) : 0.0; }
  double eps_derivative(double t) const { return enabled() ? -q * eps0 * std::pow(1.0 + t, -q - 1.0) : 0.0; }

  /// z_t = sup_{s >= t} |eps'(s)| / eps(s)^2 = (q / eps0) (1 + t)^(q - 1), decreasing for q < 1.
  double z(double t) const { return enabled() ? (q / eps0) * std::pow(1.0 + t, q - 1.0) : 0.0; }
};

}  // namespace msdi
