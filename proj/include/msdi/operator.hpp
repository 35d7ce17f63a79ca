#pragma once

#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "msdi/error.hpp"
#include "msdi/linalg.hpp"
#include "msdi/plq.hpp"

namespace msdi {

class OperatorSpec;
using OperatorPtr = std::shared_ptr<const OperatorSpec>;

/// Growth condition phi(x) - min phi >= gamma * d(x; S)^p on [phi <= level].
struct ErrorBound {
  double p = 1.0;
  double gamma = 0.0;
  double level = 0.0;
};

struct PotentialDescriptor {
  double min_value = 0.0;
  double strong_convexity = 0.0;
  std::optional<ErrorBound> error_bound;
};

struct ZeroPoint {
  Vector x;
};
struct ZeroBox {
  Vector lo;
  Vector hi;
};
struct ZeroAffine {
  Vector point;
  Matrix basis;  // orthonormal rows spanning the direction space
};
struct ZeroEmpty {};
using ZeroSetDescriptor = std::variant<ZeroPoint, ZeroBox, ZeroAffine, ZeroEmpty>;

/// A(x) = Q x + b on all of R^d.
struct LinearKind {
  Matrix Q;
  Vector b;
};

/// A = d phi with phi(x) = sum_i phi_i(x_i), each phi_i a convex PLQ.
struct SeparablePlqKind {
  std::vector<Plq1d> coords;
};

/// Normal cone of the affine set {x : C x = d}.
struct AffineNormalConeKind {
  AffineSet set;
};

/// A(x) = Q x + b + N_V(x) with V = {C x = d}; stored with its reduction to
/// coordinates z of V = point + basis^T z, where it reads Qr z + qr.
struct ConstrainedLinear {
  Matrix Q;
  Vector b;
  AffineSet set;
  Matrix Qr;
  Vector qr;

  static ConstrainedLinear make(Matrix q, Vector b, AffineSet set) {
    ConstrainedLinear c{std::move(q), std::move(b), std::move(set), {}, {}};
    c.Qr = c.set.basis * c.Q * c.set.basis.transpose();
    c.qr = c.set.basis * (c.Q * c.set.point + c.b);
    return c;
  }
};

/// Gradient of a quadratic restricted to an affine set (Q = H symmetric PSD).
struct RestrictedQuadraticKind {
  ConstrainedLinear core;
};

/// Linear operator plus normal cone of an affine set.
struct SumKind {
  ConstrainedLinear core;
};

/// A(x) = inner(x - shift).
struct ShiftedKind {
  OperatorPtr inner;
  Vector shift;
};

/// A(x) = factor * inner(x), factor > 0.
struct ScaledKind {
  OperatorPtr inner;
  double factor = 1.0;
};

/// Declarative maximal monotone operator from a closed catalog. Immutable.
class OperatorSpec {
 public:
  using Kind = std::variant<LinearKind, SeparablePlqKind, AffineNormalConeKind, RestrictedQuadraticKind, ShiftedKind,
                            ScaledKind, SumKind>;

  static OperatorSpec linear(Matrix q, Vector b) {
    check_square(q, b, "linear");
    const Matrix sym = symmetric_part(q);
    const double lam = min_eigenvalue(sym);
    if (lam < -1e-10 * (1.0 + q.cwiseAbs().maxCoeff())) {
      throw Error(ErrorCode::InvalidArgument, "linear operator requires Q + Q^T positive semidefinite");
    }
    OperatorSpec op(LinearKind{q, b}, q.rows());
    op.rho_ = std::max(0.0, lam);
    op.lipschitz_ = spectral_norm(q);
    op.zero_set_ = linear_zero_set(q, b);
    if (is_symmetric(q) && !std::holds_alternative<ZeroEmpty>(op.zero_set_)) {
      const Vector xs = representative(op.zero_set_);
      PotentialDescriptor pot;
      pot.min_value = 0.5 * xs.dot(q * xs) + b.dot(xs);
      pot.strong_convexity = op.rho_;
      if (auto lp = min_positive_eigenvalue(sym)) pot.error_bound = ErrorBound{2.0, 0.5 * *lp, pot.min_value + 1.0};
      op.potential_ = pot;
    }
    return op;
  }

  static OperatorSpec separable_plq(std::vector<Plq1d> coords, std::optional<ErrorBound> error_bound = std::nullopt) {
    if (coords.empty()) throw Error(ErrorCode::InvalidArgument, "separable_plq needs at least one coordinate");
    const auto d = static_cast<Index>(coords.size());
    OperatorSpec op(SeparablePlqKind{coords}, d);
    double mu = kInf;
    bool lipschitz = true;
    double lip = 0.0;
    for (const auto& c : coords) {
      mu = std::min(mu, c.min_curvature());
      if (auto l = c.derivative_lipschitz()) {
        lip = std::max(lip, *l);
      } else {
        lipschitz = false;
      }
    }
    op.rho_ = std::isfinite(mu) ? mu : 0.0;
    if (lipschitz) op.lipschitz_ = lip;

    Vector lo(d), hi(d);
    bool empty = false;
    for (Index i = 0; i < d; ++i) {
      const auto am = coords[static_cast<std::size_t>(i)].argmin();
      if (!am) {
        empty = true;
        break;
      }
      lo(i) = am->lo;
      hi(i) = am->hi;
    }
    if (empty) {
      op.zero_set_ = ZeroEmpty{};
      return op;
    }
    op.zero_set_ = ZeroBox{lo, hi};
    PotentialDescriptor pot;
    const Vector xs = representative(op.zero_set_);
    pot.min_value = 0.0;
    for (Index i = 0; i < d; ++i) pot.min_value += coords[static_cast<std::size_t>(i)].value(xs(i));
    pot.strong_convexity = op.rho_;
    pot.error_bound = error_bound ? error_bound : plq_error_bound(coords, pot.min_value);
    op.potential_ = pot;
    return op;
  }

  static OperatorSpec affine_normal_cone(const Matrix& c, const Vector& d) {
    AffineSet set = AffineSet::from_constraints(c, d);
    OperatorSpec op(AffineNormalConeKind{set}, c.cols());
    op.rho_ = 0.0;
    if (c.rows() == 0) op.lipschitz_ = 0.0;
    op.zero_set_ = affine_zero_set(set.point, set.basis);
    op.potential_ = PotentialDescriptor{0.0, 0.0, std::nullopt};
    return op;
  }

  static OperatorSpec restricted_quadratic(const Matrix& h, const Vector& g, const Matrix& c, const Vector& d) {
    check_square(h, g, "restricted_quadratic");
    if (!is_symmetric(h)) throw Error(ErrorCode::InvalidArgument, "restricted_quadratic requires symmetric H");
    if (min_eigenvalue(h) < -1e-10 * (1.0 + h.cwiseAbs().maxCoeff())) {
      throw Error(ErrorCode::InvalidArgument, "restricted_quadratic requires positive semidefinite H");
    }
    if (c.cols() != h.cols()) throw Error(ErrorCode::InvalidArgument, "restricted_quadratic: C has wrong column count");
    auto core = ConstrainedLinear::make(h, g, AffineSet::from_constraints(c, d));
    OperatorSpec op(RestrictedQuadraticKind{core}, h.rows());
    op.init_constrained(core, true);
    return op;
  }

  static OperatorSpec sum(const Matrix& q, const Vector& b, const Matrix& c, const Vector& d) {
    check_square(q, b, "sum");
    if (c.cols() != q.cols()) throw Error(ErrorCode::InvalidArgument, "sum: linear part and cone live in different dimensions");
    if (min_eigenvalue(symmetric_part(q)) < -1e-10 * (1.0 + q.cwiseAbs().maxCoeff())) {
      throw Error(ErrorCode::InvalidArgument, "sum requires Q + Q^T positive semidefinite");
    }
    auto core = ConstrainedLinear::make(q, b, AffineSet::from_constraints(c, d));
    OperatorSpec op(SumKind{core}, q.rows());
    op.init_constrained(core, is_symmetric(q));
    return op;
  }

  static OperatorSpec shifted(const OperatorSpec& inner, const Vector& shift) {
    if (shift.size() != inner.dim()) throw Error(ErrorCode::InvalidArgument, "shift has wrong dimension");
    OperatorSpec op(ShiftedKind{std::make_shared<const OperatorSpec>(inner), shift}, inner.dim());
    op.rho_ = inner.rho_;
    op.lipschitz_ = inner.lipschitz_;
    op.potential_ = inner.potential_;
    op.zero_set_ = std::visit(
        [&](const auto& z) -> ZeroSetDescriptor {
          using T = std::decay_t<decltype(z)>;
          if constexpr (std::is_same_v<T, ZeroPoint>) return ZeroPoint{z.x + shift};
          if constexpr (std::is_same_v<T, ZeroBox>) return ZeroBox{z.lo + shift, z.hi + shift};
          if constexpr (std::is_same_v<T, ZeroAffine>) return ZeroAffine{z.point + shift, z.basis};
          if constexpr (std::is_same_v<T, ZeroEmpty>) return ZeroEmpty{};
        },
        inner.zero_set_);
    return op;
  }

  static OperatorSpec scaled(const OperatorSpec& inner, double factor) {
    if (!(factor > 0.0) || !std::isfinite(factor)) throw Error(ErrorCode::InvalidArgument, "scale factor must be positive");
    OperatorSpec op(ScaledKind{std::make_shared<const OperatorSpec>(inner), factor}, inner.dim());
    op.rho_ = factor * inner.rho_;
    if (inner.lipschitz_) op.lipschitz_ = factor * *inner.lipschitz_;
    op.zero_set_ = inner.zero_set_;
    if (inner.potential_) {
      PotentialDescriptor pot = *inner.potential_;
      pot.min_value *= factor;
      pot.strong_convexity *= factor;
      if (pot.error_bound) {
        pot.error_bound->gamma *= factor;
        pot.error_bound->level *= factor;
      }
      op.potential_ = pot;
    }
    return op;
  }

  const Kind& kind() const { return kind_; }
  Index dim() const { return dim_; }
  double strong_monotonicity_modulus() const { return rho_; }
  std::optional<double> lipschitz_constant() const { return lipschitz_; }
  const std::optional<PotentialDescriptor>& potential() const { return potential_; }
  const ZeroSetDescriptor& zero_set() const { return zero_set_; }

  std::string kind_name() const {
    return std::visit(
        [](const auto& k) -> std::string {
          using T = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<T, LinearKind>) return "linear";
          if constexpr (std::is_same_v<T, SeparablePlqKind>) return "separable_plq";
          if constexpr (std::is_same_v<T, AffineNormalConeKind>) return "affine_normal_cone";
          if constexpr (std::is_same_v<T, RestrictedQuadraticKind>) return "restricted_quadratic";
          if constexpr (std::is_same_v<T, ShiftedKind>) return "shifted";
          if constexpr (std::is_same_v<T, ScaledKind>) return "scaled";
          if constexpr (std::is_same_v<T, SumKind>) return "sum";
        },
        kind_);
  }

  /// Some point of the zero set (the projection of the origin when it is cheap).
  static Vector representative(const ZeroSetDescriptor& z) {
    return std::visit(
        [](const auto& s) -> Vector {
          using T = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<T, ZeroPoint>) return s.x;
          if constexpr (std::is_same_v<T, ZeroBox>) {
            Vector p(s.lo.size());
            for (Index i = 0; i < p.size(); ++i) p(i) = std::min(std::max(0.0, s.lo(i)), s.hi(i));
            return p;
          }
          if constexpr (std::is_same_v<T, ZeroAffine>) {
            if (s.basis.rows() == 0) return s.point;
            return Vector(s.point - s.basis.transpose() * (s.basis * s.point));
          }
          if constexpr (std::is_same_v<T, ZeroEmpty>) throw Error(ErrorCode::EmptyZeroSet, "operator has no zeros");
        },
        z);
  }

 private:
  OperatorSpec(Kind kind, Index dim) : kind_(std::move(kind)), dim_(dim) {}

  static void check_square(const Matrix& q, const Vector& b, const char* what) {
    if (q.rows() == 0 || q.rows() != q.cols() || b.size() != q.rows()) {
      throw Error(ErrorCode::InvalidArgument, std::string(what) + ": matrix must be square and match the vector");
    }
  }

  static ZeroSetDescriptor affine_zero_set(const Vector& point, const Matrix& basis) {
    if (basis.rows() == 0) return ZeroPoint{point};
    return ZeroAffine{point, basis};
  }

  static ZeroSetDescriptor linear_zero_set(const Matrix& q, const Vector& b) {
    const Vector x = min_norm_solution(q, -b);
    if ((q * x + b).cwiseAbs().maxCoeff() > 1e-9 * (1.0 + b.cwiseAbs().maxCoeff())) return ZeroEmpty{};
    return affine_zero_set(x, null_space_rows(q, q.cols()));
  }

  void init_constrained(const ConstrainedLinear& core, bool has_potential) {
    const Index k = core.set.basis.rows();
    rho_ = k == 0 ? 0.0 : std::max(0.0, min_eigenvalue(symmetric_part(core.Qr)));
    if (core.set.C.rows() == 0) lipschitz_ = spectral_norm(core.Q);
    if (k == 0) {
      zero_set_ = ZeroPoint{core.set.point};
    } else {
      const Vector z = min_norm_solution(core.Qr, -core.qr);
      if ((core.Qr * z + core.qr).cwiseAbs().maxCoeff() > 1e-9 * (1.0 + core.qr.cwiseAbs().maxCoeff())) {
        zero_set_ = ZeroEmpty{};
      } else {
        const Vector x = core.set.point + core.set.basis.transpose() * z;
        const Matrix null_z = null_space_rows(core.Qr, k);
        if (null_z.rows() == 0) {
          zero_set_ = ZeroPoint{x};
        } else {
          zero_set_ = ZeroAffine{x, orthonormalize_rows(null_z * core.set.basis)};
        }
      }
    }
    if (has_potential && !std::holds_alternative<ZeroEmpty>(zero_set_)) {
      const Vector xs = representative(zero_set_);
      PotentialDescriptor pot;
      pot.min_value = 0.5 * xs.dot(core.Q * xs) + core.b.dot(xs);
      pot.strong_convexity = rho_;
      if (k > 0) {
        if (auto lp = min_positive_eigenvalue(symmetric_part(core.Qr))) {
          pot.error_bound = ErrorBound{2.0, 0.5 * *lp, pot.min_value + 1.0};
        }
      }
      potential_ = pot;
    }
  }

  static std::optional<ErrorBound> plq_error_bound(const std::vector<Plq1d>& coords, double min_value) {
    // All active coordinates sharp (nonzero one-sided slopes at the argmin ends) gives p = 1;
    // all active coordinates strongly convex gives p = 2. Mixed cases are left undeclared.
    bool all_sharp = true;
    bool all_quadratic = true;
    double gamma_sharp = kInf;
    double gamma_quad = kInf;
    bool any_active = false;
    for (const auto& c : coords) {
      if (c.point_domain()) continue;
      any_active = true;
      const auto am = *c.argmin();
      double slope = kInf;
      if (std::isfinite(am.hi) && am.hi < c.domain().hi) slope = std::min(slope, c.subdifferential(am.hi)->hi);
      if (std::isfinite(am.lo) && am.lo > c.domain().lo) slope = std::min(slope, -c.subdifferential(am.lo)->lo);
      if (!(slope > 0.0) || (!std::isfinite(am.hi) && am.hi < c.domain().hi) ||
          (!std::isfinite(am.lo) && am.lo > c.domain().lo)) {
        all_sharp = false;
      } else {
        gamma_sharp = std::min(gamma_sharp, slope);
      }
      const double mu = c.min_curvature();
      if (mu > 0.0) {
        gamma_quad = std::min(gamma_quad, 0.5 * mu);
      } else {
        all_quadratic = false;
      }
    }
    if (!any_active) return std::nullopt;
    if (all_sharp && std::isfinite(gamma_sharp)) return ErrorBound{1.0, gamma_sharp, min_value + 1.0};
    if (all_quadratic && std::isfinite(gamma_quad)) return ErrorBound{2.0, gamma_quad, min_value + 1.0};
    return std::nullopt;
  }

  Kind kind_;
  Index dim_;
  double rho_ = 0.0;
  std::optional<double> lipschitz_;
  std::optional<PotentialDescriptor> potential_;
  ZeroSetDescriptor zero_set_ = ZeroEmpty{};
};

}  // namespace msdi
