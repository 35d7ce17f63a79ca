#pragma once

#include <cmath>
#include <optional>
#include <type_traits>
#include <utility>
#include <variant>

#include "msdi/operator.hpp"

namespace msdi {

namespace detail {
template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

inline void check_dim(const OperatorSpec& op, const Vector& x, const char* what) {
  if (x.size() != op.dim()) {
    throw Error(ErrorCode::InvalidArgument, std::string(what) + ": expected dimension " + std::to_string(op.dim()) +
                                                ", got " + std::to_string(x.size()));
  }
}

inline double rel_gap(const Vector& v, double scale) {
  return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff() / (1.0 + scale);
}

inline double inf_norm(const Vector& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }
}  // namespace detail

/// J_{lambda A}(x): the unique u with x - u in lambda A(u).
inline Vector resolvent(const OperatorSpec& op, double lambda, const Vector& x) {
  if (!(lambda > 0.0) || !std::isfinite(lambda)) throw Error(ErrorCode::InvalidArgument, "resolvent needs lambda > 0");
  detail::check_dim(op, x, "resolvent");
  auto constrained = [&](const ConstrainedLinear& c) -> Vector {
    const Index k = c.set.basis.rows();
    if (k == 0) return c.set.point;
    const Matrix lhs = Matrix::Identity(k, k) + lambda * c.Qr;
    const Vector rhs = c.set.basis * (x - c.set.point) - lambda * c.qr;
    return c.set.point + c.set.basis.transpose() * lhs.partialPivLu().solve(rhs);
  };
  return std::visit(
      detail::overloaded{
          [&](const LinearKind& k) -> Vector {
            const Matrix lhs = Matrix::Identity(op.dim(), op.dim()) + lambda * k.Q;
            return lhs.partialPivLu().solve(x - lambda * k.b);
          },
          [&](const SeparablePlqKind& k) -> Vector {
            Vector u(x.size());
            for (Index i = 0; i < x.size(); ++i) u(i) = k.coords[static_cast<std::size_t>(i)].prox(lambda, x(i));
            return u;
          },
          [&](const AffineNormalConeKind& k) -> Vector { return k.set.project(x); },
          [&](const RestrictedQuadraticKind& k) -> Vector { return constrained(k.core); },
          [&](const SumKind& k) -> Vector { return constrained(k.core); },
          [&](const ShiftedKind& k) -> Vector { return k.shift + resolvent(*k.inner, lambda, x - k.shift); },
          [&](const ScaledKind& k) -> Vector { return resolvent(*k.inner, lambda * k.factor, x); },
      },
      op.kind());
}

/// Membership in cl dom A (every catalog domain is closed).
inline bool in_domain(const OperatorSpec& op, const Vector& x, double tol = kDomainTol) {
  if (x.size() != op.dim()) return false;
  return std::visit(detail::overloaded{
                        [&](const LinearKind&) { return true; },
                        [&](const SeparablePlqKind& k) {
                          for (Index i = 0; i < x.size(); ++i) {
                            if (!k.coords[static_cast<std::size_t>(i)].domain().contains(x(i), tol)) return false;
                          }
                          return true;
                        },
                        [&](const AffineNormalConeKind& k) { return k.set.contains(x, tol); },
                        [&](const RestrictedQuadraticKind& k) { return k.core.set.contains(x, tol); },
                        [&](const SumKind& k) { return k.core.set.contains(x, tol); },
                        [&](const ShiftedKind& k) { return in_domain(*k.inner, x - k.shift, tol); },
                        [&](const ScaledKind& k) { return in_domain(*k.inner, x, tol); },
                    },
                    op.kind());
}

/// Euclidean projection onto cl dom A.
inline Vector project_domain(const OperatorSpec& op, const Vector& x) {
  detail::check_dim(op, x, "project_domain");
  return std::visit(detail::overloaded{
                        [&](const LinearKind&) -> Vector { return x; },
                        [&](const SeparablePlqKind& k) -> Vector {
                          Vector u(x.size());
                          for (Index i = 0; i < x.size(); ++i) {
                            u(i) = k.coords[static_cast<std::size_t>(i)].domain().clamp(x(i));
                          }
                          return u;
                        },
                        [&](const AffineNormalConeKind& k) -> Vector { return k.set.project(x); },
                        [&](const RestrictedQuadraticKind& k) -> Vector { return k.core.set.project(x); },
                        [&](const SumKind& k) -> Vector { return k.core.set.project(x); },
                        [&](const ShiftedKind& k) -> Vector { return k.shift + project_domain(*k.inner, x - k.shift); },
                        [&](const ScaledKind& k) -> Vector { return project_domain(*k.inner, x); },
                    },
                    op.kind());
}

/// Graph membership v in A(u), relative tolerance tol.
inline bool in_graph(const OperatorSpec& op, const Vector& u, const Vector& v, double tol = 1e-8) {
  if (u.size() != op.dim() || v.size() != op.dim()) return false;
  auto constrained = [&](const ConstrainedLinear& c) {
    if (!c.set.contains(u, std::max(tol, kDomainTol))) return false;
    const Vector a = c.Q * u + c.b;
    return detail::rel_gap(c.set.tangential(v - a), detail::inf_norm(v) + detail::inf_norm(a)) <= tol;
  };
  return std::visit(
      detail::overloaded{
          [&](const LinearKind& k) {
            const Vector a = k.Q * u + k.b;
            return detail::rel_gap(v - a, detail::inf_norm(a)) <= tol;
          },
          [&](const SeparablePlqKind& k) {
            for (Index i = 0; i < u.size(); ++i) {
              if (!k.coords[static_cast<std::size_t>(i)].in_subdifferential(u(i), v(i), tol)) return false;
            }
            return true;
          },
          [&](const AffineNormalConeKind& k) {
            return k.set.contains(u, std::max(tol, kDomainTol)) &&
                   detail::rel_gap(k.set.tangential(v), detail::inf_norm(v)) <= tol;
          },
          [&](const RestrictedQuadraticKind& k) { return constrained(k.core); },
          [&](const SumKind& k) { return constrained(k.core); },
          [&](const ShiftedKind& k) { return in_graph(*k.inner, u - k.shift, v, tol); },
          [&](const ScaledKind& k) { return in_graph(*k.inner, u, v / k.factor, tol); },
      },
      op.kind());
}

/// A^0(x), the least-norm element of A(x).
inline Vector minimal_norm_element(const OperatorSpec& op, const Vector& x) {
  detail::check_dim(op, x, "minimal_norm_element");
  if (!in_domain(op, x)) throw Error(ErrorCode::OutsideDomain, "point is outside dom A");
  return std::visit(
      detail::overloaded{
          [&](const LinearKind& k) -> Vector { return k.Q * x + k.b; },
          [&](const SeparablePlqKind& k) -> Vector {
            Vector v(x.size());
            for (Index i = 0; i < x.size(); ++i) {
              const auto& c = k.coords[static_cast<std::size_t>(i)];
              v(i) = c.subdifferential(c.domain().clamp(x(i)))->clamp(0.0);
            }
            return v;
          },
          [&](const AffineNormalConeKind&) -> Vector { return Vector::Zero(x.size()); },
          [&](const RestrictedQuadraticKind& k) -> Vector { return k.core.set.tangential(k.core.Q * x + k.core.b); },
          [&](const SumKind& k) -> Vector { return k.core.set.tangential(k.core.Q * x + k.core.b); },
          [&](const ShiftedKind& k) -> Vector { return minimal_norm_element(*k.inner, x - k.shift); },
          [&](const ScaledKind& k) -> Vector { return k.factor * minimal_norm_element(*k.inner, x); },
      },
      op.kind());
}

/// phi(x), +inf outside dom phi.
inline double potential_value(const OperatorSpec& op, const Vector& x) {
  if (!op.potential()) throw Error(ErrorCode::NoPotential, "operator is not declared as a subdifferential");
  detail::check_dim(op, x, "potential_value");
  auto quad = [&](const ConstrainedLinear& c) {
    if (!c.set.contains(x)) return kInf;
    return 0.5 * x.dot(c.Q * x) + c.b.dot(x);
  };
  return std::visit(detail::overloaded{
                        [&](const LinearKind& k) { return 0.5 * x.dot(k.Q * x) + k.b.dot(x); },
                        [&](const SeparablePlqKind& k) {
                          double s = 0.0;
                          for (Index i = 0; i < x.size(); ++i) s += k.coords[static_cast<std::size_t>(i)].value(x(i));
                          return s;
                        },
                        [&](const AffineNormalConeKind& k) { return k.set.contains(x) ? 0.0 : kInf; },
                        [&](const RestrictedQuadraticKind& k) { return quad(k.core); },
                        [&](const SumKind& k) { return quad(k.core); },
                        [&](const ShiftedKind& k) { return potential_value(*k.inner, x - k.shift); },
                        [&](const ScaledKind& k) { return k.factor * potential_value(*k.inner, x); },
                    },
                    op.kind());
}

struct ZeroProjection {
  Vector point;
  double distance = 0.0;
};

/// proj_S(x) and d(x; S).
inline ZeroProjection zero_set_project(const OperatorSpec& op, const Vector& x) {
  detail::check_dim(op, x, "zero_set_project");
  Vector p = std::visit(
      detail::overloaded{
          [&](const ZeroPoint& z) -> Vector { return z.x; },
          [&](const ZeroBox& z) -> Vector { return x.cwiseMax(z.lo).cwiseMin(z.hi); },
          [&](const ZeroAffine& z) -> Vector { return z.point + z.basis.transpose() * (z.basis * (x - z.point)); },
          [&](const ZeroEmpty&) -> Vector { throw Error(ErrorCode::EmptyZeroSet, "operator has no zeros"); },
      },
      op.zero_set());
  const double dist = (x - p).norm();
  return {std::move(p), dist};
}

/// The zero set when it is a single point.
inline std::optional<Vector> unique_zero(const OperatorSpec& op) {
  return std::visit(detail::overloaded{
                        [](const ZeroPoint& z) -> std::optional<Vector> { return z.x; },
                        [](const ZeroBox& z) -> std::optional<Vector> {
                          if (z.lo == z.hi) return z.lo;
                          return std::nullopt;
                        },
                        [](const ZeroAffine& z) -> std::optional<Vector> {
                          if (z.basis.rows() == 0) return z.point;
                          return std::nullopt;
                        },
                        [](const ZeroEmpty&) -> std::optional<Vector> { return std::nullopt; },
                    },
                    op.zero_set());
}

/// x_eta = J_{A / eta}(0).
inline Vector tikhonov_point(const OperatorSpec& op, double eta) {
  if (!(eta > 0.0) || !std::isfinite(eta)) throw Error(ErrorCode::InvalidArgument, "tikhonov_point needs eta > 0");
  return resolvent(op, 1.0 / eta, Vector::Zero(op.dim()));
}

/// sup { <w, v> : v in A(u) } for u in dom A; +inf when A(u) is unbounded along w.
inline double support_value(const OperatorSpec& op, const Vector& u, const Vector& w) {
  auto normal_part_zero = [&](const AffineSet& s) {
    const Vector normal = w - s.tangential(w);
    return detail::inf_norm(normal) <= 1e-9 * (1.0 + detail::inf_norm(w));
  };
  return std::visit(
      detail::overloaded{
          [&](const LinearKind& k) { return w.dot(k.Q * u + k.b); },
          [&](const SeparablePlqKind& k) {
            double s = 0.0;
            for (Index i = 0; i < u.size(); ++i) {
              const auto& c = k.coords[static_cast<std::size_t>(i)];
              const auto sub = c.subdifferential(c.domain().clamp(u(i)));
              if (w(i) > 0.0) {
                s += w(i) * sub->hi;
              } else if (w(i) < 0.0) {
                s += w(i) * sub->lo;
              }
            }
            return s;
          },
          [&](const AffineNormalConeKind& k) { return normal_part_zero(k.set) ? 0.0 : kInf; },
          [&](const RestrictedQuadraticKind& k) {
            return normal_part_zero(k.core.set) ? w.dot(k.core.set.tangential(k.core.Q * u + k.core.b)) : kInf;
          },
          [&](const SumKind& k) {
            return normal_part_zero(k.core.set) ? w.dot(k.core.set.tangential(k.core.Q * u + k.core.b)) : kInf;
          },
          [&](const ShiftedKind& k) { return support_value(*k.inner, u - k.shift, w); },
          [&](const ScaledKind& k) { return k.factor * support_value(*k.inner, u, w); },
      },
      op.kind());
}

/// Flattens Shifted/Scaled wrappers around a Linear kind into a single Q u + b.
inline std::optional<LinearKind> as_linear(const OperatorSpec& op) {
  return std::visit(detail::overloaded{
                        [](const LinearKind& k) -> std::optional<LinearKind> { return k; },
                        [](const ShiftedKind& k) -> std::optional<LinearKind> {
                          auto in = as_linear(*k.inner);
                          if (!in) return std::nullopt;
                          return LinearKind{in->Q, in->b - in->Q * k.shift};
                        },
                        [](const ScaledKind& k) -> std::optional<LinearKind> {
                          auto in = as_linear(*k.inner);
                          if (!in) return std::nullopt;
                          return LinearKind{k.factor * in->Q, k.factor * in->b};
                        },
                        [](const auto&) -> std::optional<LinearKind> { return std::nullopt; },
                    },
                    op.kind());
}

}  // namespace msdi
