#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "msdi/operator_ops.hpp"
#include "msdi/rng.hpp"

namespace msdi {

/// Axis-aligned box [lo, hi]. Degenerate sides (lo == hi) are allowed.
struct Box {
  Vector lo;
  Vector hi;

  static Box cube(Index dim, double half_width) {
    return {Vector::Constant(dim, -half_width), Vector::Constant(dim, half_width)};
  }
  bool contains(const Vector& x, double tol = kDomainTol) const {
    for (Index i = 0; i < x.size(); ++i) {
      const double t = tol * (1.0 + std::abs(x(i)));
      if (x(i) < lo(i) - t || x(i) > hi(i) + t) return false;
    }
    return true;
  }
  Vector clamp(const Vector& x) const { return x.cwiseMax(lo).cwiseMin(hi); }
};

/// Compact localization set K for the gap function: a box or a Euclidean ball.
struct CompactSet {
  enum class Shape { Box, Ball };
  Shape shape = Shape::Box;
  Box box;
  Vector center;
  double radius = 0.0;

  static CompactSet make_box(Vector lo, Vector hi) {
    if (lo.size() != hi.size() || (lo.array() > hi.array()).any() || !lo.allFinite() || !hi.allFinite()) {
      throw Error(ErrorCode::InvalidArgument, "box needs finite lo <= hi");
    }
    CompactSet k;
    k.box = {std::move(lo), std::move(hi)};
    return k;
  }
  static CompactSet make_ball(Vector c, double r) {
    if (!(r >= 0.0) || !std::isfinite(r) || !c.allFinite()) throw Error(ErrorCode::InvalidArgument, "ball needs finite radius >= 0");
    CompactSet k;
    k.shape = Shape::Ball;
    k.box = {c.array() - r, c.array() + r};
    k.center = std::move(c);
    k.radius = r;
    return k;
  }

  Index dim() const { return box.lo.size(); }
  const Box& bounding_box() const { return box; }
  bool contains(const Vector& x, double tol = kDomainTol) const {
    if (shape == Shape::Box) return box.contains(x, tol);
    return (x - center).norm() <= radius + tol * (1.0 + radius);
  }
};

struct GapValue {
  double value = 0.0;
  bool exact = false;  // false means a lower bound from a finite grid
};

namespace detail {

/// Closed-form sup_{u in K} <x - u, Q u + c> for the Linear shapes that admit one.
inline std::optional<double> linear_gap_closed_form(const LinearKind& lin, const Vector& x, const CompactSet& k,
                                                    const Vector& y) {
  const Vector b = lin.b - y;
  const Matrix s = symmetric_part(lin.Q);
  const Vector c = lin.Q.transpose() * x - b;  // objective: <x, b> + <u, c> - u^T S u
  const double base = x.dot(b);
  const Index d = x.size();
  const bool zero_sym = s.cwiseAbs().maxCoeff() <= 1e-14;
  const bool diagonal = (s - Matrix(s.diagonal().asDiagonal())).cwiseAbs().maxCoeff() <= 1e-14;
  if (k.shape == CompactSet::Shape::Box && (zero_sym || diagonal)) {
    double total = base;
    for (Index i = 0; i < d; ++i) {
      const double si = s(i, i);
      const double lo = k.box.lo(i);
      const double hi = k.box.hi(i);
      auto f = [&](double u) { return c(i) * u - si * u * u; };
      double best = std::max(f(lo), f(hi));
      if (si > 0.0) {
        const double u = std::min(std::max(c(i) / (2.0 * si), lo), hi);
        best = std::max(best, f(u));
      }
      total += best;
    }
    return total;
  }
  if (k.shape == CompactSet::Shape::Ball) {
    const double s0 = s(0, 0);
    const bool scalar = (s - s0 * Matrix::Identity(d, d)).cwiseAbs().maxCoeff() <= 1e-14;
    if (zero_sym) return base + c.dot(k.center) + k.radius * c.norm();
    if (scalar && s0 > 0.0) {
      // -s |u - c/(2s)|^2 + |c|^2/(4s): maximized at the projection of c/(2s) onto the ball.
      const Vector target = c / (2.0 * s0);
      Vector u = target;
      const double r = (target - k.center).norm();
      if (r > k.radius) u = k.center + (target - k.center) * (k.radius / r);
      return base + c.dot(u) - s0 * u.squaredNorm();
    }
  }
  return std::nullopt;
}

inline int dyadic_points(int n_grid) {
  int m = 1;
  while (m < n_grid - 1) m *= 2;
  return m + 1;
}

}  // namespace detail

/// Localized gap sup { <x - u, v - y> : u in dom A intersect K, v in A(u) }.
///
/// Linear kinds over boxes (diagonal or zero symmetric part) and balls (scalar
/// symmetric part) are solved in closed form. Everything else is a lower bound
/// from a dyadic grid on the bounding box of K with 2^ceil(log2(n_grid - 1)) + 1
/// points per axis, so refining n_grid never decreases the value.
/// `v_clip`, when given, restricts v to a box.
inline GapValue gap_function(const OperatorSpec& op, const Vector& x, const CompactSet& k, const Vector& y,
                             int n_grid, const std::optional<Box>& v_clip = std::nullopt) {
  detail::check_dim(op, x, "gap_function");
  if (k.dim() != op.dim() || y.size() != op.dim()) throw Error(ErrorCode::InvalidArgument, "gap_function: dimension mismatch");
  if (n_grid < 2) throw Error(ErrorCode::InvalidArgument, "gap_function needs n_grid >= 2");
  if (!v_clip) {
    if (auto lin = as_linear(op)) {
      if (auto v = detail::linear_gap_closed_form(*lin, x, k, y)) return {*v, true};
    }
  }
  const Index d = op.dim();
  const int m = detail::dyadic_points(n_grid);
  double total = 1.0;
  for (Index i = 0; i < d; ++i) total *= m;
  if (total > 4.0e6) throw Error(ErrorCode::InvalidArgument, "gap_function grid too large");

  const Box& bb = k.bounding_box();
  std::vector<int> idx(static_cast<std::size_t>(d), 0);
  double best = -kInf;
  bool any = false;
  Vector u(d);
  for (;;) {
    for (Index i = 0; i < d; ++i) {
      const double frac = static_cast<double>(idx[static_cast<std::size_t>(i)]) / (m - 1);
      u(i) = bb.lo(i) + frac * (bb.hi(i) - bb.lo(i));
    }
    const Vector p = project_domain(op, u);
    if (k.contains(p)) {
      const Vector w = x - p;
      double val;
      if (!v_clip) {
        val = support_value(op, p, w) - w.dot(y);
        any = true;
      } else {
        // Lower bound on the clipped sup: the minimal-norm selection, pushed along w
        // as far as the clip box and the graph allow.
        Vector v0 = minimal_norm_element(op, p);
        val = -kInf;
        if (v_clip->contains(v0, 1e-12)) {
          val = w.dot(v0 - y);
          if (w.norm() > 0.0) {
            const Vector dir = w / w.norm();
            double tmax = kInf;
            for (Index i = 0; i < d; ++i) {
              if (dir(i) > 0) tmax = std::min(tmax, (v_clip->hi(i) - v0(i)) / dir(i));
              if (dir(i) < 0) tmax = std::min(tmax, (v_clip->lo(i) - v0(i)) / dir(i));
            }
            if (std::isfinite(tmax) && tmax > 0.0 && in_graph(op, p, v0 + tmax * dir, 1e-9)) {
              val = std::max(val, w.dot(v0 + tmax * dir - y));
            }
          }
          any = true;
        }
      }
      best = std::max(best, val);
    }
    Index i = 0;
    while (i < d && ++idx[static_cast<std::size_t>(i)] == m) idx[static_cast<std::size_t>(i++)] = 0;
    if (i == d) break;
  }
  if (!any) throw Error(ErrorCode::EmptyIntersection, "dom A does not meet K on the grid");
  return {best, false};
}

inline GapValue gap_function(const OperatorSpec& op, const Vector& x, const CompactSet& k, int n_grid = 65) {
  return gap_function(op, x, k, Vector::Zero(op.dim()), n_grid);
}

struct GraphPair {
  Vector u;
  Vector v;
};

namespace detail {

inline std::optional<Vector> sample_affine_point(const AffineSet& s, const Box& region, RandomStream& rng) {
  for (int attempt = 0; attempt < 256; ++attempt) {
    Vector g(region.lo.size());
    for (Index i = 0; i < g.size(); ++i) g(i) = rng.uniform(region.lo(i), region.hi(i));
    const Vector u = s.project(g);
    if (region.contains(u)) return u;
  }
  const Vector u = s.project(0.5 * (region.lo + region.hi));
  if (region.contains(u)) return u;
  return std::nullopt;
}

/// A random element of the normal space of s, shrunk into the region box when the box holds 0.
inline Vector sample_normal(const AffineSet& s, const Box& region, RandomStream& rng) {
  Vector g(region.lo.size());
  for (Index i = 0; i < g.size(); ++i) g(i) = rng.uniform(region.lo(i), region.hi(i));
  Vector n = g - s.tangential(g);
  if (region.contains(Vector::Zero(n.size())) && !region.contains(n, 0.0)) {
    double t = 1.0;
    for (Index i = 0; i < n.size(); ++i) {
      if (n(i) > region.hi(i) && n(i) > 0) t = std::min(t, region.hi(i) / n(i));
      if (n(i) < region.lo(i) && n(i) < 0) t = std::min(t, region.lo(i) / n(i));
    }
    n *= t;
  }
  return n;
}

inline std::optional<GraphPair> sample_pair(const OperatorSpec& op, const Box& region, RandomStream& rng) {
  return std::visit(
      overloaded{
          [&](const LinearKind& k) -> std::optional<GraphPair> {
            Vector u(region.lo.size());
            for (Index i = 0; i < u.size(); ++i) u(i) = rng.uniform(region.lo(i), region.hi(i));
            return GraphPair{u, k.Q * u + k.b};
          },
          [&](const SeparablePlqKind& k) -> std::optional<GraphPair> {
            const Index d = region.lo.size();
            Vector u(d), v(d);
            for (Index i = 0; i < d; ++i) {
              const auto& c = k.coords[static_cast<std::size_t>(i)];
              const auto ui = c.sample_point(Interval{region.lo(i), region.hi(i)}, rng);
              if (!ui) return std::nullopt;
              u(i) = *ui;
              const Interval sub = *c.subdifferential(*ui);
              Interval clip{std::max(sub.lo, region.lo(i)), std::min(sub.hi, region.hi(i))};
              if (clip.lo > clip.hi) {
                v(i) = sub.hi < region.lo(i) ? sub.hi : sub.lo;
              } else if (clip.lo == clip.hi) {
                v(i) = clip.lo;
              } else {
                v(i) = rng.uniform() < 0.2 ? (rng.uniform() < 0.5 ? clip.lo : clip.hi) : rng.uniform(clip.lo, clip.hi);
              }
            }
            return GraphPair{u, v};
          },
          [&](const AffineNormalConeKind& k) -> std::optional<GraphPair> {
            auto u = sample_affine_point(k.set, region, rng);
            if (!u) return std::nullopt;
            return GraphPair{*u, sample_normal(k.set, region, rng)};
          },
          [&](const RestrictedQuadraticKind& k) -> std::optional<GraphPair> {
            auto u = sample_affine_point(k.core.set, region, rng);
            if (!u) return std::nullopt;
            return GraphPair{*u, k.core.Q * *u + k.core.b + sample_normal(k.core.set, region, rng)};
          },
          [&](const SumKind& k) -> std::optional<GraphPair> {
            auto u = sample_affine_point(k.core.set, region, rng);
            if (!u) return std::nullopt;
            return GraphPair{*u, k.core.Q * *u + k.core.b + sample_normal(k.core.set, region, rng)};
          },
          [&](const ShiftedKind& k) -> std::optional<GraphPair> {
            Box shifted{region.lo - k.shift, region.hi - k.shift};
            auto p = sample_pair(*k.inner, shifted, rng);
            if (!p) return std::nullopt;
            p->u += k.shift;
            return p;
          },
          [&](const ScaledKind& k) -> std::optional<GraphPair> {
            auto p = sample_pair(*k.inner, region, rng);
            if (!p) return std::nullopt;
            p->v *= k.factor;
            return p;
          },
      },
      op.kind());
}

}  // namespace detail

/// n graph pairs (u, v) with u in dom A intersect region and v in A(u).
/// Unbounded normal directions are clipped toward the region box.
inline std::vector<GraphPair> graph_sample(const OperatorSpec& op, const Box& region, int n, RandomStream& rng) {
  if (region.lo.size() != op.dim() || region.hi.size() != op.dim()) {
    throw Error(ErrorCode::InvalidArgument, "graph_sample: region has wrong dimension");
  }
  std::vector<GraphPair> out;
  out.reserve(static_cast<std::size_t>(std::max(n, 0)));
  for (int i = 0; i < n; ++i) {
    auto p = detail::sample_pair(op, region, rng);
    if (!p) throw Error(ErrorCode::EmptyIntersection, "sampling region does not meet dom A");
    out.push_back(std::move(*p));
  }
  return out;
}

}  // namespace msdi
