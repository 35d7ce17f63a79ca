#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "msdi/error.hpp"
#include "msdi/linalg.hpp"

namespace msdi {

/// Closed interval with possibly infinite ends.
struct Interval {
  double lo = -kInf;
  double hi = kInf;

  bool contains(double x, double tol = 0.0) const { return x >= lo - tol && x <= hi + tol; }
  double clamp(double x) const { return std::min(std::max(x, lo), hi); }
  double distance(double x) const { return x < lo ? lo - x : (x > hi ? x - hi : 0.0); }
};

/// Convex piecewise linear-quadratic function of one variable.
///
/// The domain [lo, hi] is split by strictly increasing knots into pieces.
/// On piece i the derivative is `quad_i * x + lin_i`; constants are fixed by
/// continuity from `offset`, the constant term of the first piece.
/// Outside the domain the function is +inf.
class Plq1d {
 public:
  struct Piece {
    double quad = 0.0;
    double lin = 0.0;
  };

  /// The zero function on R.
  Plq1d() : domain_{-kInf, kInf}, pieces_{Piece{}}, constants_{0.0} {}

  static Plq1d make(double lo, double hi, std::vector<double> knots, std::vector<Piece> pieces, double offset) {
    if (!(lo <= hi) || std::isnan(lo) || std::isnan(hi)) {
      throw Error(ErrorCode::InvalidArgument, "PLQ domain requires lo <= hi");
    }
    if (lo == kInf || hi == -kInf) throw Error(ErrorCode::InvalidArgument, "PLQ domain must be nonempty");
    if (pieces.size() != knots.size() + 1) {
      throw Error(ErrorCode::InvalidArgument, "PLQ needs exactly one more piece than knots");
    }
    if (lo == hi && !knots.empty()) throw Error(ErrorCode::InvalidArgument, "point-domain PLQ cannot have knots");
    for (std::size_t i = 0; i < knots.size(); ++i) {
      if (!std::isfinite(knots[i]) || !(knots[i] > lo && knots[i] < hi)) {
        throw Error(ErrorCode::InvalidArgument, "PLQ knots must lie strictly inside the domain");
      }
      if (i > 0 && !(knots[i] > knots[i - 1])) {
        throw Error(ErrorCode::InvalidArgument, "PLQ knots must be strictly increasing");
      }
    }
    for (const auto& p : pieces) {
      if (!std::isfinite(p.quad) || !std::isfinite(p.lin)) {
        throw Error(ErrorCode::InvalidArgument, "PLQ coefficients must be finite");
      }
      if (p.quad < 0.0) throw Error(ErrorCode::InvalidArgument, "PLQ pieces must have nonnegative curvature");
    }
    for (std::size_t i = 0; i < knots.size(); ++i) {
      const double left = pieces[i].quad * knots[i] + pieces[i].lin;
      const double right = pieces[i + 1].quad * knots[i] + pieces[i + 1].lin;
      if (left > right + 1e-12 * (1.0 + std::abs(left))) {
        throw Error(ErrorCode::InvalidArgument, "PLQ derivative must be nondecreasing across knots (convexity)");
      }
    }
    Plq1d f;
    f.domain_ = {lo, hi};
    f.knots_ = std::move(knots);
    f.pieces_ = std::move(pieces);
    f.constants_.resize(f.pieces_.size());
    f.constants_[0] = offset;
    for (std::size_t i = 0; i < f.knots_.size(); ++i) {
      const double t = f.knots_[i];
      const auto& a = f.pieces_[i];
      const auto& b = f.pieces_[i + 1];
      f.constants_[i + 1] = f.constants_[i] + 0.5 * (a.quad - b.quad) * t * t + (a.lin - b.lin) * t;
    }
    return f;
  }

  /// scale * |x - center|
  static Plq1d abs(double scale = 1.0, double center = 0.0) {
    return make(-kInf, kInf, {center}, {{0.0, -scale}, {0.0, scale}}, scale * center);
  }
  /// slope * max(|x| - radius, 0)
  static Plq1d hinge(double radius = 1.0, double slope = 1.0) {
    return make(-kInf, kInf, {-radius, radius}, {{0.0, -slope}, {0.0, 0.0}, {0.0, slope}}, -slope * radius);
  }
  /// a/2 x^2 + c x
  static Plq1d quadratic(double a, double c = 0.0) { return make(-kInf, kInf, {}, {{a, c}}, 0.0); }
  /// Indicator of {at}.
  static Plq1d point(double at) { return make(at, at, {}, {Piece{}}, 0.0); }
  /// Indicator of [lo, hi].
  static Plq1d interval(double lo, double hi) { return make(lo, hi, {}, {Piece{}}, 0.0); }

  const Interval& domain() const { return domain_; }
  const std::vector<double>& knots() const { return knots_; }
  const std::vector<Piece>& pieces() const { return pieces_; }
  bool point_domain() const { return domain_.lo == domain_.hi; }

  double value(double x, double tol = kDomainTol) const {
    if (!domain_.contains(x, tol)) return kInf;
    x = domain_.clamp(x);
    const std::size_t i = piece_index(x);
    return piece_value(i, x);
  }

  /// Subdifferential as a closed interval; nullopt outside the domain.
  std::optional<Interval> subdifferential(double x) const {
    if (!domain_.contains(x)) return std::nullopt;
    if (point_domain()) return Interval{-kInf, kInf};
    Interval out{kInf, -kInf};
    bool special = false;
    for (std::size_t j = 0; j < knots_.size(); ++j) {
      if (x == knots_[j]) {
        out = {derivative(j, x), derivative(j + 1, x)};
        special = true;
      }
    }
    if (x == domain_.lo) {
      out = {-kInf, derivative(0, x)};
      special = true;
    } else if (x == domain_.hi) {
      out = {derivative(pieces_.size() - 1, x), kInf};
      special = true;
    }
    if (!special) {
      const double g = derivative(piece_index(x), x);
      out = {g, g};
    }
    return out;
  }

  /// Membership v in d phi(u), tolerant to u lying within tol of a knot or bound.
  bool in_subdifferential(double u, double v, double tol) const {
    if (!domain_.contains(u, tol)) return false;
    const double uc = domain_.clamp(u);
    Interval hull{kInf, -kInf};
    auto merge = [&](const Interval& i) {
      hull.lo = std::min(hull.lo, i.lo);
      hull.hi = std::max(hull.hi, i.hi);
    };
    if (auto s = subdifferential(uc)) merge(*s);
    for (double t : knots_) {
      if (std::abs(t - uc) <= tol) merge(*subdifferential(t));
    }
    if (std::isfinite(domain_.lo) && std::abs(uc - domain_.lo) <= tol) merge(*subdifferential(domain_.lo));
    if (std::isfinite(domain_.hi) && std::abs(uc - domain_.hi) <= tol) merge(*subdifferential(domain_.hi));
    const double scale = tol * (1.0 + std::abs(v));
    return v >= hull.lo - scale && v <= hull.hi + scale;
  }

  /// prox_{lambda phi}(x) = argmin_u phi(u) + (u - x)^2 / (2 lambda).
  /// Each piece contributes its clamped stationary point; the best candidate is exact.
  double prox(double lambda, double x) const {
    if (point_domain()) return domain_.lo;
    double best = 0.0;
    double best_obj = kInf;
    for (std::size_t i = 0; i < pieces_.size(); ++i) {
      const auto [a, b] = piece_bounds(i);
      const double stationary = (x - lambda * pieces_[i].lin) / (1.0 + lambda * pieces_[i].quad);
      const double u = std::min(std::max(stationary, a), b);
      if (!std::isfinite(u)) continue;
      const double obj = 0.5 * (u - x) * (u - x) + lambda * piece_value(i, u);
      if (obj < best_obj) {
        best_obj = obj;
        best = u;
      }
    }
    if (!std::isfinite(best_obj) || !in_subdifferential(best, (x - best) / lambda, 1e-8)) {
      throw Error(ErrorCode::UnsupportedKind, "PLQ resolvent did not converge (malformed descriptor)");
    }
    return best;
  }

  /// argmin phi as an interval; nullopt when phi has no minimizer.
  std::optional<Interval> argmin() const {
    if (point_domain()) return Interval{domain_.lo, domain_.hi};
    double lo = kInf;
    double hi = -kInf;
    auto add = [&](double a, double b) {
      lo = std::min(lo, a);
      hi = std::max(hi, b);
    };
    for (std::size_t i = 0; i < pieces_.size(); ++i) {
      const auto [a, b] = piece_bounds(i);
      const auto& p = pieces_[i];
      if (p.quad > 0.0) {
        const double u = -p.lin / p.quad;
        if (u >= a && u <= b) add(u, u);
      } else if (p.lin == 0.0) {
        add(a, b);
      }
    }
    for (std::size_t j = 0; j < knots_.size(); ++j) {
      const auto s = *subdifferential(knots_[j]);
      if (s.lo <= 0.0 && s.hi >= 0.0) add(knots_[j], knots_[j]);
    }
    if (std::isfinite(domain_.lo) && subdifferential(domain_.lo)->hi >= 0.0) add(domain_.lo, domain_.lo);
    if (std::isfinite(domain_.hi) && subdifferential(domain_.hi)->lo <= 0.0) add(domain_.hi, domain_.hi);
    if (lo > hi) return std::nullopt;
    return Interval{lo, hi};
  }

  /// Smallest curvature over pieces; +inf for a point domain.
  double min_curvature() const {
    if (point_domain()) return kInf;
    double m = kInf;
    for (const auto& p : pieces_) m = std::min(m, p.quad);
    return m;
  }

  /// Lipschitz constant of the derivative when phi is differentiable on all of R.
  std::optional<double> derivative_lipschitz() const {
    if (std::isfinite(domain_.lo) || std::isfinite(domain_.hi)) return std::nullopt;
    for (std::size_t j = 0; j < knots_.size(); ++j) {
      const auto s = *subdifferential(knots_[j]);
      if (s.hi - s.lo > 1e-14 * (1.0 + std::abs(s.lo))) return std::nullopt;
    }
    double l = 0.0;
    for (const auto& p : pieces_) l = std::max(l, p.quad);
    return l;
  }

  /// The same function written in the variable z = x - shift.
  Plq1d shifted(double shift) const {
    std::vector<double> knots = knots_;
    for (auto& k : knots) k -= shift;
    std::vector<Piece> pieces = pieces_;
    for (auto& p : pieces) p.lin += p.quad * shift;
    const double c0 = 0.5 * pieces_[0].quad * shift * shift + pieces_[0].lin * shift + constants_[0];
    return make(domain_.lo - shift, domain_.hi - shift, std::move(knots), std::move(pieces), c0);
  }

  /// Draws a point of the domain inside `box`, sometimes snapped to a knot or bound
  /// so that set-valued parts of the graph get exercised.
  template <class Rng>
  std::optional<double> sample_point(const Interval& box, Rng& rng) const {
    const Interval live{std::max(box.lo, domain_.lo), std::min(box.hi, domain_.hi)};
    if (live.lo > live.hi) return std::nullopt;
    if (live.lo == live.hi) return live.lo;
    std::vector<double> specials;
    for (double k : knots_) {
      if (live.contains(k)) specials.push_back(k);
    }
    if (domain_.lo == live.lo) specials.push_back(live.lo);
    if (domain_.hi == live.hi) specials.push_back(live.hi);
    if (!specials.empty() && rng.uniform() < 0.25) return specials[rng.below(specials.size())];
    return rng.uniform(live.lo, live.hi);
  }

 private:
  std::size_t piece_index(double x) const {
    const auto it = std::upper_bound(knots_.begin(), knots_.end(), x);
    return static_cast<std::size_t>(it - knots_.begin());
  }
  std::pair<double, double> piece_bounds(std::size_t i) const {
    const double a = i == 0 ? domain_.lo : knots_[i - 1];
    const double b = i == knots_.size() ? domain_.hi : knots_[i];
    return {a, b};
  }
  double derivative(std::size_t i, double x) const { return pieces_[i].quad * x + pieces_[i].lin; }
  double piece_value(std::size_t i, double x) const {
    return 0.5 * pieces_[i].quad * x * x + pieces_[i].lin * x + constants_[i];
  }

  Interval domain_;
  std::vector<double> knots_;
  std::vector<Piece> pieces_;
  std::vector<double> constants_;
};

}  // namespace msdi
