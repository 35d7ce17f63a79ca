#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "msdi/error.hpp"

namespace msdi {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Affine membership tolerance, applied as ||Cx - d||_inf.
inline constexpr double kDomainTol = 1e-9;

inline bool is_symmetric(const Matrix& m, double tol = 1e-12) {
  if (m.rows() != m.cols()) return false;
  return (m - m.transpose()).cwiseAbs().maxCoeff() <= tol * (1.0 + m.cwiseAbs().maxCoeff());
}

inline Matrix symmetric_part(const Matrix& m) { return 0.5 * (m + m.transpose()); }

/// Smallest eigenvalue of a symmetric matrix (0 for an empty matrix).
inline double min_eigenvalue(const Matrix& sym) {
  if (sym.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Matrix> es(sym, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

/// Smallest eigenvalue above `tol`; nullopt when every eigenvalue is below it.
inline std::optional<double> min_positive_eigenvalue(const Matrix& sym, double tol = 1e-12) {
  if (sym.size() == 0) return std::nullopt;
  Eigen::SelfAdjointEigenSolver<Matrix> es(sym, Eigen::EigenvaluesOnly);
  std::optional<double> best;
  for (Index i = 0; i < es.eigenvalues().size(); ++i) {
    const double e = es.eigenvalues()(i);
    if (e > tol && (!best || e < *best)) best = e;
  }
  return best;
}

inline double spectral_norm(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  Eigen::JacobiSVD<Matrix> svd(m);
  return svd.singularValues()(0);
}

/// Orthonormalizes the rows of `rows` by modified Gram-Schmidt with one
/// reorthogonalization pass. Rows that become numerically dependent are dropped.
/// Each kept row is sign-normalized so its first significant entry is positive.
inline Matrix orthonormalize_rows(const Matrix& rows, double tol = 1e-10) {
  std::vector<Vector> kept;
  for (Index i = 0; i < rows.rows(); ++i) {
    Vector v = rows.row(i).transpose();
    const double scale = std::max(1.0, v.norm());
    for (int pass = 0; pass < 2; ++pass) {
      for (const auto& q : kept) v -= q.dot(v) * q;
    }
    const double n = v.norm();
    if (n <= tol * scale) continue;
    v /= n;
    for (Index j = 0; j < v.size(); ++j) {
      if (std::abs(v(j)) > 1e-14) {
        if (v(j) < 0) v = -v;
        break;
      }
    }
    // Entries at rounding level are flushed so that coordinate-aligned bases stay exact.
    for (Index j = 0; j < v.size(); ++j) {
      if (std::abs(v(j)) < 1e-15) v(j) = 0.0;
    }
    v /= v.norm();
    kept.push_back(std::move(v));
  }
  Matrix out(static_cast<Index>(kept.size()), rows.cols());
  for (std::size_t i = 0; i < kept.size(); ++i) out.row(static_cast<Index>(i)) = kept[i].transpose();
  return out;
}

/// Orthonormal row basis (k x d) of the null space of `c` (m x d).
inline Matrix null_space_rows(const Matrix& c, Index dim) {
  if (c.rows() == 0) return Matrix::Identity(dim, dim);
  Eigen::FullPivLU<Matrix> lu(c);
  lu.setThreshold(1e-12);
  const Matrix kernel = lu.kernel();  // d x k (a single zero column when full rank)
  if (lu.rank() == dim) return Matrix(0, dim);
  return orthonormalize_rows(kernel.transpose());
}

/// Minimum-norm least-squares solution of c x = d.
inline Vector min_norm_solution(const Matrix& c, const Vector& d) {
  if (c.rows() == 0) return Vector::Zero(c.cols());
  Eigen::CompleteOrthogonalDecomposition<Matrix> cod(c);
  cod.setThreshold(1e-12);
  return cod.solve(d);
}

/// The affine set {x : C x = d} described by a feasible point and an
/// orthonormal row basis of its direction space.
struct AffineSet {
  Matrix C;
  Vector d;
  Vector point;  // minimum-norm feasible point
  Matrix basis;  // k x dim, orthonormal rows spanning null(C)

  static AffineSet from_constraints(const Matrix& c, const Vector& rhs) {
    if (c.rows() != rhs.size()) {
      throw Error(ErrorCode::InvalidArgument, "constraint matrix and right-hand side disagree in size");
    }
    AffineSet s;
    s.C = c;
    s.d = rhs;
    s.point = min_norm_solution(c, rhs);
    if (c.rows() > 0 && (c * s.point - rhs).cwiseAbs().maxCoeff() > kDomainTol * (1.0 + rhs.cwiseAbs().maxCoeff())) {
      throw Error(ErrorCode::InvalidArgument, "affine constraints C x = d are inconsistent");
    }
    for (Index j = 0; j < s.point.size(); ++j) {
      if (std::abs(s.point(j)) < 1e-15) s.point(j) = 0.0;
    }
    s.basis = null_space_rows(c, c.cols());
    return s;
  }

  Index dim() const { return C.cols(); }

  Vector project(const Vector& x) const {
    if (basis.rows() == 0) return point;
    return point + basis.transpose() * (basis * (x - point));
  }

  bool contains(const Vector& x, double tol = kDomainTol) const {
    if (C.rows() == 0) return true;
    return (C * x - d).cwiseAbs().maxCoeff() <= tol * (1.0 + x.cwiseAbs().maxCoeff());
  }

  /// Component of v inside the direction space, i.e. the part the normal cone cannot absorb.
  Vector tangential(const Vector& v) const {
    if (basis.rows() == 0) return Vector::Zero(v.size());
    return basis.transpose() * (basis * v);
  }
};

}  // namespace msdi
