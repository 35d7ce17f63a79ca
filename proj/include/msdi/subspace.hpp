#pragma once

#include <vector>

#include "msdi/operator_ops.hpp"

namespace msdi {

/// Anchor u0 in dom A and an orthonormal row basis of L = span(dom A - dom A).
struct SubspaceInfo {
  Vector anchor;
  Matrix basis;  // k x d

  Index dim_L() const { return basis.rows(); }
  Index dim() const { return basis.cols(); }

  /// Pi = basis^T basis.
  Matrix projector() const { return basis.transpose() * basis; }

  Vector to_reduced(const Vector& x) const { return basis * (x - anchor); }
  Vector lift(const Vector& z) const { return anchor + basis.transpose() * z; }
  Vector tangential(const Vector& v) const { return basis.transpose() * (basis * v); }
};

namespace detail {
inline Matrix coordinate_rows(const std::vector<Index>& free, Index d) {
  Matrix b = Matrix::Zero(static_cast<Index>(free.size()), d);
  for (std::size_t r = 0; r < free.size(); ++r) b(static_cast<Index>(r), free[r]) = 1.0;
  return b;
}
}  // namespace detail

/// Catalog-declared affine hull of dom A.
inline SubspaceInfo domain_subspace(const OperatorSpec& op) {
  const Index d = op.dim();
  return std::visit(
      detail::overloaded{
          [&](const LinearKind&) { return SubspaceInfo{Vector::Zero(d), Matrix::Identity(d, d)}; },
          [&](const SeparablePlqKind& k) {
            Vector anchor(d);
            std::vector<Index> free;
            for (Index i = 0; i < d; ++i) {
              const auto& c = k.coords[static_cast<std::size_t>(i)];
              anchor(i) = c.domain().clamp(0.0);
              if (!c.point_domain()) free.push_back(i);
            }
            return SubspaceInfo{anchor, detail::coordinate_rows(free, d)};
          },
          [&](const AffineNormalConeKind& k) { return SubspaceInfo{k.set.point, k.set.basis}; },
          [&](const RestrictedQuadraticKind& k) { return SubspaceInfo{k.core.set.point, k.core.set.basis}; },
          [&](const SumKind& k) { return SubspaceInfo{k.core.set.point, k.core.set.basis}; },
          [&](const ShiftedKind& k) {
            SubspaceInfo in = domain_subspace(*k.inner);
            in.anchor += k.shift;
            return in;
          },
          [&](const ScaledKind& k) { return domain_subspace(*k.inner); },
      },
      op.kind());
}

namespace detail {
inline bool same_span(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
  if (a.rows() == 0) return true;
  return (a - a * b.transpose() * b).cwiseAbs().maxCoeff() <= 1e-10;
}

inline OperatorSpec reduce_impl(const OperatorSpec& op, const SubspaceInfo& info) {
  const Matrix& B = info.basis;
  const Vector& u0 = info.anchor;
  const Index k = B.rows();
  auto constrained = [&](const ConstrainedLinear& c) {
    if (!same_span(B, c.set.basis)) throw Error(ErrorCode::ReductionUnsupported, "basis does not span the affine hull");
    return OperatorSpec::linear(B * c.Q * B.transpose(), B * (c.Q * u0 + c.b));
  };
  return std::visit(
      overloaded{
          [&](const LinearKind& l) { return OperatorSpec::linear(B * l.Q * B.transpose(), B * (l.Q * u0 + l.b)); },
          [&](const SeparablePlqKind& l) {
            std::vector<Plq1d> coords;
            Index row = 0;
            for (Index i = 0; i < op.dim(); ++i) {
              const auto& c = l.coords[static_cast<std::size_t>(i)];
              if (c.point_domain()) continue;
              if (row >= k || std::abs(B(row, i) - 1.0) > 1e-12 || std::abs(B.row(row).norm() - 1.0) > 1e-12) {
                throw Error(ErrorCode::ReductionUnsupported, "PLQ reduction needs the coordinate basis");
              }
              coords.push_back(c.shifted(u0(i)));
              ++row;
            }
            return OperatorSpec::separable_plq(std::move(coords));
          },
          [&](const AffineNormalConeKind& c) {
            if (!same_span(B, c.set.basis)) throw Error(ErrorCode::ReductionUnsupported, "basis does not span the affine hull");
            return OperatorSpec::linear(Matrix::Zero(k, k), Vector::Zero(k));
          },
          [&](const RestrictedQuadraticKind& c) { return constrained(c.core); },
          [&](const SumKind& c) { return constrained(c.core); },
          [&](const ShiftedKind& s) {
            SubspaceInfo inner{u0 - s.shift, B};
            return reduce_impl(*s.inner, inner);
          },
          [&](const ScaledKind& s) { return OperatorSpec::scaled(reduce_impl(*s.inner, info), s.factor); },
      },
      op.kind());
}
}  // namespace detail

/// T(z) = basis A(anchor + basis^T z) on R^{dim_L}.
inline OperatorSpec reduce_operator(const OperatorSpec& op, const SubspaceInfo& info) {
  if (info.anchor.size() != op.dim() || info.basis.cols() != op.dim()) {
    throw Error(ErrorCode::ReductionUnsupported, "subspace info has the wrong ambient dimension");
  }
  if (info.dim_L() == 0) throw Error(ErrorCode::ReductionUnsupported, "domain is a single point");
  const SubspaceInfo declared = domain_subspace(op);
  if (!detail::same_span(info.basis, declared.basis) || !in_domain(op, info.anchor)) {
    throw Error(ErrorCode::ReductionUnsupported, "subspace info was not produced from this operator");
  }
  return detail::reduce_impl(op, info);
}

/// Points whose affine hull is the affine hull of dom A: the anchor and anchor + each basis row.
inline std::vector<Vector> domain_generators(const OperatorSpec& op) {
  const SubspaceInfo info = domain_subspace(op);
  std::vector<Vector> g{info.anchor};
  for (Index r = 0; r < info.dim_L(); ++r) g.push_back(info.anchor + info.basis.row(r).transpose());
  return g;
}

}  // namespace msdi
