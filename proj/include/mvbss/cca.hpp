#pragma once

#include "mvbss/common.hpp"
#include "mvbss/rng.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <utility>
#include <vector>

namespace mvbss {

struct InitResult {
  std::vector<Matrix> initial_unmixing;  // square orthogonal, one per view
  Vector canonical_correlations;         // length min_d r_d, descending
};

namespace detail {

// Largest-magnitude entry of a column (first index on ties).
inline Index dominant_index(const Eigen::Ref<const Vector>& v) {
  Index arg = 0;
  double best = -1.0;
  for (Index i = 0; i < v.size(); ++i) {
    const double a = std::abs(v[i]);
    if (a > best) {
      best = a;
      arg = i;
    }
  }
  return arg;
}

// Completes r x m orthonormal columns to a square orthogonal matrix.  The
// complement comes from QR of a seeded random block projected against the
// leading columns, so the result is deterministic.
inline Matrix complete_orthogonal(const Matrix& q, std::uint64_t seed) {
  const Index r = q.rows();
  const Index m = q.cols();
  if (m == r) return q;
  Rng rng = Rng::stream(seed, 0xC0FFEE);
  Matrix block(r, r);
  block.leftCols(m) = q;
  block.rightCols(r - m) = rng.normal_matrix(r, r - m);
  // Positive-diagonal QR reproduces the leading orthonormal columns exactly
  // and fills the rest with an orthonormal complement.
  Matrix full = qr_orthonormalize(block);
  if (max_abs(Matrix(full.leftCols(m) - q)) > 1e-8)
    throw NumericalError("cca_initialize: orthogonal completion failed");
  return full;
}

}  // namespace detail

inline constexpr std::uint64_t kDefaultCompletionSeed = 0x5eedULL;

// Correlation-ordered orthogonal starting points from whitened views.
//
// Two views: full SVD of the cross-correlation Z1 Z2^T / N; the left/right
// singular bases (rows) are the canonical directions.  More views: the
// stacked covariance of Y = [Z1; ...; ZD] is eigendecomposed, the per-view
// blocks of the top eigenvectors are orthonormalized into leading rows, and
// the eigenvalues map to generalized correlations (lambda - 1) / (D - 1).
// Sign ambiguity is fixed by making each direction's dominant loading
// positive (jointly across a pair for the two-view case, preserving the
// sign of the correlation).
inline InitResult cca_initialize(const std::vector<Matrix>& whitened_views,
                                 std::uint64_t completion_seed =
                                     kDefaultCompletionSeed) {
  const std::size_t nviews = whitened_views.size();
  require(nviews >= 2, "cca_initialize: need at least two views");
  const Index n = whitened_views[0].cols();
  require(n >= 2, "cca_initialize: need at least two samples");
  Index min_r = whitened_views[0].rows();
  for (const Matrix& z : whitened_views) {
    require(z.cols() == n, "cca_initialize: views differ in sample count");
    require(z.rows() >= 1, "cca_initialize: empty view");
    min_r = std::min(min_r, z.rows());
    const Matrix cov = z * z.transpose() / static_cast<double>(n);
    if (max_abs(cov - Matrix::Identity(z.rows(), z.rows())) > 1e-3)
      throw ValidationError(
          "cca_initialize: views must be whitened (covariance far from "
          "identity)");
  }

  InitResult result;
  if (nviews == 2) {
    const Matrix& z1 = whitened_views[0];
    const Matrix& z2 = whitened_views[1];
    const Matrix cross = z1 * z2.transpose() / static_cast<double>(n);
    Eigen::JacobiSVD<Matrix> svd(cross,
                                 Eigen::ComputeFullU | Eigen::ComputeFullV);
    Matrix u = svd.matrixU();
    Matrix v = svd.matrixV();
    for (Index j = 0; j < u.cols(); ++j) {
      if (u(detail::dominant_index(u.col(j)), j) < 0.0) {
        u.col(j) = -u.col(j);
        if (j < v.cols()) v.col(j) = -v.col(j);  // keep the pair consistent
      }
    }
    for (Index j = u.cols(); j < v.cols(); ++j) {
      if (v(detail::dominant_index(v.col(j)), j) < 0.0) v.col(j) = -v.col(j);
    }
    result.initial_unmixing.push_back(u.transpose());
    result.initial_unmixing.push_back(v.transpose());
    result.canonical_correlations =
        svd.singularValues().head(min_r).cwiseMin(1.0).cwiseMax(-1.0);
  } else {
    Index total = 0;
    for (const Matrix& z : whitened_views) total += z.rows();
    Matrix y(total, n);
    Index row = 0;
    for (const Matrix& z : whitened_views) {
      y.middleRows(row, z.rows()) = z;
      row += z.rows();
    }
    const Matrix gram = y * y.transpose() / static_cast<double>(n);
    Eigen::SelfAdjointEigenSolver<Matrix> eig(gram);
    if (eig.info() != Eigen::Success)
      throw NumericalError("cca_initialize: eigendecomposition failed");
    // Ascending eigenvalues; take the top min_r, descending.
    Matrix top(total, min_r);
    Vector lambda(min_r);
    for (Index j = 0; j < min_r; ++j) {
      Vector v = eig.eigenvectors().col(total - 1 - j);
      if (v[detail::dominant_index(v)] < 0.0) v = -v;
      top.col(j) = v;
      lambda[j] = eig.eigenvalues()[total - 1 - j];
    }
    const double dcount = static_cast<double>(nviews);
    result.canonical_correlations =
        ((lambda.array() - 1.0) / (dcount - 1.0)).cwiseMin(1.0).cwiseMax(-1.0);
    row = 0;
    for (const Matrix& z : whitened_views) {
      // Orthonormalize this view's block of the top eigenvectors; QR keeps
      // the correlation ordering of the leading directions.
      const Matrix q = qr_orthonormalize(top.middleRows(row, z.rows()));
      result.initial_unmixing.push_back(
          detail::complete_orthogonal(q, completion_seed).transpose());
      row += z.rows();
    }
  }

  for (const Matrix& w : result.initial_unmixing) {
    if (orthogonality_error(w) > 1e-8)
      throw NumericalError("cca_initialize: initializer is not orthogonal");
  }
  return result;
}

}  // namespace mvbss
