#pragma once

#include "mvbss/common.hpp"

#include <algorithm>
#include <limits>
#include <utility>

namespace mvbss {

// Eigenvalues at or below this floor are treated as numerically zero rank.
inline constexpr double kEigenvalueFloor = 1e-12;

// Dimension-retention policy for whitening: keep a fixed count, keep enough
// leading components to explain a variance fraction, or keep full rank.
class Retain {
 public:
  static Retain dims(Index count) {
    require(count >= 1, "Retain::dims: count must be >= 1");
    Retain r;
    r.count_ = count;
    return r;
  }
  static Retain variance(double fraction) {
    require(fraction > 0.0 && fraction <= 1.0,
            "Retain::variance: fraction must be in (0, 1]");
    Retain r;
    r.fraction_ = fraction;
    return r;
  }
  static Retain all() { return Retain{}; }

  // Resolves the retained dimension given eigenvalues sorted descending.
  Index resolve(const Vector& eigenvalues) const {
    const Index p = eigenvalues.size();
    Index usable = 0;
    while (usable < p && eigenvalues[usable] > kEigenvalueFloor) ++usable;
    if (count_ > 0) {
      require(count_ <= p, "whitening: requested dimension exceeds features");
      if (count_ > usable)
        throw ValidationError(
            "whitening: rank deficiency below requested dimension "
            "(eigenvalue <= 1e-12)");
      return count_;
    }
    if (fraction_ > 0.0) {
      if (usable == 0)
        throw ValidationError("whitening: input has no usable variance");
      const double total = eigenvalues.sum();
      double cum = 0.0;
      for (Index i = 0; i < usable; ++i) {
        cum += eigenvalues[i];
        if (cum / total >= fraction_ - 1e-15) return i + 1;
      }
      return usable;
    }
    if (usable == 0)
      throw ValidationError("whitening: input has no usable variance");
    return usable;
  }

 private:
  Retain() = default;
  Index count_ = 0;
  double fraction_ = 0.0;
};

// Affine map z = K (x - mean) that decorrelates a view and scales it to unit
// variance, together with its right inverse K+ (K K+ = I on the retained
// subspace).  The sample covariance uses the 1/N convention, so whitened
// training data satisfies Z Z^T / N = I exactly.
class WhiteningTransform {
 public:
  WhiteningTransform(Matrix forward, Matrix inverse, Vector mean,
                     Vector eigenvalues)
      : forward_(std::move(forward)),
        inverse_(std::move(inverse)),
        mean_(std::move(mean)),
        eigenvalues_(std::move(eigenvalues)) {
    require(forward_.cols() == mean_.size() && inverse_.rows() == mean_.size(),
            "WhiteningTransform: inconsistent feature dimension");
    require(forward_.rows() == inverse_.cols(),
            "WhiteningTransform: inconsistent retained dimension");
    require(forward_.rows() >= 1 && forward_.rows() <= forward_.cols(),
            "WhiteningTransform: retained dimension out of range");
    require(all_finite(forward_) && all_finite(inverse_) && mean_.allFinite(),
            "WhiteningTransform: non-finite entries");
    const double id_err =
        max_abs(Matrix(forward_ * inverse_) -
                Matrix::Identity(forward_.rows(), forward_.rows()));
    require(id_err <= 1e-8,
            "WhiteningTransform: forward * inverse deviates from identity");
  }

  const Matrix& forward() const { return forward_; }
  const Matrix& inverse() const { return inverse_; }
  const Vector& mean() const { return mean_; }
  const Vector& eigenvalues() const { return eigenvalues_; }
  Index input_dim() const { return forward_.cols(); }
  Index retained_dim() const { return forward_.rows(); }

  // Maps a features x samples view into whitened coordinates.  Accepts zero
  // columns (returns an empty whitened block of matching shape).
  Matrix apply(const Matrix& view) const {
    require(view.rows() == input_dim(),
            "apply_whitening: view has wrong feature dimension");
    return forward_ * (view.colwise() - mean_);
  }

  // Maps whitened coordinates back to the data space: K+ z + mean.
  Matrix reconstruct(const Matrix& z) const {
    require(z.rows() == retained_dim(),
            "whitening reconstruct: wrong whitened dimension");
    return (inverse_ * z).colwise() + mean_;
  }

 private:
  Matrix forward_;   // K, retained x features
  Matrix inverse_;   // K+, features x retained
  Vector mean_;
  Vector eigenvalues_;  // all covariance eigenvalues, descending
};

namespace detail {

// Fixes the sign of each eigenvector column so its largest-magnitude entry is
// positive (first such entry on ties), removing the eigendecomposition's sign
// ambiguity deterministically.
inline void fix_eigenvector_signs(Matrix& vectors) {
  for (Index j = 0; j < vectors.cols(); ++j) {
    Index arg = 0;
    double best = -1.0;
    for (Index i = 0; i < vectors.rows(); ++i) {
      const double a = std::abs(vectors(i, j));
      if (a > best) {
        best = a;
        arg = i;
      }
    }
    if (vectors(arg, j) < 0.0) vectors.col(j) = -vectors.col(j);
  }
}

}  // namespace detail

// PCA whitening of one view (features x samples, at least 2 samples).
inline WhiteningTransform fit_whitening(const Matrix& view,
                                        const Retain& retain = Retain::all()) {
  require(view.rows() >= 1, "fit_whitening: view must have >= 1 feature");
  require(view.cols() >= 2, "fit_whitening: view must have >= 2 samples");
  require(all_finite(view), "fit_whitening: non-finite entries in view");

  const Index n = view.cols();
  const Vector mean = view.rowwise().mean();
  const Matrix centered = view.colwise() - mean;
  const Matrix cov = centered * centered.transpose() / static_cast<double>(n);

  Eigen::SelfAdjointEigenSolver<Matrix> eig(cov);
  if (eig.info() != Eigen::Success)
    throw NumericalError("fit_whitening: eigendecomposition failed");

  // SelfAdjointEigenSolver sorts ascending; flip to descending.
  Vector values = eig.eigenvalues().reverse();
  Matrix vectors = eig.eigenvectors().rowwise().reverse();
  values = values.cwiseMax(0.0);  // clamp tiny negative round-off
  detail::fix_eigenvector_signs(vectors);

  const Index r = retain.resolve(values);
  const Vector scale = values.head(r).cwiseSqrt();
  Matrix forward = vectors.leftCols(r).transpose();
  Matrix inverse = vectors.leftCols(r);
  forward.array().colwise() /= scale.array();
  inverse.array().rowwise() *= scale.transpose().array();
  return WhiteningTransform(std::move(forward), std::move(inverse), mean,
                            values);
}

inline Matrix apply_whitening(const WhiteningTransform& t, const Matrix& view) {
  return t.apply(view);
}

}  // namespace mvbss
