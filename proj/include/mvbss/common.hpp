#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace mvbss {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Filesystem and serialization failures (missing file, malformed CSV/JSON).
class IoError : public Error {
 public:
  explicit IoError(const std::string& msg) : Error(msg) {}
};

// Structurally valid files whose content violates a documented schema.
class SchemaError : public Error {
 public:
  explicit SchemaError(const std::string& msg) : Error(msg) {}
};

// Arguments or data that violate a documented precondition.
class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& msg) : Error(msg) {}
};

// Numerical breakdown: singular systems, non-finite values, divergence.
class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& msg) : Error(msg) {}
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw ValidationError(msg);
}

inline double max_abs(const Matrix& m) {
  return m.size() == 0 ? 0.0 : m.array().abs().maxCoeff();
}

inline bool all_finite(const Matrix& m) { return m.allFinite(); }

// Max-norm deviation of W W^T from the identity; rows are tested, so a
// wide matrix with orthonormal rows also reports zero.
inline double orthogonality_error(const Matrix& w) {
  return max_abs(Matrix(w * w.transpose()) - Matrix::Identity(w.rows(), w.rows()));
}

inline Matrix skew_part(const Matrix& m) { return 0.5 * (m - m.transpose()); }

// Orthonormalizes the columns of `m` via Householder QR, fixing the sign
// ambiguity by making the diagonal of R non-negative.  For square input this
// is the closest deterministic rotation-or-reflection; it preserves the span.
inline Matrix qr_orthonormalize(const Matrix& m) {
  Eigen::HouseholderQR<Matrix> qr(m);
  Matrix q = qr.householderQ() * Matrix::Identity(m.rows(), m.cols());
  Matrix r = qr.matrixQR().topRows(m.cols()).triangularView<Eigen::Upper>();
  for (Index j = 0; j < m.cols(); ++j) {
    if (r(j, j) < 0.0) q.col(j) = -q.col(j);
  }
  return q;
}

// Pearson correlation between two equally sized samples.
inline double pearson_correlation(const Eigen::Ref<const Vector>& a,
                                  const Eigen::Ref<const Vector>& b) {
  require(a.size() == b.size() && a.size() >= 2,
          "pearson_correlation: inputs must have equal length >= 2");
  const double ma = a.mean();
  const double mb = b.mean();
  const Vector ca = a.array() - ma;
  const Vector cb = b.array() - mb;
  const double na = ca.norm();
  const double nb = cb.norm();
  if (na == 0.0 || nb == 0.0)
    throw ValidationError("pearson_correlation: zero-variance input");
  return ca.dot(cb) / (na * nb);
}

}  // namespace mvbss
