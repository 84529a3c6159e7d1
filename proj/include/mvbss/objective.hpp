#pragma once

#include "mvbss/common.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

namespace mvbss {

// Source log-density surrogate applied entrywise to recovered sources.
enum class Nonlinearity { kLogCosh, kGauss };

inline std::string to_string(Nonlinearity n) {
  return n == Nonlinearity::kLogCosh ? "logcosh" : "gauss";
}

inline Nonlinearity nonlinearity_from_string(const std::string& s) {
  if (s == "logcosh") return Nonlinearity::kLogCosh;
  if (s == "gauss") return Nonlinearity::kGauss;
  throw ValidationError("unknown nonlinearity: " + s);
}

struct GValue {
  double value;
  double derivative;
};

// g(s) and g'(s) for a single entry.  logcosh: g = -log cosh(s), evaluated
// overflow-safely; gauss: g = exp(-s^2/2).
inline GValue nonlinearity_g(double s, Nonlinearity kind) {
  if (kind == Nonlinearity::kLogCosh) {
    const double t = std::tanh(s);
    // Overflow-safe: log cosh(s) = |s| + log(1 + e^{-2|s|}) - log 2.
    const double a = std::abs(s);
    return {-(a + std::log1p(std::exp(-2.0 * a)) - std::numbers::ln2_v<double>),
            -t};
  }
  const double e = std::exp(-0.5 * s * s);
  return {e, -s * e};
}

// Configuration of the coupled objective over whitened views.
struct ObjectiveConfig {
  Index shared_count = 0;        // c: number of leading shared rows
  double lambda = 1.0;           // coupling strength, > 0
  Nonlinearity nonlinearity = Nonlinearity::kLogCosh;

  void validate(Index min_rank) const {
    require(shared_count >= 0, "objective: shared_count must be >= 0");
    require(shared_count <= min_rank,
            "objective: shared_count exceeds smallest view dimension");
    require(lambda > 0.0, "objective: lambda must be positive");
  }
};

// Recovered sources for each view plus the cross-view mean of the shared
// block.  z[d] is r_d x N; rows [0, shared_count) are the shared estimates.
struct SourceEstimates {
  std::vector<Matrix> z;
  Index shared_count = 0;
  Matrix shared_mean;  // shared_count x N

  Eigen::Block<const Matrix> shared(std::size_t d) const {
    return z[d].topRows(shared_count);
  }
  Eigen::Block<const Matrix> individual(std::size_t d) const {
    return z[d].bottomRows(z[d].rows() - shared_count);
  }
};

namespace detail {

inline void check_objective_inputs(const std::vector<Matrix>& weights,
                                   const std::vector<Matrix>& views,
                                   const ObjectiveConfig& cfg) {
  require(!views.empty() && weights.size() == views.size(),
          "objective: need one square weight matrix per view");
  Index min_rank = views[0].rows();
  const Index n = views[0].cols();
  require(n >= 1, "objective: views must have >= 1 sample");
  for (std::size_t d = 0; d < views.size(); ++d) {
    require(weights[d].rows() == weights[d].cols() &&
                weights[d].rows() == views[d].rows(),
            "objective: weight/view dimension mismatch");
    require(views[d].cols() == n, "objective: views differ in sample count");
    min_rank = std::min(min_rank, views[d].rows());
    require(orthogonality_error(weights[d]) <= 1e-4,
            "objective: weights must have orthonormal rows");
  }
  cfg.validate(min_rank);
}

// Entrywise sum of g over a matrix; optionally writes g' to `dg`.  For
// logcosh the identity -log cosh(s) = -|s| + log1p(|tanh s|) (from
// e^{-2|s|} = (1-|t|)/(1+|t|)) lets value and derivative share one tanh.
inline double g_sum_and_derivative(const Matrix& s, Nonlinearity kind,
                                   Matrix* dg) {
  if (kind == Nonlinearity::kLogCosh) {
    const Eigen::ArrayXXd t = s.array().tanh();
    if (dg) *dg = -t.matrix();
    return (t.abs().log1p() - s.array().abs()).sum();
  }
  const Eigen::ArrayXXd e = (-0.5 * s.array().square()).exp();
  if (dg) *dg = (-s.array() * e).matrix();
  return e.sum();
}

}  // namespace detail

// Recovers sources z_d = W_d X_d and the shared-block mean.
inline SourceEstimates recover_sources(const std::vector<Matrix>& weights,
                                       const std::vector<Matrix>& views,
                                       const ObjectiveConfig& cfg) {
  detail::check_objective_inputs(weights, views, cfg);
  SourceEstimates est;
  est.shared_count = cfg.shared_count;
  est.z.reserve(views.size());
  for (std::size_t d = 0; d < views.size(); ++d)
    est.z.push_back(weights[d] * views[d]);
  est.shared_mean = Matrix::Zero(cfg.shared_count, views[0].cols());
  for (const Matrix& z : est.z) est.shared_mean += z.topRows(cfg.shared_count);
  est.shared_mean /= static_cast<double>(views.size());
  return est;
}

// Negated penalized log-likelihood over whitened views (lower is better):
//   F(W) = - sum_entries g(shared_mean)
//          - sum_d sum_entries g(individual_d)
//          - lambda/(2 D) * || sum_d shared_d ||_F^2 / 1
// where shared_d is the leading shared_count x N block of W_d X_d.  When
// `grad` is non-null it receives the Euclidean gradient dF/dW_d, reusing the
// source recovery shared with the value (a fused evaluation).
inline double evaluate_with_gradient(const std::vector<Matrix>& weights,
                                     const std::vector<Matrix>& views,
                                     const ObjectiveConfig& cfg,
                                     std::vector<Matrix>* grad,
                                     SourceEstimates* sources = nullptr) {
  SourceEstimates est = recover_sources(weights, views, cfg);
  const std::size_t nviews = views.size();
  const double dcount = static_cast<double>(nviews);
  const Index c = cfg.shared_count;

  // Sum of shared blocks, reused by both the coupling value and gradient.
  Matrix shared_sum = est.shared_mean * dcount;

  Matrix d_shared;  // g' over the shared mean
  double value = -detail::g_sum_and_derivative(
      est.shared_mean, cfg.nonlinearity, grad ? &d_shared : nullptr);
  value -= cfg.lambda / (2.0 * dcount) * shared_sum.squaredNorm();

  if (grad) {
    grad->assign(nviews, Matrix());
    // Shared rows of every view receive the same contribution.
    const Matrix m_shared = -(d_shared / dcount) -
                            (cfg.lambda / dcount) * shared_sum;
    for (std::size_t d = 0; d < nviews; ++d) {
      const Index r = views[d].rows();
      Matrix m(r, views[d].cols());
      m.topRows(c) = m_shared;
      Matrix d_ind;
      value -= detail::g_sum_and_derivative(est.z[d].bottomRows(r - c),
                                            cfg.nonlinearity, &d_ind);
      m.bottomRows(r - c) = -d_ind;
      (*grad)[d].noalias() = m * views[d].transpose();
    }
  } else {
    for (std::size_t d = 0; d < nviews; ++d) {
      const Index r = views[d].rows();
      value -= detail::g_sum_and_derivative(est.z[d].bottomRows(r - c),
                                            cfg.nonlinearity, nullptr);
    }
  }

  if (!std::isfinite(value))
    throw NumericalError("objective: non-finite value");
  if (sources) *sources = std::move(est);
  return value;
}

inline double evaluate(const std::vector<Matrix>& weights,
                       const std::vector<Matrix>& views,
                       const ObjectiveConfig& cfg) {
  return evaluate_with_gradient(weights, views, cfg, nullptr);
}

inline std::vector<Matrix> gradient(const std::vector<Matrix>& weights,
                                    const std::vector<Matrix>& views,
                                    const ObjectiveConfig& cfg) {
  std::vector<Matrix> g;
  evaluate_with_gradient(weights, views, cfg, &g);
  return g;
}

}  // namespace mvbss
