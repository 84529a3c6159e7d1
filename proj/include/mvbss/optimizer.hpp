#pragma once

#include "mvbss/common.hpp"

#include <cmath>
#include <complex>
#include <cstdio>
#include <deque>
#include <functional>
#include <limits>
#include <optional>
#include <utility>
#include <vector>

namespace mvbss {

struct LineSearchConfig {
  double c1 = 1e-4;   // sufficient-decrease constant
  double c2 = 0.9;    // curvature constant
  int max_trials = 25;
};

enum class TerminationReason {
  kGradientTolerance,
  kMaxIterations,
  kLineSearchFailure,
  kObjectiveStagnation,
};

inline std::string to_string(TerminationReason r) {
  switch (r) {
    case TerminationReason::kGradientTolerance: return "gradient_tolerance";
    case TerminationReason::kMaxIterations: return "max_iterations";
    case TerminationReason::kLineSearchFailure: return "line_search_failure";
    case TerminationReason::kObjectiveStagnation: return "objective_stagnation";
  }
  return "unknown";
}

struct OptimizerConfig {
  int max_iterations = 500;
  double gradient_tolerance = 1e-7;  // max-norm of the projected gradient
  int lbfgs_memory = 10;
  LineSearchConfig line_search;
  bool verbose = false;
  // Optional soft stop: halt once the relative objective decrease stays below
  // this for a few consecutive iterations (0 disables it).  Useful for cheap
  // exploratory fits such as model-selection sweeps.
  double objective_stagnation_tol = 0.0;

  void validate() const {
    require(max_iterations >= 0, "optimizer: max_iterations must be >= 0");
    require(gradient_tolerance > 0.0,
            "optimizer: gradient_tolerance must be positive");
    require(lbfgs_memory >= 1, "optimizer: lbfgs_memory must be >= 1");
    require(line_search.c1 > 0.0 && line_search.c1 < line_search.c2 &&
                line_search.c2 < 1.0,
            "optimizer: need 0 < c1 < c2 < 1");
    require(line_search.max_trials >= 2,
            "optimizer: line_search.max_trials must be >= 2");
  }
};

struct OptimizerDiagnostics {
  int iterations = 0;
  bool converged = false;
  TerminationReason reason = TerminationReason::kMaxIterations;
  double final_objective = 0.0;
  double final_gradient_norm = 0.0;          // projected-gradient max-norm
  double max_orthogonality_error = 0.0;      // worst drift over the run
  std::vector<double> objective_trace;       // accepted iterates, decreasing
};

struct OptimizeResult {
  std::vector<Matrix> weights;
  OptimizerDiagnostics diagnostics;
};

// Objective callback: returns F(W) and, when `grad` is non-null, writes the
// Euclidean gradient dF/dW_d per view.
using FusedObjective =
    std::function<double(const std::vector<Matrix>&, std::vector<Matrix>*)>;

namespace detail {

// Eigendecomposition of a real skew-symmetric S through the Hermitian matrix
// iS = Q diag(mu) Q^*, so S = Q diag(-i mu) Q^*.
struct SkewEig {
  Eigen::MatrixXcd q;
  Vector mu;
};

inline SkewEig skew_eig(const Matrix& s) {
  Eigen::MatrixXcd h =
      s.cast<std::complex<double>>() * std::complex<double>(0.0, 1.0);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(h);
  if (es.info() != Eigen::Success)
    throw NumericalError("expm: eigendecomposition of skew matrix failed");
  return SkewEig{es.eigenvectors(), es.eigenvalues()};
}

inline Matrix expm_from_eig(const SkewEig& e) {
  Eigen::VectorXcd phase(e.mu.size());
  for (Index j = 0; j < e.mu.size(); ++j)
    phase[j] = std::polar(1.0, -e.mu[j]);  // exp(-i mu_j)
  return (e.q * phase.asDiagonal() * e.q.adjoint()).real();
}

// sin(x)/x with the removable singularity filled in.
inline double sinc(double x) {
  if (std::abs(x) < 1e-8) return 1.0 - x * x / 6.0;
  return std::sin(x) / x;
}

// Pulls the Euclidean sensitivity M = dF/dE (for E = expm(S)) back through
// the exponential's differential at S, returning the unconstrained real
// sensitivity dF/dS.  In the eigenbasis the differential acts entrywise via
// divided differences of exp over eigenvalue pairs lambda = -i mu:
//   psi(l_j, l_k) = exp(-i (mu_j + mu_k) / 2) * sinc((mu_j - mu_k) / 2),
// an expression that is exact and stable for any eigenvalue gap.
inline Matrix dexp_pullback(const SkewEig& e, const Matrix& m) {
  const Index r = m.rows();
  Eigen::MatrixXcd b = e.q.adjoint() * m.transpose() * e.q;
  Eigen::MatrixXcd p(r, r);
  for (Index j = 0; j < r; ++j) {
    for (Index k = 0; k < r; ++k) {
      const std::complex<double> psi =
          std::polar(1.0, -0.5 * (e.mu[j] + e.mu[k])) *
          sinc(0.5 * (e.mu[j] - e.mu[k]));
      p(j, k) = b(k, j) * psi;  // (B^T . Phi) entrywise
    }
  }
  return (e.q.conjugate() * p * e.q.transpose()).real();
}

// Strict-upper-triangle coordinates of per-view skew matrices, flattened
// into one vector.
struct SkewLayout {
  std::vector<Index> dims;
  std::vector<Index> offsets;
  Index total = 0;

  explicit SkewLayout(const std::vector<Matrix>& mats) {
    for (const Matrix& m : mats) {
      offsets.push_back(total);
      dims.push_back(m.rows());
      total += m.rows() * (m.rows() - 1) / 2;
    }
  }

  Matrix unpack(const Vector& theta, std::size_t d) const {
    const Index r = dims[d];
    Matrix s = Matrix::Zero(r, r);
    Index k = offsets[d];
    for (Index i = 0; i < r; ++i) {
      for (Index j = i + 1; j < r; ++j, ++k) {
        s(i, j) = theta[k];
        s(j, i) = -theta[k];
      }
    }
    return s;
  }

  // Writes the strict upper triangle of (grad - grad^T) for view d.
  void pack_skew_gradient(const Matrix& sensitivity, std::size_t d,
                          Vector& out) const {
    const Index r = dims[d];
    Index k = offsets[d];
    for (Index i = 0; i < r; ++i)
      for (Index j = i + 1; j < r; ++j, ++k)
        out[k] = sensitivity(i, j) - sensitivity(j, i);
  }
};

// L-BFGS two-loop recursion over stored displacement/gradient-change pairs.
class LbfgsMemory {
 public:
  explicit LbfgsMemory(int capacity) : capacity_(capacity) {}

  void clear() { pairs_.clear(); }

  void push(Vector s, Vector y) {
    const double sy = s.dot(y);
    if (sy <= 1e-10 * s.norm() * y.norm()) return;  // curvature guard
    if (static_cast<int>(pairs_.size()) == capacity_) pairs_.pop_front();
    pairs_.push_back({std::move(s), std::move(y), 1.0 / sy});
  }

  Vector direction(const Vector& grad) const {
    Vector q = -grad;
    if (pairs_.empty()) return q;
    std::vector<double> alpha(pairs_.size());
    for (std::size_t i = pairs_.size(); i-- > 0;) {
      alpha[i] = pairs_[i].rho * pairs_[i].s.dot(q);
      q -= alpha[i] * pairs_[i].y;
    }
    const auto& last = pairs_.back();
    q *= last.s.dot(last.y) / last.y.squaredNorm();  // gamma scaling
    for (std::size_t i = 0; i < pairs_.size(); ++i) {
      const double beta = pairs_[i].rho * pairs_[i].y.dot(q);
      q += (alpha[i] - beta) * pairs_[i].s;
    }
    return q;
  }

  bool empty() const { return pairs_.empty(); }

 private:
  struct Pair {
    Vector s, y;
    double rho;
  };
  int capacity_;
  std::deque<Pair> pairs_;
};

}  // namespace detail

// Matrix exponential of a skew-symmetric matrix (an orthogonal rotation).
inline Matrix expm_skew(const Matrix& s) {
  require(s.rows() == s.cols(), "expm_skew: matrix must be square");
  require(max_abs(Matrix(s + s.transpose())) <= 1e-12 * (1.0 + max_abs(s)),
          "expm_skew: matrix must be skew-symmetric");
  if (s.rows() == 0) return s;
  return detail::expm_from_eig(detail::skew_eig(s));
}

// Minimizes F over tuples of square orthogonal matrices.  Each view is
// parameterized as W_d = A_d expm(S_d) with S_d skew-symmetric and A_d a
// periodically re-anchored orthogonal base point, giving an unconstrained
// smooth problem solved by L-BFGS with a strong Wolfe line search.  The
// projected (Riemannian) gradient skew(W^T G) decides convergence.
inline OptimizeResult minimize_orthogonal(std::vector<Matrix> initial,
                                          const FusedObjective& objective,
                                          const OptimizerConfig& cfg) {
  cfg.validate();
  require(!initial.empty(), "minimize_orthogonal: no weight matrices");
  for (const Matrix& w : initial) {
    require(w.rows() == w.cols(), "minimize_orthogonal: weights must be square");
    require(orthogonality_error(w) <= 1e-8,
            "minimize_orthogonal: initial weights must be orthogonal");
  }

  const std::size_t nviews = initial.size();
  const detail::SkewLayout layout(initial);
  OptimizerDiagnostics diag;

  std::vector<Matrix> anchor = initial;
  std::vector<Matrix> weights = initial;   // current accepted point
  std::vector<Matrix> eucl_grad(nviews);
  double value = objective(weights, &eucl_grad);
  diag.objective_trace.push_back(value);

  // Projected-gradient max-norm at the current accepted point.
  const auto projected_norm = [&]() {
    double norm = 0.0;
    for (std::size_t d = 0; d < nviews; ++d)
      norm = std::max(
          norm, max_abs(skew_part(weights[d].transpose() * eucl_grad[d])));
    return norm;
  };
  const auto track_drift = [&]() {
    for (const Matrix& w : weights)
      diag.max_orthogonality_error =
          std::max(diag.max_orthogonality_error, orthogonality_error(w));
  };

  track_drift();
  double grad_norm = projected_norm();
  Vector theta = Vector::Zero(layout.total);
  // Coordinate gradient at theta = 0 is just the skew part of A^T G.
  Vector theta_grad(layout.total);
  const auto grad_at_origin = [&]() {
    for (std::size_t d = 0; d < nviews; ++d)
      layout.pack_skew_gradient(anchor[d].transpose() * eucl_grad[d], d,
                                theta_grad);
  };
  grad_at_origin();

  detail::LbfgsMemory memory(cfg.lbfgs_memory);
  int since_anchor = 0;
  int stagnant = 0;

  // Evaluates F and the coordinate gradient at a trial theta; fills the trial
  // weights/Euclidean gradient so an accepted trial can be adopted directly.
  struct Trial {
    double value = std::numeric_limits<double>::infinity();
    Vector grad;
    std::vector<Matrix> weights;
    std::vector<Matrix> eucl_grad;
  };
  const auto eval_trial = [&](const Vector& t) {
    Trial trial;
    trial.weights.resize(nviews);
    trial.eucl_grad.resize(nviews);
    trial.grad.resize(layout.total);
    std::vector<detail::SkewEig> eigs(nviews);
    for (std::size_t d = 0; d < nviews; ++d) {
      eigs[d] = detail::skew_eig(layout.unpack(t, d));
      trial.weights[d] = anchor[d] * detail::expm_from_eig(eigs[d]);
    }
    try {
      trial.value = objective(trial.weights, &trial.eucl_grad);
    } catch (const NumericalError&) {
      trial.value = std::numeric_limits<double>::infinity();
      return trial;
    }
    for (std::size_t d = 0; d < nviews; ++d) {
      const Matrix sens = detail::dexp_pullback(
          eigs[d], anchor[d].transpose() * trial.eucl_grad[d]);
      layout.pack_skew_gradient(sens, d, trial.grad);
    }
    return trial;
  };

  bool line_search_failed = false;
  while (diag.iterations < cfg.max_iterations &&
         grad_norm > cfg.gradient_tolerance) {
    Vector direction = memory.direction(theta_grad);
    double slope = direction.dot(theta_grad);
    if (slope >= 0.0) {  // stale curvature: fall back to steepest descent
      memory.clear();
      direction = -theta_grad;
      slope = direction.dot(theta_grad);
      if (slope >= 0.0) break;  // gradient is numerically zero
    }

    // Strong Wolfe line search (bracket + zoom) on phi(a) = F(theta + a p).
    const double phi0 = value;
    const double dphi0 = slope;
    double alpha =
        memory.empty()
            ? std::min(1.0, 1.0 / std::max(1e-12, theta_grad.lpNorm<Eigen::Infinity>()))
            : 1.0;
    double alpha_prev = 0.0;
    double phi_prev = phi0;
    double dphi_prev = dphi0;
    int trials = 0;
    std::optional<Trial> accepted;
    Trial best;  // lowest finite trial seen, for a soft stop on failure

    // Near the optimum the true decrease per step drops below the floating-
    // point resolution of F, making the Armijo test unreliable; accept such
    // steps through approximate (derivative-only) Wolfe conditions as long
    // as the value does not increase beyond round-off.
    const double eps_f = 1e-12 * std::max(1.0, std::abs(phi0));
    const auto wolfe_ok = [&](double a, const Trial& t) {
      if (!std::isfinite(t.value)) return false;
      const double dphi = t.grad.dot(direction);
      const bool strong =
          t.value <= phi0 + cfg.line_search.c1 * a * dphi0 &&
          std::abs(dphi) <= -cfg.line_search.c2 * dphi0;
      const bool approximate =
          t.value <= phi0 + eps_f && dphi >= cfg.line_search.c2 * dphi0 &&
          dphi <= (2.0 * cfg.line_search.c1 - 1.0) * dphi0;
      return strong || approximate;
    };

    // Zoom phase on a bracketing interval [lo, hi] (phi_lo < phi_hi or
    // derivative signs bracket a minimizer).
    double lo = 0.0, hi = 0.0, phi_lo = 0.0, dphi_lo = 0.0;
    bool zooming = false;
    double alpha_hi_phi = 0.0;

    while (trials < cfg.line_search.max_trials && !accepted) {
      double a;
      if (!zooming) {
        a = alpha;
      } else {
        // Quadratic interpolation using (lo, phi_lo, dphi_lo, hi, phi_hi),
        // safeguarded towards bisection.
        const double span = hi - lo;
        double cand = lo - 0.5 * dphi_lo * span * span /
                               (alpha_hi_phi - phi_lo - dphi_lo * span);
        if (!std::isfinite(cand) || cand <= std::min(lo, hi) + 0.1 * std::abs(span) ||
            cand >= std::max(lo, hi) - 0.1 * std::abs(span))
          cand = 0.5 * (lo + hi);
        a = cand;
      }
      ++trials;
      Trial t = eval_trial(theta + a * direction);
      const double dphi = std::isfinite(t.value) ? t.grad.dot(direction)
                                                 : std::numeric_limits<double>::infinity();
      if (std::isfinite(t.value) && t.value < best.value) best = t;

      // Test acceptance before the bracketing classification: at the
      // floating-point floor of F the value comparisons below are noise,
      // and a trial satisfying the (approximate) Wolfe conditions would
      // otherwise be discarded into interval shrinking.
      if (wolfe_ok(a, t)) {
        accepted = std::move(t);
        alpha = a;
        break;
      }

      if (!zooming) {
        if (t.value > phi0 + cfg.line_search.c1 * a * dphi0 ||
            (trials > 1 && t.value >= phi_prev) || !std::isfinite(t.value)) {
          zooming = true;  // minimizer bracketed in (alpha_prev, a)
          lo = alpha_prev;
          phi_lo = phi_prev;
          dphi_lo = dphi_prev;
          hi = a;
          alpha_hi_phi = std::isfinite(t.value) ? t.value : phi0 + 1.0;
          continue;
        }
        if (dphi >= 0.0) {
          zooming = true;  // minimizer bracketed in (a, alpha_prev)
          lo = a;
          phi_lo = t.value;
          dphi_lo = dphi;
          hi = alpha_prev;
          alpha_hi_phi = phi_prev;
          continue;
        }
        alpha_prev = a;
        phi_prev = t.value;
        dphi_prev = dphi;
        alpha = 2.0 * a;
      } else {
        if (t.value > phi0 + cfg.line_search.c1 * a * dphi0 ||
            t.value >= phi_lo || !std::isfinite(t.value)) {
          hi = a;
          alpha_hi_phi = std::isfinite(t.value) ? t.value : phi0 + 1.0;
        } else {
          if (dphi * (hi - lo) >= 0.0) {
            hi = lo;
            alpha_hi_phi = phi_lo;
          }
          lo = a;
          phi_lo = t.value;
          dphi_lo = dphi;
        }
        if (std::abs(hi - lo) < 1e-16) break;  // interval collapsed
      }
    }

    if (!accepted) {
      // Soft stop: keep the best strictly improving trial if any, then halt.
      if (std::isfinite(best.value) && best.value < value) {
        value = best.value;
        weights = std::move(best.weights);
        eucl_grad = std::move(best.eucl_grad);
        diag.objective_trace.push_back(value);
        ++diag.iterations;
        track_drift();
        grad_norm = projected_norm();
      }
      line_search_failed = true;
      break;
    }

    // Accept the step.
    const Vector step = alpha * direction;
    const Vector new_theta = theta + step;
    memory.push(step, accepted->grad - theta_grad);
    const double prev_value = value;
    value = accepted->value;
    weights = std::move(accepted->weights);
    eucl_grad = std::move(accepted->eucl_grad);
    theta = new_theta;
    theta_grad = accepted->grad;
    ++diag.iterations;
    ++since_anchor;
    diag.objective_trace.push_back(value);
    track_drift();
    grad_norm = projected_norm();

    if (cfg.verbose) {
      std::fprintf(stderr, "iter %4d  F = %.12g  |grad| = %.3e  step = %.3e\n",
                   diag.iterations, value, grad_norm,
                   step.lpNorm<Eigen::Infinity>());
    }

    // Stagnation stop for exploratory fits.
    if (cfg.objective_stagnation_tol > 0.0) {
      const double rel =
          (prev_value - value) / std::max(1.0, std::abs(value));
      stagnant = rel <= cfg.objective_stagnation_tol ? stagnant + 1 : 0;
      if (stagnant >= 3) {
        diag.reason = TerminationReason::kObjectiveStagnation;
        diag.final_objective = value;
        diag.final_gradient_norm = grad_norm;
        return OptimizeResult{std::move(weights), std::move(diag)};
      }
    }

    // Re-anchor: fold the rotation into the base point so the skew
    // coordinates stay small and the exponential well-conditioned.
    if (since_anchor >= 20 || step.lpNorm<Eigen::Infinity>() > 1.0) {
      for (std::size_t d = 0; d < nviews; ++d)
        anchor[d] = orthogonality_error(weights[d]) > 1e-10
                        ? qr_orthonormalize(weights[d])
                        : weights[d];
      weights = anchor;
      theta.setZero();
      grad_at_origin();
      since_anchor = 0;
    }
  }

  diag.final_objective = value;
  diag.final_gradient_norm = grad_norm;
  if (grad_norm <= cfg.gradient_tolerance) {
    diag.converged = true;
    diag.reason = TerminationReason::kGradientTolerance;
  } else if (line_search_failed) {
    diag.reason = TerminationReason::kLineSearchFailure;
  } else {
    diag.reason = TerminationReason::kMaxIterations;
  }
  return OptimizeResult{std::move(weights), std::move(diag)};
}

}  // namespace mvbss
