#pragma once

#include "mvbss/estimator.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>
#include <vector>

namespace mvbss {

struct Edge {
  Index i = 0;  // i < j
  Index j = 0;
  double strength = 0.0;  // precision entry theta_ij
};

struct PrecisionEstimate {
  Matrix theta;
  double lambda = 0.0;
  int sweeps = 0;
  bool converged = false;
  double kkt_residual = 0.0;
  double duality_gap = 0.0;

  // Off-diagonal nonzeros (i < j), strongest first; ties break on (i, j).
  std::vector<Edge> edges() const {
    std::vector<Edge> out;
    for (Index i = 0; i < theta.rows(); ++i)
      for (Index j = i + 1; j < theta.cols(); ++j)
        if (theta(i, j) != 0.0) out.push_back({i, j, theta(i, j)});
    std::stable_sort(out.begin(), out.end(), [](const Edge& a, const Edge& b) {
      if (std::abs(a.strength) != std::abs(b.strength))
        return std::abs(a.strength) > std::abs(b.strength);
      return std::make_pair(a.i, a.j) < std::make_pair(b.i, b.j);
    });
    return out;
  }

  Index edge_count() const {
    Index count = 0;
    for (Index i = 0; i < theta.rows(); ++i)
      for (Index j = i + 1; j < theta.cols(); ++j)
        if (theta(i, j) != 0.0) ++count;
    return count;
  }
};

namespace detail {

inline void check_covariance(const Matrix& sigma, const char* who) {
  require(sigma.rows() == sigma.cols() && sigma.rows() >= 1,
          std::string(who) + ": matrix must be square");
  require(all_finite(sigma), std::string(who) + ": non-finite entries");
  require(max_abs(Matrix(sigma - sigma.transpose())) <=
              1e-8 * (1.0 + max_abs(sigma)),
          std::string(who) + ": matrix must be symmetric");
  for (Index i = 0; i < sigma.rows(); ++i)
    require(sigma(i, i) > 0.0,
            std::string(who) + ": diagonal entries must be positive");
}

inline double soft_threshold(double x, double t) {
  if (x > t) return x - t;
  if (x < -t) return x + t;
  return 0.0;
}

// Warm-startable state for the path solver.
struct GlassoState {
  Matrix w;  // working covariance (converges to theta^{-1})
  Matrix b;  // column j holds that subproblem's lasso coefficients
};

// KKT residual of theta for the penalized problem, evaluated against a fresh
// inverse: the diagonal of theta^{-1} must match sigma, nonzero off-diagonals
// must satisfy theta^{-1}_ij = sigma_ij + lambda sign(theta_ij), and zeros
// must stay within the lambda tube.
inline double kkt_residual(const Matrix& theta, const Matrix& sigma,
                           double lambda) {
  Eigen::LLT<Matrix> llt(theta);
  if (llt.info() != Eigen::Success)
    return std::numeric_limits<double>::infinity();
  const Matrix v =
      llt.solve(Matrix::Identity(theta.rows(), theta.rows()));
  double res = 0.0;
  for (Index i = 0; i < theta.rows(); ++i) {
    res = std::max(res, std::abs(v(i, i) - sigma(i, i)));
    for (Index j = i + 1; j < theta.cols(); ++j) {
      const double d = v(i, j) - sigma(i, j);
      if (theta(i, j) != 0.0) {
        res = std::max(res, std::abs(d - lambda * (theta(i, j) > 0 ? 1. : -1.)));
      } else {
        res = std::max(res, std::max(0.0, std::abs(d) - lambda));
      }
    }
  }
  return res;
}

// One block coordinate-descent solve; `state` supplies the warm start and
// receives the final working matrices.
inline PrecisionEstimate glasso_solve(const Matrix& sigma, double lambda,
                                      double tol, int max_sweeps,
                                      GlassoState& state) {
  const Index p = sigma.rows();
  PrecisionEstimate out;
  out.lambda = lambda;

  if (lambda == 0.0) {
    // Unpenalized: theta is the plain inverse; requires positive definiteness.
    Eigen::LLT<Matrix> llt(sigma);
    if (llt.info() != Eigen::Success)
      throw NumericalError(
          "graphical_lasso: lambda = 0 requires a positive-definite matrix");
    out.theta = llt.solve(Matrix::Identity(p, p));
    out.theta = ((out.theta + out.theta.transpose()) / 2.0).eval();
    out.converged = true;
    out.kkt_residual = kkt_residual(out.theta, sigma, 0.0);
    out.duality_gap = (sigma.array() * out.theta.array()).sum() -
                      static_cast<double>(p);
    state.w = sigma;
    state.b.setZero(p, p);
    return out;
  }

  Matrix& w = state.w;
  Matrix& b = state.b;
  const double inner_tol = 0.01 * tol;
  const int max_inner = 1000;

  Matrix theta(p, p);
  Matrix best_theta;
  double best_res = std::numeric_limits<double>::infinity();
  for (int sweep = 1; sweep <= max_sweeps; ++sweep) {
    for (Index j = 0; j < p; ++j) {
      // Lasso subproblem over column j against the other p-1 coordinates:
      //   minimize 1/2 beta^T W11 beta - s12^T beta + lambda |beta|_1.
      Vector beta(p - 1);
      Vector s12(p - 1);
      for (Index k = 0, t = 0; k < p; ++k) {
        if (k == j) continue;
        beta[t] = b(k, j);
        s12[t] = sigma(k, j);
        ++t;
      }
      Matrix w11(p - 1, p - 1);
      for (Index r = 0, rr = 0; r < p; ++r) {
        if (r == j) continue;
        for (Index c = 0, cc = 0; c < p; ++c) {
          if (c == j) continue;
          w11(rr, cc) = w(r, c);
          ++cc;
        }
        ++rr;
      }
      Vector u = w11 * beta;  // maintained residual product
      for (int it = 0; it < max_inner; ++it) {
        double delta = 0.0;
        for (Index k = 0; k < p - 1; ++k) {
          const double old = beta[k];
          const double r = s12[k] - (u[k] - w11(k, k) * old);
          const double next = soft_threshold(r, lambda) / w11(k, k);
          if (next != old) {
            beta[k] = next;
            u += (next - old) * w11.col(k);
            delta = std::max(delta, std::abs(next - old));
          }
        }
        if (delta <= inner_tol) break;
      }
      const Vector w12 = w11 * beta;
      for (Index k = 0, t = 0; k < p; ++k) {
        if (k == j) continue;
        w(k, j) = w12[t];
        w(j, k) = w12[t];
        b(k, j) = beta[t];
        ++t;
      }
    }

    // Assemble theta from the per-column solutions and test optimality on a
    // freshly inverted iterate.
    for (Index j = 0; j < p; ++j) {
      double quad = 0.0;
      for (Index k = 0; k < p; ++k)
        if (k != j) quad += w(k, j) * b(k, j);
      const double denom = w(j, j) - quad;
      if (denom <= 0.0 || !std::isfinite(denom))
        throw NumericalError("graphical_lasso: lost positive definiteness");
      const double t22 = 1.0 / denom;
      theta(j, j) = t22;
      for (Index k = 0; k < p; ++k)
        if (k != j) theta(k, j) = -b(k, j) * t22;
    }
    theta = ((theta + theta.transpose()) / 2.0).eval();
    // Preserve exact zeros lost to the symmetrization above.
    for (Index i = 0; i < p; ++i)
      for (Index j = i + 1; j < p; ++j)
        if (b(i, j) == 0.0 && b(j, i) == 0.0 && i != j) {
          theta(i, j) = 0.0;
          theta(j, i) = 0.0;
        }

    out.sweeps = sweep;
    const double res = kkt_residual(theta, sigma, lambda);
    if (res < best_res) {
      best_res = res;
      best_theta = theta;
    }
    if (res <= tol) {
      out.converged = true;
      break;
    }
  }
  if (!std::isfinite(best_res))
    throw NumericalError(
        "graphical_lasso: no positive-definite iterate reached");

  // Return the best iterate seen (equals the final one on convergence).
  out.theta = std::move(best_theta);
  out.kkt_residual = best_res;
  double l1_off = 0.0;
  for (Index i = 0; i < p; ++i)
    for (Index j = 0; j < p; ++j)
      if (i != j) l1_off += std::abs(theta(i, j));
  out.duality_gap = (sigma.array() * theta.array()).sum() + lambda * l1_off -
                    static_cast<double>(p);
  return out;
}

}  // namespace detail

// Sparse precision-matrix estimate:
//   minimize -log det(theta) + trace(sigma theta) + lambda * sum_{i != j} |theta_ij|
// over positive-definite theta, via block coordinate descent.  The penalty
// excludes the diagonal, so at lambda >= max off-diagonal |sigma_ij| the
// solution is exactly diagonal, and sigma = I yields theta = I.
inline PrecisionEstimate graphical_lasso(const Matrix& sigma, double lambda,
                                         double tol = 1e-6,
                                         int max_sweeps = 200) {
  detail::check_covariance(sigma, "graphical_lasso");
  require(lambda >= 0.0, "graphical_lasso: lambda must be >= 0");
  require(tol > 0.0, "graphical_lasso: tol must be positive");
  require(max_sweeps >= 1, "graphical_lasso: max_sweeps must be >= 1");
  const Matrix sym = ((sigma + sigma.transpose()) / 2.0).eval();
  detail::GlassoState state;
  state.w = sym;
  state.b = Matrix::Zero(sym.rows(), sym.rows());
  return detail::glasso_solve(sym, lambda, tol, max_sweeps, state);
}

// Extended BIC of a precision estimate given the covariance it was fit to and
// the sample count behind that covariance:
//   -log det(theta) + trace(sigma theta) + |E| log(n) + 4 |E| gamma log(p).
inline double ebic(const PrecisionEstimate& est, const Matrix& sigma,
                   Index n_samples, double gamma = 0.5) {
  detail::check_covariance(sigma, "ebic");
  require(n_samples >= 1, "ebic: n_samples must be >= 1");
  require(gamma >= 0.0, "ebic: gamma must be >= 0");
  require(est.theta.rows() == sigma.rows(),
          "ebic: estimate/covariance dimension mismatch");
  Eigen::LLT<Matrix> llt(est.theta);
  if (llt.info() != Eigen::Success)
    throw NumericalError("ebic: precision estimate is not positive definite");
  const Matrix l = llt.matrixL();
  double logdet = 0.0;
  for (Index i = 0; i < est.theta.rows(); ++i)
    logdet += 2.0 * std::log(l(i, i));
  const double fit = -logdet + (sigma.array() * est.theta.array()).sum();
  const double edges = static_cast<double>(est.edge_count());
  return fit + edges * std::log(static_cast<double>(n_samples)) +
         4.0 * edges * gamma * std::log(static_cast<double>(sigma.rows()));
}

// Log-spaced penalty grid on [0.01 t, t] where t = max off-diagonal
// |sigma_ij| (the threshold above which the estimate is fully diagonal).
inline std::vector<double> lambda_grid(const Matrix& sigma, int size = 30) {
  detail::check_covariance(sigma, "lambda_grid");
  require(size >= 1, "lambda_grid: size must be >= 1");
  double thresh = 0.0;
  for (Index i = 0; i < sigma.rows(); ++i)
    for (Index j = i + 1; j < sigma.cols(); ++j)
      thresh = std::max(thresh, std::abs(sigma(i, j)));
  std::vector<double> grid(static_cast<std::size_t>(size));
  if (thresh == 0.0) return grid;  // already diagonal: all-zero grid
  if (size == 1) {
    grid[0] = thresh;
    return grid;
  }
  for (int i = 0; i < size; ++i) {
    const double frac = static_cast<double>(i) / static_cast<double>(size - 1);
    grid[static_cast<std::size_t>(i)] =
        thresh * std::pow(10.0, -2.0 * (1.0 - frac));
  }
  grid.back() = thresh;  // exact endpoint
  return grid;
}

// Solves the whole path, warm-starting each penalty from the previous
// solution (computed sparsest-first).  Results align with `grid`.
inline std::vector<PrecisionEstimate> glasso_path(const Matrix& sigma,
                                                  const std::vector<double>& grid,
                                                  double tol = 1e-6,
                                                  int max_sweeps = 200) {
  detail::check_covariance(sigma, "glasso_path");
  require(!grid.empty(), "glasso_path: empty grid");
  const Matrix sym = ((sigma + sigma.transpose()) / 2.0).eval();

  std::vector<std::size_t> order(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return grid[a] > grid[b];
  });

  detail::GlassoState state;
  state.w = sym;
  state.b = Matrix::Zero(sym.rows(), sym.rows());
  std::vector<PrecisionEstimate> path(grid.size());
  for (std::size_t idx : order) {
    require(grid[idx] >= 0.0, "glasso_path: negative lambda");
    path[idx] = detail::glasso_solve(sym, grid[idx], tol, max_sweeps, state);
  }
  return path;
}

}  // namespace mvbss
