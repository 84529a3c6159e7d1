#pragma once

#include "mvbss/common.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <limits>
#include <utility>
#include <vector>

namespace mvbss {

// Permutation-and-scaling invariant distance between the column spaces of two
// invertible matrices, computed from C = A^{-1} B:
//   sum_i (sum_j |c_ij| / max_k |c_ik| - 1) + sum_j (sum_i |c_ij| / max_k |c_kj| - 1).
// Zero iff B equals A up to a scaled permutation of columns.
inline double amari_distance(const Matrix& a, const Matrix& b) {
  require(a.rows() == a.cols() && a.rows() >= 1,
          "amari_distance: matrices must be square");
  require(a.rows() == b.rows() && a.cols() == b.cols(),
          "amari_distance: matrices must have equal shape");
  require(all_finite(a) && all_finite(b),
          "amari_distance: non-finite entries");
  Eigen::FullPivLU<Matrix> lu(a);
  if (!lu.isInvertible())
    throw NumericalError("amari_distance: first matrix is singular");
  const Matrix c = lu.solve(b).cwiseAbs();
  if (!all_finite(c) || c.rows() != c.cols())
    throw NumericalError("amari_distance: ill-conditioned input");

  const Vector row_max = c.rowwise().maxCoeff();
  const Vector col_max = c.colwise().maxCoeff().transpose();
  if (row_max.minCoeff() <= 0.0 || col_max.minCoeff() <= 0.0)
    throw NumericalError("amari_distance: second matrix is singular");
  const double rows =
      (c.array().colwise() / row_max.array()).rowwise().sum().sum();
  const double cols =
      (c.array().rowwise() / col_max.transpose().array()).colwise().sum().sum();
  return rows + cols - 2.0 * static_cast<double>(c.rows());
}

// Size-independent variant: the raw distance divided by its maximum
// 2 n (n - 1), i.e. the mean off-to-peak contamination ratio in [0, 1].
// Comparable across dimensions, unlike the raw sum.
inline double amari_distance_normalized(const Matrix& a, const Matrix& b) {
  const double n = static_cast<double>(a.rows());
  require(n >= 2, "amari_distance_normalized: need dimension >= 2");
  return amari_distance(a, b) / (2.0 * n * (n - 1.0));
}

struct Assignment {
  std::vector<std::pair<Index, Index>> pairs;  // (row, column), row-sorted
  double total_cost = 0.0;
};

namespace detail {

// Shortest-augmenting-path solution of the rectangular assignment problem
// for rows <= cols; every row receives a distinct column.  Ties during the
// column scan resolve to the lowest index, making the result deterministic.
inline std::vector<Index> lsap_row_to_col(const Matrix& cost) {
  const Index n = cost.rows();
  const Index m = cost.cols();
  constexpr double kInf = std::numeric_limits<double>::infinity();

  Vector u = Vector::Zero(n);
  Vector v = Vector::Zero(m);
  std::vector<Index> col4row(static_cast<std::size_t>(n), -1);
  std::vector<Index> row4col(static_cast<std::size_t>(m), -1);
  std::vector<Index> path(static_cast<std::size_t>(m), -1);
  Vector shortest(m);
  std::vector<bool> sr(static_cast<std::size_t>(n));
  std::vector<bool> sc(static_cast<std::size_t>(m));

  for (Index cur = 0; cur < n; ++cur) {
    shortest.setConstant(kInf);
    std::fill(sr.begin(), sr.end(), false);
    std::fill(sc.begin(), sc.end(), false);
    Index i = cur;
    Index sink = -1;
    double min_val = 0.0;
    while (sink == -1) {
      sr[static_cast<std::size_t>(i)] = true;
      Index best_j = -1;
      double best = kInf;
      for (Index j = 0; j < m; ++j) {
        if (sc[static_cast<std::size_t>(j)]) continue;
        const double r = min_val + cost(i, j) - u[i] - v[j];
        if (r < shortest[j]) {
          shortest[j] = r;
          path[static_cast<std::size_t>(j)] = i;
        }
        if (shortest[j] < best) {  // strict: lowest index wins ties
          best = shortest[j];
          best_j = j;
        }
      }
      if (best_j == -1 || !std::isfinite(best))
        throw NumericalError("hungarian: no feasible assignment");
      sc[static_cast<std::size_t>(best_j)] = true;
      min_val = best;
      if (row4col[static_cast<std::size_t>(best_j)] == -1) {
        sink = best_j;
      } else {
        i = row4col[static_cast<std::size_t>(best_j)];
      }
    }
    u[cur] += min_val;
    for (Index k = 0; k < n; ++k) {
      if (sr[static_cast<std::size_t>(k)] && k != cur)
        u[k] += min_val - shortest[col4row[static_cast<std::size_t>(k)]];
    }
    for (Index j = 0; j < m; ++j) {
      if (sc[static_cast<std::size_t>(j)]) v[j] -= min_val - shortest[j];
    }
    Index j = sink;
    while (true) {
      const Index pi = path[static_cast<std::size_t>(j)];
      row4col[static_cast<std::size_t>(j)] = pi;
      std::swap(col4row[static_cast<std::size_t>(pi)], j);
      if (pi == cur) break;
    }
  }
  return col4row;
}

}  // namespace detail

// Minimum-cost assignment of min(rows, cols) pairs; rectangular inputs are
// supported directly.  Deterministic for tied optima.
inline Assignment hungarian(const Matrix& cost) {
  require(cost.rows() >= 1 && cost.cols() >= 1, "hungarian: empty cost matrix");
  require(all_finite(cost), "hungarian: non-finite costs");
  Assignment out;
  if (cost.rows() <= cost.cols()) {
    const auto col4row = detail::lsap_row_to_col(cost);
    for (Index i = 0; i < cost.rows(); ++i)
      out.pairs.emplace_back(i, col4row[static_cast<std::size_t>(i)]);
  } else {
    const auto row4col = detail::lsap_row_to_col(cost.transpose());
    for (Index j = 0; j < cost.cols(); ++j)
      out.pairs.emplace_back(row4col[static_cast<std::size_t>(j)], j);
    std::sort(out.pairs.begin(), out.pairs.end());
  }
  for (const auto& [i, j] : out.pairs) out.total_cost += cost(i, j);
  return out;
}

struct MccResult {
  double mcc = 0.0;          // mean absolute correlation over matched pairs
  Assignment matching;       // rows of `estimated` -> rows of `truth`
};

// Mean correlation coefficient between estimated and true sources (rows are
// components, columns samples).  Components are matched by minimizing
// 1 - |Pearson correlation| over one-to-one assignments, so the score is
// invariant to row order and sign.
inline MccResult mcc(const Matrix& estimated, const Matrix& truth) {
  require(estimated.cols() == truth.cols(),
          "mcc: sample counts differ");
  require(estimated.cols() >= 2, "mcc: need at least two samples");
  require(estimated.rows() >= 1 && truth.rows() >= 1,
          "mcc: need at least one component");
  Matrix cost(estimated.rows(), truth.rows());
  for (Index i = 0; i < estimated.rows(); ++i)
    for (Index j = 0; j < truth.rows(); ++j)
      cost(i, j) =
          1.0 - std::abs(pearson_correlation(estimated.row(i).transpose(),
                                             truth.row(j).transpose()));
  MccResult result;
  result.matching = hungarian(cost);
  double sum = 0.0;
  for (const auto& [i, j] : result.matching.pairs)
    sum += 1.0 - cost(i, j);
  result.mcc = sum / static_cast<double>(result.matching.pairs.size());
  return result;
}

}  // namespace mvbss
