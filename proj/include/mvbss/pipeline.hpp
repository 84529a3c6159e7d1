#pragma once

#include "mvbss/estimator.hpp"
#include "mvbss/glasso.hpp"

#include <algorithm>
#include <utility>
#include <vector>

namespace mvbss {

// Pearson correlation matrix of the columns of `s` (rows are observations).
inline Matrix correlation_matrix(const Matrix& s) {
  require(s.rows() >= 2, "correlation_matrix: need >= 2 rows");
  require(s.cols() >= 1, "correlation_matrix: need >= 1 column");
  Matrix c = s.rowwise() - s.colwise().mean();
  for (Index j = 0; j < c.cols(); ++j) {
    const double norm = c.col(j).norm();
    if (norm == 0.0)
      throw ValidationError("correlation_matrix: zero-variance column " +
                            std::to_string(j));
    c.col(j) /= norm;
  }
  Matrix corr = c.transpose() * c;
  corr.diagonal().setOnes();  // exact unit diagonal
  return ((corr + corr.transpose()) / 2.0).eval();
}

struct PipelineConfig {
  Index shared_count = 1;
  FitConfig fit;
  int lambda_grid_size = 30;
  double gamma = 0.5;       // EBIC sparsity weight
  int top_models = 10;
  double glasso_tol = 1e-6;
  int glasso_max_sweeps = 200;

  void validate() const {
    require(shared_count >= 1, "pipeline: shared_count must be >= 1");
    require(lambda_grid_size >= 1, "pipeline: lambda_grid_size must be >= 1");
    require(gamma >= 0.0, "pipeline: gamma must be >= 0");
    require(top_models >= 1, "pipeline: top_models must be >= 1");
  }
};

struct RankedModel {
  double lambda = 0.0;
  double ebic_score = 0.0;
  PrecisionEstimate estimate;
};

struct PipelineResult {
  Matrix correlation;                 // columns' correlation, p x p
  std::vector<double> grid;           // penalty grid, ascending
  std::vector<double> ebic_scores;    // aligned with `grid`
  std::vector<Index> edge_counts;     // aligned with `grid`
  std::vector<RankedModel> top_models;  // best EBIC first
  Index stacked_rows = 0;             // rows of the stacked source matrix
};

// Two-view co-regulation analysis: integrate the views, stack both views'
// full estimated source matrices row-wise, build the column correlation
// matrix, fit a sparse precision path, and rank the models by EBIC.  Edges
// of the returned models are ordered by interaction strength.
inline PipelineResult coregulation_pipeline(const Matrix& view1,
                                            const Matrix& view2,
                                            const PipelineConfig& cfg) {
  cfg.validate();
  require(view1.cols() == view2.cols(),
          "pipeline: views must share their column (variable) count");
  MultiViewDataset data({view1, view2});

  const FittedModel model = fit(data, cfg.shared_count, cfg.fit);
  const SourceEstimates est = transform(model, data);
  const Index k1 = est.z.at(0).rows();
  const Index k2 = est.z.at(1).rows();
  Matrix stacked(k1 + k2, view1.cols());
  stacked.topRows(k1) = est.z.at(0);
  stacked.bottomRows(k2) = est.z.at(1);

  PipelineResult result;
  result.stacked_rows = stacked.rows();
  result.correlation = correlation_matrix(stacked);
  result.grid = lambda_grid(result.correlation, cfg.lambda_grid_size);
  const std::vector<PrecisionEstimate> path = glasso_path(
      result.correlation, result.grid, cfg.glasso_tol, cfg.glasso_max_sweeps);

  result.ebic_scores.resize(path.size());
  result.edge_counts.resize(path.size());
  for (std::size_t i = 0; i < path.size(); ++i) {
    result.ebic_scores[i] =
        ebic(path[i], result.correlation, result.stacked_rows, cfg.gamma);
    result.edge_counts[i] = path[i].edge_count();
  }

  std::vector<std::size_t> order(path.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) {
                     return result.ebic_scores[a] < result.ebic_scores[b];
                   });
  const std::size_t keep =
      std::min<std::size_t>(order.size(), static_cast<std::size_t>(cfg.top_models));
  for (std::size_t i = 0; i < keep; ++i) {
    const std::size_t idx = order[i];
    result.top_models.push_back(
        RankedModel{result.grid[idx], result.ebic_scores[idx], path[idx]});
  }
  return result;
}

}  // namespace mvbss
