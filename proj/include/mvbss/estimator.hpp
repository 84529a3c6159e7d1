#pragma once

#include "mvbss/cca.hpp"
#include "mvbss/datamodel.hpp"
#include "mvbss/objective.hpp"
#include "mvbss/optimizer.hpp"
#include "mvbss/whitening.hpp"

#include <cstdint>
#include <utility>
#include <vector>

namespace mvbss {

struct FitConfig {
  double lambda = 1.0;
  Nonlinearity nonlinearity = Nonlinearity::kLogCosh;
  Retain retain = Retain::all();      // whitening dimension policy
  OptimizerConfig optimizer;
  std::uint64_t seed = 0;             // seeds the deterministic CCA completion
};

// Fits the separation model: whitens every view, starts from correlation-
// ordered orthogonal matrices, minimizes the coupled objective over rotations
// and maps the result back to data space (mixing estimate K+ W^T per view).
inline FittedModel fit(const MultiViewDataset& data, Index shared_count,
                       const FitConfig& cfg) {
  require(data.view_count() >= 2, "fit: need at least two views");
  require(data.sample_count() >= 2, "fit: need at least two samples");

  std::vector<WhiteningTransform> whitening;
  std::vector<Matrix> z;
  whitening.reserve(data.view_count());
  z.reserve(data.view_count());
  for (std::size_t d = 0; d < data.view_count(); ++d) {
    whitening.push_back(fit_whitening(data.view(d), cfg.retain));
    z.push_back(whitening.back().apply(data.view(d)));
  }

  ObjectiveConfig ocfg;
  ocfg.shared_count = shared_count;
  ocfg.lambda = cfg.lambda;
  ocfg.nonlinearity = cfg.nonlinearity;
  Index min_rank = z[0].rows();
  for (const Matrix& m : z) min_rank = std::min(min_rank, m.rows());
  ocfg.validate(min_rank);

  InitResult init = cca_initialize(z, cfg.seed);
  const auto objective = [&](const std::vector<Matrix>& w,
                             std::vector<Matrix>* grad) {
    return evaluate_with_gradient(w, z, ocfg, grad);
  };
  OptimizeResult opt = minimize_orthogonal(std::move(init.initial_unmixing),
                                           objective, cfg.optimizer);

  std::vector<Matrix> mixing;
  mixing.reserve(data.view_count());
  for (std::size_t d = 0; d < data.view_count(); ++d) {
    // Guard against accumulated round-off before the strict model checks.
    if (orthogonality_error(opt.weights[d]) > 1e-10)
      opt.weights[d] = qr_orthonormalize(opt.weights[d]);
    mixing.push_back(whitening[d].inverse() * opt.weights[d].transpose());
  }
  return FittedModel(std::move(opt.weights), std::move(whitening),
                     std::move(mixing), shared_count, cfg.lambda,
                     cfg.nonlinearity, std::move(opt.diagnostics.objective_trace),
                     opt.diagnostics.converged);
}

// Recovers sources for new data through the training whitening.  Views may
// have zero samples (returns empty estimates of matching shape).
inline SourceEstimates transform(const FittedModel& model,
                                 const std::vector<Matrix>& views) {
  require(views.size() == model.view_count(),
          "transform: view count differs from the fitted model");
  const Index n = views.empty() ? 0 : views[0].cols();
  std::vector<Matrix> z;
  z.reserve(views.size());
  for (std::size_t d = 0; d < views.size(); ++d) {
    require(views[d].cols() == n, "transform: views differ in sample count");
    z.push_back(model.whitening()[d].apply(views[d]));
  }
  if (n == 0) {
    SourceEstimates est;
    est.shared_count = model.shared_count();
    for (const Matrix& m : z) est.z.emplace_back(m.rows(), 0);
    est.shared_mean = Matrix(model.shared_count(), 0);
    return est;
  }
  ObjectiveConfig ocfg;
  ocfg.shared_count = model.shared_count();
  ocfg.lambda = model.lambda();
  ocfg.nonlinearity = model.nonlinearity();
  return recover_sources(model.unmixing_whitened(), z, ocfg);
}

inline SourceEstimates transform(const FittedModel& model,
                                 const MultiViewDataset& data) {
  return transform(model, data.views());
}

// Cross-view mean of the recovered shared block (shared_count x samples).
inline Matrix extract_shared(const FittedModel& model,
                             const std::vector<Matrix>& views) {
  return transform(model, views).shared_mean;
}

inline Matrix extract_shared(const FittedModel& model,
                             const MultiViewDataset& data) {
  return transform(model, data).shared_mean;
}

}  // namespace mvbss
