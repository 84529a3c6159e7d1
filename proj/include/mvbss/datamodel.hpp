#pragma once

#include "mvbss/common.hpp"
#include "mvbss/objective.hpp"
#include "mvbss/whitening.hpp"

#include <string>
#include <utility>
#include <vector>

namespace mvbss {

// A collection of aligned views: view d is a features x samples matrix and
// every view observes the same samples (equal column counts).
class MultiViewDataset {
 public:
  explicit MultiViewDataset(std::vector<Matrix> views,
                            std::vector<std::string> names = {})
      : views_(std::move(views)), names_(std::move(names)) {
    require(!views_.empty(), "MultiViewDataset: need at least one view");
    const Index n = views_[0].cols();
    require(n >= 1, "MultiViewDataset: views must have >= 1 sample");
    for (const Matrix& v : views_) {
      require(v.rows() >= 1, "MultiViewDataset: views must have >= 1 feature");
      require(v.cols() == n, "MultiViewDataset: views differ in sample count");
      require(all_finite(v), "MultiViewDataset: non-finite entries");
    }
    if (names_.empty()) {
      for (std::size_t d = 0; d < views_.size(); ++d)
        names_.push_back("view" + std::to_string(d));
    }
    require(names_.size() == views_.size(),
            "MultiViewDataset: one name per view required");
  }

  const std::vector<Matrix>& views() const { return views_; }
  const Matrix& view(std::size_t d) const { return views_.at(d); }
  const std::vector<std::string>& names() const { return names_; }
  std::size_t view_count() const { return views_.size(); }
  Index sample_count() const { return views_[0].cols(); }

  // Column subset across all views (used by train/validation splitting).
  MultiViewDataset columns(const std::vector<Index>& idx) const {
    require(!idx.empty(), "MultiViewDataset::columns: empty selection");
    std::vector<Matrix> sub;
    sub.reserve(views_.size());
    for (const Matrix& v : views_) {
      Matrix m(v.rows(), static_cast<Index>(idx.size()));
      for (std::size_t j = 0; j < idx.size(); ++j) {
        require(idx[j] >= 0 && idx[j] < v.cols(),
                "MultiViewDataset::columns: index out of range");
        m.col(static_cast<Index>(j)) = v.col(idx[j]);
      }
      sub.push_back(std::move(m));
    }
    return MultiViewDataset(std::move(sub), names_);
  }

 private:
  std::vector<Matrix> views_;
  std::vector<std::string> names_;
};

// Everything the generator knows: mixing matrices, the sources behind each
// view, and the noise scale, kept for evaluation against estimates.
struct GenerativeGroundTruth {
  std::vector<Matrix> mixing;         // A_d, k_d x k_d
  Matrix shared_sources;              // c x N
  std::vector<Matrix> individual_sources;  // (k_d - c) x N per view
  std::vector<double> noise_sigma;    // per view, >= 0
  Index shared_count = 0;

  // Stacked sources (shared; individual) feeding view d.
  Matrix sources(std::size_t d) const {
    const Matrix& ind = individual_sources.at(d);
    Matrix s(shared_sources.rows() + ind.rows(), shared_sources.cols());
    s.topRows(shared_sources.rows()) = shared_sources;
    s.bottomRows(ind.rows()) = ind;
    return s;
  }

  void validate() const {
    require(!mixing.empty(), "GenerativeGroundTruth: no views");
    require(mixing.size() == individual_sources.size() &&
                mixing.size() == noise_sigma.size(),
            "GenerativeGroundTruth: per-view field size mismatch");
    require(shared_count == shared_sources.rows(),
            "GenerativeGroundTruth: shared_count/source mismatch");
    const Index n = shared_sources.cols();
    for (std::size_t d = 0; d < mixing.size(); ++d) {
      const Index k = shared_count + individual_sources[d].rows();
      require(mixing[d].rows() == k && mixing[d].cols() == k,
              "GenerativeGroundTruth: mixing matrix shape mismatch");
      require(individual_sources[d].cols() == n,
              "GenerativeGroundTruth: source sample counts differ");
      require(noise_sigma[d] >= 0.0,
              "GenerativeGroundTruth: negative noise sigma");
    }
  }
};

// A fitted separation model: per-view whitening, the orthogonal unmixing
// found in whitened space, and the implied mixing estimates.
class FittedModel {
 public:
  FittedModel(std::vector<Matrix> unmixing_whitened,
              std::vector<WhiteningTransform> whitening,
              std::vector<Matrix> mixing_estimates, Index shared_count,
              double lambda, Nonlinearity nonlinearity,
              std::vector<double> objective_trace, bool converged)
      : unmixing_whitened_(std::move(unmixing_whitened)),
        whitening_(std::move(whitening)),
        mixing_estimates_(std::move(mixing_estimates)),
        shared_count_(shared_count),
        lambda_(lambda),
        nonlinearity_(nonlinearity),
        objective_trace_(std::move(objective_trace)),
        converged_(converged) {
    const std::size_t nviews = unmixing_whitened_.size();
    require(nviews >= 1, "FittedModel: need at least one view");
    require(whitening_.size() == nviews && mixing_estimates_.size() == nviews,
            "FittedModel: per-view field size mismatch");
    require(lambda_ > 0.0, "FittedModel: lambda must be positive");
    require(shared_count_ >= 0, "FittedModel: shared_count must be >= 0");
    for (std::size_t d = 0; d < nviews; ++d) {
      const Matrix& w = unmixing_whitened_[d];
      require(w.rows() == w.cols() && w.rows() == whitening_[d].retained_dim(),
              "FittedModel: unmixing shape mismatch");
      require(shared_count_ <= w.rows(),
              "FittedModel: shared_count exceeds a view's dimension");
      if (orthogonality_error(w) > 1e-8)
        throw ValidationError("FittedModel: unmixing is not orthogonal");
      require(mixing_estimates_[d].rows() == whitening_[d].input_dim() &&
                  mixing_estimates_[d].cols() == w.rows(),
              "FittedModel: mixing estimate shape mismatch");
    }
    for (std::size_t i = 1; i < objective_trace_.size(); ++i) {
      // Slack scales with |F| so round-off at the resolution of the
      // objective value does not register as an increase.
      const double slack =
          1e-9 * std::max(1.0, std::abs(objective_trace_[i - 1]));
      require(objective_trace_[i] <= objective_trace_[i - 1] + slack,
              "FittedModel: objective trace must be non-increasing");
    }
  }

  const std::vector<Matrix>& unmixing_whitened() const {
    return unmixing_whitened_;
  }
  const std::vector<WhiteningTransform>& whitening() const {
    return whitening_;
  }
  const std::vector<Matrix>& mixing_estimates() const {
    return mixing_estimates_;
  }
  std::size_t view_count() const { return unmixing_whitened_.size(); }
  Index shared_count() const { return shared_count_; }
  double lambda() const { return lambda_; }
  Nonlinearity nonlinearity() const { return nonlinearity_; }
  const std::vector<double>& objective_trace() const {
    return objective_trace_;
  }
  bool converged() const { return converged_; }

 private:
  std::vector<Matrix> unmixing_whitened_;
  std::vector<WhiteningTransform> whitening_;
  std::vector<Matrix> mixing_estimates_;
  Index shared_count_;
  double lambda_;
  Nonlinearity nonlinearity_;
  std::vector<double> objective_trace_;
  bool converged_;
};

}  // namespace mvbss
