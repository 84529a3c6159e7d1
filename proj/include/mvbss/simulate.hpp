#pragma once

#include "mvbss/datamodel.hpp"
#include "mvbss/rng.hpp"

#include <Eigen/SVD>

#include <cmath>
#include <utility>
#include <vector>

namespace mvbss {

// Marginal law of the independent sources (both mean 0, variance 1 after
// row standardization).
enum class SourceLaw { kLaplace, kUniform };

inline std::string to_string(SourceLaw law) {
  return law == SourceLaw::kLaplace ? "laplace" : "uniform";
}

inline SourceLaw source_law_from_string(const std::string& s) {
  if (s == "laplace") return SourceLaw::kLaplace;
  if (s == "uniform") return SourceLaw::kUniform;
  throw ValidationError("unknown source law: " + s);
}

struct SimulationConfig {
  int n_views = 2;
  int sources_per_view = 0;          // uniform k for every view...
  std::vector<int> per_view_sources; // ...or an explicit per-view override
  int shared_count = 0;
  Index samples = 0;
  std::vector<double> noise_sigma;   // one value (shared) or one per view
  SourceLaw source_law = SourceLaw::kLaplace;
  double mixing_mean = 1.0;
  double mixing_std = 0.1;
  std::uint64_t seed = 0;

  std::vector<Index> resolved_dims() const {
    require(n_views >= 1, "simulate: n_views must be >= 1");
    std::vector<Index> dims;
    if (!per_view_sources.empty()) {
      require(per_view_sources.size() == static_cast<std::size_t>(n_views),
              "simulate: per_view_sources must list one entry per view");
      for (int k : per_view_sources) dims.push_back(k);
    } else {
      dims.assign(static_cast<std::size_t>(n_views), sources_per_view);
    }
    Index min_k = dims[0];
    for (Index k : dims) {
      require(k >= 1, "simulate: each view needs >= 1 source");
      min_k = std::min(min_k, k);
    }
    require(shared_count >= 0, "simulate: shared_count must be >= 0");
    require(shared_count <= min_k,
            "simulate: shared_count exceeds smallest view's source count");
    require(samples >= 2, "simulate: need >= 2 samples");
    return dims;
  }

  std::vector<double> resolved_sigma() const {
    std::vector<double> s = noise_sigma;
    if (s.empty()) s.assign(static_cast<std::size_t>(n_views), 0.0);
    if (s.size() == 1)
      s.assign(static_cast<std::size_t>(n_views), s.front());
    require(s.size() == static_cast<std::size_t>(n_views),
            "simulate: noise_sigma must have one value or one per view");
    for (double v : s) require(v >= 0.0, "simulate: noise sigma must be >= 0");
    return s;
  }
};

struct SimulationResult {
  MultiViewDataset data;
  GenerativeGroundTruth truth;
};

// Shifts and scales each row to exact sample mean 0 and population variance 1
// (1/N normalization), so whitened recovery targets unit-variance sources.
inline void standardize_rows(Matrix& m) {
  const double n = static_cast<double>(m.cols());
  for (Index i = 0; i < m.rows(); ++i) {
    m.row(i).array() -= m.row(i).mean();
    const double sd = std::sqrt(m.row(i).squaredNorm() / n);
    if (sd < 1e-12)
      throw NumericalError("standardize_rows: zero-variance row");
    m.row(i) /= sd;
  }
}

namespace detail {

inline Matrix sample_sources(Rng& rng, Index rows, Index cols, SourceLaw law) {
  Matrix m = law == SourceLaw::kLaplace
                 ? rng.laplace_matrix(rows, cols)
                 // [-sqrt(3), sqrt(3)] has variance 1 before standardization
                 : rng.uniform_matrix(rows, cols, -std::sqrt(3.0),
                                      std::sqrt(3.0));
  if (rows > 0) standardize_rows(m);
  return m;
}

// Draws a well-conditioned mixing matrix, resampling on (exceedingly rare)
// near-singular draws.
inline Matrix sample_mixing(Rng& rng, Index k, double mean, double stddev) {
  for (int attempt = 0; attempt < 100; ++attempt) {
    Matrix a = rng.normal_matrix(k, k, mean, stddev);
    const double smin =
        Eigen::JacobiSVD<Matrix>(a).singularValues().minCoeff();
    if (smin >= 1e-6) return a;
  }
  throw NumericalError("simulate: could not draw an invertible mixing matrix");
}

}  // namespace detail

// Draws from the generative model: x_d = A_d (s_d + noise_d) where s_d stacks
// the shared sources on top of view d's individual sources.  Per-view draws
// come from independent substreams (stream 0: shared sources; stream 1+d:
// view d's individual sources, then noise, then mixing), so adding views or
// changing the noise scale never perturbs the other draws.
inline SimulationResult simulate(const SimulationConfig& cfg) {
  const std::vector<Index> dims = cfg.resolved_dims();
  const std::vector<double> sigma = cfg.resolved_sigma();
  require(cfg.mixing_std >= 0.0, "simulate: mixing_std must be >= 0");

  GenerativeGroundTruth truth;
  truth.shared_count = cfg.shared_count;
  truth.noise_sigma = sigma;

  Rng shared_rng = Rng::stream(cfg.seed, 0);
  truth.shared_sources = detail::sample_sources(shared_rng, cfg.shared_count,
                                                cfg.samples, cfg.source_law);

  std::vector<Matrix> views;
  for (std::size_t d = 0; d < dims.size(); ++d) {
    Rng rng = Rng::stream(cfg.seed, 1 + static_cast<std::uint64_t>(d));
    const Index k = dims[d];
    truth.individual_sources.push_back(detail::sample_sources(
        rng, k - cfg.shared_count, cfg.samples, cfg.source_law));
    const Matrix noise = rng.normal_matrix(k, cfg.samples, 0.0, 1.0);
    truth.mixing.push_back(
        detail::sample_mixing(rng, k, cfg.mixing_mean, cfg.mixing_std));
    views.push_back(truth.mixing[d] *
                    (truth.sources(d) + sigma[d] * noise));
  }
  truth.validate();
  return SimulationResult{MultiViewDataset(std::move(views)),
                          std::move(truth)};
}

}  // namespace mvbss
