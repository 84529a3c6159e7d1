#include <catch2/catch_amalgamated.hpp>

#include "mvbss/estimator.hpp"
#include "mvbss/metrics.hpp"
#include "mvbss/simulate.hpp"

#include <cmath>

using namespace mvbss;

namespace {

SimulationResult easy_instance(std::uint64_t seed, double sigma = 0.0) {
  SimulationConfig cfg;
  cfg.n_views = 2;
  cfg.sources_per_view = 6;
  cfg.shared_count = 3;
  cfg.samples = 2000;
  cfg.noise_sigma = {sigma};
  cfg.seed = seed;
  return simulate(cfg);
}

FitConfig default_fit() {
  FitConfig cfg;
  cfg.optimizer.gradient_tolerance = 1e-6;
  cfg.optimizer.max_iterations = 300;
  return cfg;
}

}  // namespace

TEST_CASE("noiseless fit recovers mixing and shared sources", "[estimator]") {
  const SimulationResult sim = easy_instance(31);
  const FittedModel model = fit(sim.data, 3, default_fit());

  CHECK(model.converged());
  CHECK(model.shared_count() == 3);
  REQUIRE(model.view_count() == 2);

  for (std::size_t d = 0; d < 2; ++d) {
    const double dist = amari_distance_normalized(sim.truth.mixing[d],
                                                  model.mixing_estimates()[d]);
    INFO("view " << d << " normalized amari " << dist);
    CHECK(dist < 0.05);
  }

  const Matrix shared = extract_shared(model, sim.data);
  const MccResult m = mcc(shared, sim.truth.shared_sources);
  CHECK(m.mcc > 0.95);
}

TEST_CASE("moderate noise still yields usable shared sources", "[estimator]") {
  const SimulationResult sim = easy_instance(32, 0.1);
  const FittedModel model = fit(sim.data, 3, default_fit());
  const Matrix shared = extract_shared(model, sim.data);
  const MccResult m = mcc(shared, sim.truth.shared_sources);
  CHECK(m.mcc > 0.85);
}

TEST_CASE("fitting is deterministic", "[estimator]") {
  const SimulationResult sim = easy_instance(33);
  const FittedModel a = fit(sim.data, 2, default_fit());
  const FittedModel b = fit(sim.data, 2, default_fit());
  for (std::size_t d = 0; d < 2; ++d) {
    CHECK(max_abs(a.unmixing_whitened()[d] - b.unmixing_whitened()[d]) == 0.0);
    CHECK(max_abs(a.mixing_estimates()[d] - b.mixing_estimates()[d]) == 0.0);
  }
  REQUIRE(a.objective_trace().size() == b.objective_trace().size());
  CHECK(a.objective_trace().back() == b.objective_trace().back());
}

TEST_CASE("model invariants hold after fitting", "[estimator]") {
  const SimulationResult sim = easy_instance(34, 0.05);
  const FittedModel model = fit(sim.data, 3, default_fit());

  for (std::size_t d = 0; d < 2; ++d) {
    CHECK(orthogonality_error(model.unmixing_whitened()[d]) <= 1e-8);
    // Data-space mixing estimate is K^+ W^T by construction.
    const Matrix expected = model.whitening()[d].inverse() *
                            model.unmixing_whitened()[d].transpose();
    CHECK(max_abs(model.mixing_estimates()[d] - expected) < 1e-12);
  }
  const std::vector<double>& trace = model.objective_trace();
  REQUIRE(!trace.empty());
  for (std::size_t i = 1; i < trace.size(); ++i)
    CHECK(trace[i] <=
          trace[i - 1] + 1e-9 * std::max(1.0, std::abs(trace[i - 1])));
}

TEST_CASE("transform reproduces training sources and handles new samples",
          "[estimator]") {
  const SimulationResult sim = easy_instance(35);
  const FittedModel model = fit(sim.data, 3, default_fit());

  const SourceEstimates est = transform(model, sim.data);
  REQUIRE(est.z.size() == 2);
  CHECK(est.shared_count == 3);
  CHECK(est.z[0].rows() == 6);
  CHECK(est.z[0].cols() == 2000);
  CHECK(est.shared_mean.rows() == 3);

  // Whitened training sources have unit energy per row on average.
  const double energy = est.z[0].squaredNorm() / (6.0 * 2000.0);
  CHECK(energy == Catch::Approx(1.0).epsilon(1e-6));

  // A held-out slice transforms consistently with the full pass.
  std::vector<Index> head;
  for (Index t = 0; t < 100; ++t) head.push_back(t);
  const SourceEstimates sub = transform(model, sim.data.columns(head));
  CHECK(max_abs(sub.z[0] - est.z[0].leftCols(100)) < 1e-12);

  // Zero-sample transform yields empty, well-shaped estimates.
  const SourceEstimates none =
      transform(model, std::vector<Matrix>{Matrix(6, 0), Matrix(6, 0)});
  CHECK(none.z[0].cols() == 0);
  CHECK(none.shared_mean.cols() == 0);
}

TEST_CASE("retention policy shrinks the working dimension", "[estimator]") {
  const SimulationResult sim = easy_instance(36);
  FitConfig cfg = default_fit();
  cfg.retain = Retain::dims(4);
  const FittedModel model = fit(sim.data, 3, cfg);
  CHECK(model.whitening()[0].retained_dim() == 4);
  CHECK(model.unmixing_whitened()[0].rows() == 4);
  CHECK(model.mixing_estimates()[0].rows() == 6);
  CHECK(model.mixing_estimates()[0].cols() == 4);
  const SourceEstimates est = transform(model, sim.data);
  CHECK(est.z[0].rows() == 4);
}

TEST_CASE("invalid shared count is rejected", "[estimator]") {
  const SimulationResult sim = easy_instance(37);
  CHECK_THROWS_AS(fit(sim.data, 7, default_fit()), ValidationError);
  CHECK_THROWS_AS(fit(sim.data, -1, default_fit()), ValidationError);
}

TEST_CASE("fit requires at least two views", "[estimator]") {
  SimulationConfig cfg;
  cfg.n_views = 1;
  cfg.sources_per_view = 3;
  cfg.shared_count = 0;
  cfg.samples = 100;
  cfg.seed = 38;
  const SimulationResult sim = simulate(cfg);
  CHECK_THROWS_AS(fit(sim.data, 0, default_fit()), ValidationError);
}

TEST_CASE("gauss nonlinearity fits the same data", "[estimator]") {
  const SimulationResult sim = easy_instance(39);
  FitConfig cfg = default_fit();
  cfg.nonlinearity = Nonlinearity::kGauss;
  const FittedModel model = fit(sim.data, 3, cfg);
  const Matrix shared = extract_shared(model, sim.data);
  const MccResult m = mcc(shared, sim.truth.shared_sources);
  CHECK(m.mcc > 0.9);
}

TEST_CASE("lambda is recorded and must be positive", "[estimator]") {
  const SimulationResult sim = easy_instance(40);
  FitConfig cfg = default_fit();
  cfg.lambda = 2.5;
  const FittedModel model = fit(sim.data, 2, cfg);
  CHECK(model.lambda() == 2.5);
  cfg.lambda = 0.0;
  CHECK_THROWS_AS(fit(sim.data, 2, cfg), ValidationError);
}
