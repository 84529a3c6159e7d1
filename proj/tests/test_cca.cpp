#include <catch2/catch_amalgamated.hpp>

#include "mvbss/cca.hpp"
#include "mvbss/rng.hpp"
#include "mvbss/whitening.hpp"

#include <cmath>
#include <vector>

using namespace mvbss;

namespace {

// Pool of exactly-whitened rows: sample covariance is the identity, so any
// row subset is itself exactly white.
Matrix white_pool(Index rows, Index n, std::uint64_t seed) {
  Rng rng = Rng::stream(seed, 0);
  const Matrix raw = rng.laplace_matrix(rows, n);
  const WhiteningTransform t = fit_whitening(raw, Retain::all());
  return t.apply(raw);
}

// Planted-overlap construction: every view sees the same `shared` leading
// rows of the pool plus its own private rows, mixed by a random rotation.
struct Planted {
  std::vector<Matrix> views;
  Matrix shared;  // c x n ground truth
};

Planted planted_views(std::size_t nviews, Index shared, Index individual,
                      Index n, std::uint64_t seed) {
  const Index rows = shared + static_cast<Index>(nviews) * individual;
  const Matrix pool = white_pool(rows, n, seed);
  Planted p;
  p.shared = pool.topRows(shared);
  Rng rng = Rng::stream(seed, 99);
  for (std::size_t d = 0; d < nviews; ++d) {
    const Index r = shared + individual;
    Matrix b(r, n);
    b.topRows(shared) = p.shared;
    b.bottomRows(individual) = pool.middleRows(
        shared + static_cast<Index>(d) * individual, individual);
    const Matrix u = qr_orthonormalize(rng.normal_matrix(r, r));
    p.views.push_back(u * b);
  }
  return p;
}

// || est est^T / n - I || and cross-orthogonality of est against truth:
// est spans the same subspace as truth iff est = Q truth with Q orthogonal.
void check_recovers_subspace(const Matrix& est, const Matrix& truth, Index n,
                             double tol) {
  const Matrix q = est * truth.transpose() / static_cast<double>(n);
  CHECK(max_abs(Matrix(q * q.transpose()) -
                Matrix::Identity(q.rows(), q.rows())) < tol);
}

}  // namespace

TEST_CASE("two-view initializer recovers a planted shared subspace", "[cca]") {
  const Planted p = planted_views(2, 2, 2, 600, 21);
  const InitResult res = cca_initialize(p.views, 1234);

  REQUIRE(res.initial_unmixing.size() == 2);
  for (const Matrix& w : res.initial_unmixing)
    CHECK(orthogonality_error(w) <= 1e-8);

  REQUIRE(res.canonical_correlations.size() == 4);
  // Exactly shared rows give canonical correlations (1, 1, 0, 0).
  CHECK(res.canonical_correlations[0] == Catch::Approx(1.0).margin(1e-10));
  CHECK(res.canonical_correlations[1] == Catch::Approx(1.0).margin(1e-10));
  CHECK(std::abs(res.canonical_correlations[2]) < 1e-7);
  CHECK(std::abs(res.canonical_correlations[3]) < 1e-7);

  for (std::size_t d = 0; d < 2; ++d) {
    const Matrix est = (res.initial_unmixing[d] * p.views[d]).topRows(2);
    check_recovers_subspace(est, p.shared, 600, 1e-8);
  }
}

TEST_CASE("canonical correlations are sorted non-increasing", "[cca]") {
  const Planted p = planted_views(2, 3, 3, 400, 22);
  const InitResult res = cca_initialize(p.views, 0);
  const Vector& c = res.canonical_correlations;
  for (Index i = 1; i < c.size(); ++i) CHECK(c[i] <= c[i - 1] + 1e-12);
  CHECK(c.maxCoeff() <= 1.0);
  CHECK(c.minCoeff() >= -1.0);
}

TEST_CASE("two-view initializer pads unequal dimensions", "[cca]") {
  Rng rng = Rng::stream(23, 0);
  const Matrix pool = white_pool(7, 300, 23);
  std::vector<Matrix> views;
  const Matrix u1 = qr_orthonormalize(rng.normal_matrix(4, 4));
  const Matrix u2 = qr_orthonormalize(rng.normal_matrix(3, 3));
  views.push_back(u1 * pool.topRows(4));
  views.push_back(u2 * pool.middleRows(2, 3));  // overlap rows 2,3

  const InitResult res = cca_initialize(views, 7);
  REQUIRE(res.initial_unmixing.size() == 2);
  CHECK(res.initial_unmixing[0].rows() == 4);
  CHECK(res.initial_unmixing[0].cols() == 4);
  CHECK(res.initial_unmixing[1].rows() == 3);
  CHECK(res.initial_unmixing[1].cols() == 3);
  CHECK(res.canonical_correlations.size() == 3);
  CHECK(orthogonality_error(res.initial_unmixing[0]) <= 1e-8);
  CHECK(orthogonality_error(res.initial_unmixing[1]) <= 1e-8);
  // Two overlapping rows: correlations (1, 1, 0).
  CHECK(res.canonical_correlations[0] == Catch::Approx(1.0).margin(1e-10));
  CHECK(res.canonical_correlations[1] == Catch::Approx(1.0).margin(1e-10));
  CHECK(std::abs(res.canonical_correlations[2]) < 1e-7);
}

TEST_CASE("multiview initializer recovers the shared subspace", "[cca]") {
  const Planted p = planted_views(4, 2, 2, 800, 24);
  const InitResult res = cca_initialize(p.views, 42);

  REQUIRE(res.initial_unmixing.size() == 4);
  for (const Matrix& w : res.initial_unmixing)
    CHECK(orthogonality_error(w) <= 1e-8);

  // Perfectly shared directions score 1; the rest stay clearly below.
  CHECK(res.canonical_correlations[0] == Catch::Approx(1.0).margin(1e-6));
  CHECK(res.canonical_correlations[1] == Catch::Approx(1.0).margin(1e-6));
  CHECK(res.canonical_correlations[2] < 0.6);

  for (std::size_t d = 0; d < 4; ++d) {
    const Matrix est = (res.initial_unmixing[d] * p.views[d]).topRows(2);
    check_recovers_subspace(est, p.shared, 800, 1e-6);
  }
}

TEST_CASE("initializer is deterministic given the completion seed", "[cca]") {
  const Planted p = planted_views(3, 2, 1, 350, 25);
  const InitResult a = cca_initialize(p.views, 5);
  const InitResult b = cca_initialize(p.views, 5);
  for (std::size_t d = 0; d < 3; ++d)
    CHECK(max_abs(a.initial_unmixing[d] - b.initial_unmixing[d]) == 0.0);
}

TEST_CASE("unwhitened input is rejected", "[cca]") {
  const Planted p = planted_views(2, 2, 2, 300, 26);
  std::vector<Matrix> scaled = p.views;
  scaled[0] *= 2.0;  // covariance now 4I
  CHECK_THROWS_AS(cca_initialize(scaled, 0), ValidationError);
}

TEST_CASE("initializer needs at least two views and two samples", "[cca]") {
  const Matrix z = white_pool(3, 100, 27);
  CHECK_THROWS_AS(cca_initialize({z}, 0), ValidationError);
  std::vector<Matrix> tiny = {Matrix::Zero(2, 1), Matrix::Zero(2, 1)};
  CHECK_THROWS_AS(cca_initialize(tiny, 0), ValidationError);
}
