#include <catch2/catch_amalgamated.hpp>

#include "mvbss/metrics.hpp"
#include "mvbss/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

using namespace mvbss;

namespace {

Matrix random_invertible(Index n, Rng& rng) {
  for (;;) {
    const Matrix a = rng.normal_matrix(n, n);
    Eigen::FullPivLU<Matrix> lu(a);
    if (lu.isInvertible()) return a;
  }
}

Matrix scaled_permutation(Index n, Rng& rng) {
  const std::vector<Index> p = rng.permutation(n);
  Matrix m = Matrix::Zero(n, n);
  for (Index i = 0; i < n; ++i) {
    double s = rng.uniform(0.5, 3.0);
    if (rng.uniform() < 0.5) s = -s;
    m(i, p[static_cast<std::size_t>(i)]) = s;
  }
  return m;
}

// Exhaustive assignment minimum for n rows into m >= n columns.
double brute_force_cost(const Matrix& cost) {
  const Index n = cost.rows();
  const Index m = cost.cols();
  if (n > m) return brute_force_cost(cost.transpose());
  std::vector<Index> cols(static_cast<std::size_t>(m));
  std::iota(cols.begin(), cols.end(), Index{0});
  double best = std::numeric_limits<double>::infinity();
  std::sort(cols.begin(), cols.end());
  do {
    double total = 0.0;
    for (Index i = 0; i < n; ++i)
      total += cost(i, cols[static_cast<std::size_t>(i)]);
    best = std::min(best, total);
  } while (std::next_permutation(cols.begin(), cols.end()));
  return best;
}

}  // namespace

TEST_CASE("amari distance hand value", "[metrics]") {
  Matrix a = Matrix::Identity(2, 2);
  Matrix b(2, 2);
  b << 1.0, 1.0, 0.0, 1.0;
  // C = [[1,1],[0,1]]: row sums (2-1)+(1-1)=1, column sums likewise.
  CHECK(amari_distance(a, b) == Catch::Approx(2.0).epsilon(1e-14));
}

TEST_CASE("amari distance vanishes exactly on scaled permutations",
          "[metrics]") {
  Rng rng = Rng::stream(61, 0);
  double worst = 0.0;
  for (int rep = 0; rep < 100; ++rep) {
    const Index n = 2 + static_cast<Index>(rng.below(6));
    const Matrix a = random_invertible(n, rng);
    const Matrix b = a * scaled_permutation(n, rng);
    worst = std::max(worst, amari_distance(a, b));
  }
  CHECK(worst <= 1e-10);
}

TEST_CASE("amari distance is positive off the equivalence class", "[metrics]") {
  Rng rng = Rng::stream(62, 0);
  for (int rep = 0; rep < 10; ++rep) {
    const Matrix a = random_invertible(4, rng);
    const Matrix b = random_invertible(4, rng);
    CHECK(amari_distance(a, b) > 0.1);
  }
}

TEST_CASE("normalized amari divides by twice the pair count", "[metrics]") {
  Rng rng = Rng::stream(63, 0);
  const Matrix a = random_invertible(5, rng);
  const Matrix b = random_invertible(5, rng);
  CHECK(amari_distance_normalized(a, b) ==
        Catch::Approx(amari_distance(a, b) / 40.0).epsilon(1e-14));
}

TEST_CASE("amari distance rejects malformed input", "[metrics]") {
  CHECK_THROWS_AS(amari_distance(Matrix::Zero(2, 3), Matrix::Zero(2, 3)),
                  ValidationError);
  CHECK_THROWS_AS(amari_distance(Matrix::Zero(3, 3), Matrix::Zero(2, 2)),
                  ValidationError);
  CHECK_THROWS_AS(amari_distance(Matrix::Zero(2, 2), Matrix::Identity(2, 2)),
                  NumericalError);  // singular first argument
}

TEST_CASE("assignment solver matches brute force on small instances",
          "[metrics]") {
  Rng rng = Rng::stream(64, 0);
  for (int rep = 0; rep < 200; ++rep) {
    const Index n = 1 + static_cast<Index>(rng.below(6));
    const Index m = 1 + static_cast<Index>(rng.below(6));
    const Matrix cost = rng.uniform_matrix(n, m, -5.0, 5.0);
    const Assignment got = hungarian(cost);
    const double want = brute_force_cost(cost);
    CHECK(got.total_cost == Catch::Approx(want).margin(1e-10));

    // The assignment itself is a valid one-to-one matching of the smaller side.
    const std::size_t expected = static_cast<std::size_t>(std::min(n, m));
    REQUIRE(got.pairs.size() == expected);
    std::vector<Index> rows, cols;
    double total = 0.0;
    for (const auto& [r, c] : got.pairs) {
      REQUIRE(r >= 0);
      REQUIRE(r < n);
      REQUIRE(c >= 0);
      REQUIRE(c < m);
      rows.push_back(r);
      cols.push_back(c);
      total += cost(r, c);
    }
    CHECK(total == Catch::Approx(got.total_cost).margin(1e-12));
    std::sort(rows.begin(), rows.end());
    std::sort(cols.begin(), cols.end());
    CHECK(std::adjacent_find(rows.begin(), rows.end()) == rows.end());
    CHECK(std::adjacent_find(cols.begin(), cols.end()) == cols.end());
  }
}

TEST_CASE("assignment ties resolve to the lowest column index", "[metrics]") {
  const Assignment a = hungarian(Matrix::Zero(3, 3));
  REQUIRE(a.pairs.size() == 3);
  for (Index i = 0; i < 3; ++i) {
    CHECK(a.pairs[static_cast<std::size_t>(i)].first == i);
    CHECK(a.pairs[static_cast<std::size_t>(i)].second == i);
  }
  CHECK(a.total_cost == 0.0);
}

TEST_CASE("assignment pairs are sorted by row", "[metrics]") {
  Rng rng = Rng::stream(65, 0);
  const Assignment a = hungarian(rng.uniform_matrix(5, 7, 0.0, 1.0));
  for (std::size_t i = 1; i < a.pairs.size(); ++i)
    CHECK(a.pairs[i].first > a.pairs[i - 1].first);
}

TEST_CASE("mcc is exactly one under signed permutation and scaling",
          "[metrics]") {
  Rng rng = Rng::stream(66, 0);
  const Matrix truth = rng.laplace_matrix(5, 400);
  const std::vector<Index> p = rng.permutation(5);
  Matrix est(5, 400);
  for (Index i = 0; i < 5; ++i) {
    const double s = (i % 2 == 0 ? -2.5 : 0.7);
    est.row(i) = s * truth.row(p[static_cast<std::size_t>(i)]);
  }
  const MccResult res = mcc(est, truth);
  CHECK(res.mcc == Catch::Approx(1.0).margin(1e-12));
  // The matching must recover the planted permutation.
  REQUIRE(res.matching.pairs.size() == 5);
  for (const auto& [r, c] : res.matching.pairs)
    CHECK(c == p[static_cast<std::size_t>(r)]);
}

TEST_CASE("mcc degrades smoothly with additive noise", "[metrics]") {
  Rng rng = Rng::stream(67, 0);
  const Matrix truth = rng.laplace_matrix(4, 500);
  const Matrix est = truth + 0.05 * rng.normal_matrix(4, 500);
  const double score = mcc(est, truth).mcc;
  CHECK(score > 0.99);
  CHECK(score <= 1.0);

  const Matrix junk = rng.normal_matrix(4, 500);
  CHECK(mcc(junk, truth).mcc < 0.4);
}

TEST_CASE("mcc supports rectangular comparisons", "[metrics]") {
  Rng rng = Rng::stream(68, 0);
  const Matrix truth = rng.laplace_matrix(5, 300);
  const Matrix est = truth.topRows(3);
  const MccResult res = mcc(est, truth);
  CHECK(res.mcc == Catch::Approx(1.0).margin(1e-12));
  CHECK(res.matching.pairs.size() == 3);
}

TEST_CASE("mcc rejects mismatched sample counts", "[metrics]") {
  CHECK_THROWS_AS(mcc(Matrix::Random(2, 10), Matrix::Random(2, 11)),
                  ValidationError);
}
