#pragma once

#include "mvbss/common.hpp"

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace mvbss {

namespace detail {

// splitmix64 finalizer; used to derive well-separated engine seeds from a
// user seed and a stream index so that adding streams never perturbs the
// draws of existing ones.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace detail

// Deterministic random stream.  All library sampling goes through this class
// so results are reproducible across platforms for a fixed seed.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Derives an independent substream: stream(seed, i) and stream(seed, j)
  // are decorrelated for i != j.
  static Rng stream(std::uint64_t seed, std::uint64_t stream_id) {
    return Rng(detail::splitmix64(detail::splitmix64(seed) + stream_id));
  }

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on [0, 1) with 53 random bits.
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Unbiased integer in [0, bound) by rejection.
  std::uint64_t below(std::uint64_t bound) {
    require(bound > 0, "Rng::below: bound must be positive");
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % bound);
    std::uint64_t v = next_u64();
    while (v >= limit) v = next_u64();
    return v % bound;
  }

  // Standard normal via Box-Muller (cosine branch, stateless: two uniforms
  // per draw, so consumption per call is fixed).
  double normal() {
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  // Standard Laplace (density exp(-|x|)/2) by inverse CDF.
  double laplace() {
    double u = uniform();
    while (u == 0.0) u = uniform();  // avoid log(0) at the left edge
    const double c = u - 0.5;
    return c < 0.0 ? std::log1p(2.0 * c) : -std::log1p(-2.0 * c);
  }

  Matrix normal_matrix(Index rows, Index cols, double mean = 0.0,
                       double stddev = 1.0) {
    Matrix m(rows, cols);
    for (Index j = 0; j < cols; ++j)
      for (Index i = 0; i < rows; ++i) m(i, j) = normal(mean, stddev);
    return m;
  }

  Matrix laplace_matrix(Index rows, Index cols) {
    Matrix m(rows, cols);
    for (Index j = 0; j < cols; ++j)
      for (Index i = 0; i < rows; ++i) m(i, j) = laplace();
    return m;
  }

  Matrix uniform_matrix(Index rows, Index cols, double lo, double hi) {
    Matrix m(rows, cols);
    for (Index j = 0; j < cols; ++j)
      for (Index i = 0; i < rows; ++i) m(i, j) = uniform(lo, hi);
    return m;
  }

  // Fisher-Yates shuffle of 0..n-1.
  std::vector<Index> permutation(Index n) {
    std::vector<Index> p(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) p[static_cast<std::size_t>(i)] = i;
    for (Index i = n - 1; i > 0; --i) {
      const Index j = static_cast<Index>(below(static_cast<std::uint64_t>(i) + 1));
      std::swap(p[static_cast<std::size_t>(i)], p[static_cast<std::size_t>(j)]);
    }
    return p;
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace mvbss
