#pragma once

#include "mvbss/estimator.hpp"
#include "mvbss/rng.hpp"

#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>
#include <utility>
#include <vector>

namespace mvbss {

// Per-sample disagreement of the views' shared-source estimates: for sample i
//   score_i = sum_d || z_d^i - zbar^i ||^2 / k,
// where z_d is view d's k x N shared block and zbar the cross-view mean.
// Perfectly shared sources give 0; unrelated rows push the score up.
inline Vector nre_scores(const std::vector<Matrix>& shared_blocks) {
  require(shared_blocks.size() >= 2, "nre: need at least two views");
  const Index k = shared_blocks[0].rows();
  const Index n = shared_blocks[0].cols();
  require(k >= 1, "nre: shared blocks must have >= 1 row");
  require(n >= 1, "nre: shared blocks must have >= 1 sample");
  Matrix mean = Matrix::Zero(k, n);
  for (const Matrix& z : shared_blocks) {
    require(z.rows() == k && z.cols() == n,
            "nre: shared blocks differ in shape");
    mean += z;
  }
  mean /= static_cast<double>(shared_blocks.size());
  Vector scores = Vector::Zero(n);
  for (const Matrix& z : shared_blocks)
    scores += (z - mean).colwise().squaredNorm();
  return scores / static_cast<double>(k);
}

inline double nre_mean(const std::vector<Matrix>& shared_blocks) {
  return nre_scores(shared_blocks).mean();
}

struct SelectionConfig {
  std::vector<Index> k_grid;
  FitConfig fit;
  double train_fraction = 0.75;
  int repetitions = 50;
  std::uint64_t seed = 0;
  int threads = 1;
  // Relative width of the near-minimum plateau: every k whose mean score is
  // within (1 + plateau_rtol) of the best one counts as minimal, and the
  // largest such k is selected.  The validation score is flat for k at or
  // below the true shared count (extra capacity costs nothing on held-out
  // splits), so a pure argmin would pick an arbitrary point of that plateau;
  // preferring its right edge recovers the count where the score takes off.
  double plateau_rtol = 0.05;

  void validate() const {
    require(!k_grid.empty(), "select_shared_count: empty k grid");
    for (Index k : k_grid)
      require(k >= 1, "select_shared_count: grid values must be >= 1");
    require(train_fraction > 0.0 && train_fraction < 1.0,
            "select_shared_count: train_fraction must be in (0, 1)");
    require(repetitions >= 1, "select_shared_count: repetitions must be >= 1");
    require(threads >= 1, "select_shared_count: threads must be >= 1");
    require(plateau_rtol >= 0.0,
            "select_shared_count: plateau_rtol must be >= 0");
  }
};

struct SelectionReport {
  std::vector<Index> k_grid;
  Matrix nre;                      // repetitions x |k_grid|
  std::vector<double> mean_nre;    // column means of `nre`
  Index selected = 0;
  double train_fraction = 0.0;
  int repetitions = 0;
  std::uint64_t seed = 0;
};

// Plateau rule on a mean-score curve: the largest k whose score is within
// (1 + rtol) of the minimum.  The tiny absolute slack keeps exact ties at a
// zero floor (where a relative window degenerates) from being split by
// rounding noise.
inline Index select_from_curve(const std::vector<Index>& k_grid,
                               const std::vector<double>& mean_scores,
                               double rtol) {
  require(!k_grid.empty() && k_grid.size() == mean_scores.size(),
          "select_from_curve: grid and scores must align and be non-empty");
  require(rtol >= 0.0, "select_from_curve: rtol must be >= 0");
  double best = mean_scores[0];
  for (double v : mean_scores) best = std::min(best, v);
  const double cutoff = best * (1.0 + rtol) + 1e-12;
  Index selected = 0;
  for (std::size_t ki = 0; ki < k_grid.size(); ++ki)
    if (mean_scores[ki] <= cutoff) selected = std::max(selected, k_grid[ki]);
  return selected;
}

// Chooses the number of shared sources by refitting on random train/validation
// splits: for every repetition one split is drawn and shared across the whole
// grid, a model with k shared sources is fit on the training columns, and the
// validation columns are scored.  The selected k is the largest one on the
// near-minimum plateau of the mean score (see SelectionConfig::plateau_rtol).
inline SelectionReport select_shared_count(const MultiViewDataset& data,
                                           const SelectionConfig& cfg) {
  cfg.validate();
  const Index n = data.sample_count();
  const Index train_n = static_cast<Index>(std::llround(
      cfg.train_fraction * static_cast<double>(n)));
  require(train_n >= 2 && n - train_n >= 1,
          "select_shared_count: split leaves too few columns");

  SelectionReport report;
  report.k_grid = cfg.k_grid;
  report.train_fraction = cfg.train_fraction;
  report.repetitions = cfg.repetitions;
  report.seed = cfg.seed;
  report.nre = Matrix::Zero(cfg.repetitions, static_cast<Index>(cfg.k_grid.size()));

  // Tasks (one per repetition) only write disjoint rows of the report, so a
  // counter-driven worker pool needs no further synchronization.
  std::atomic<int> next{0};
  std::mutex error_mutex;
  std::exception_ptr error;
  const auto worker = [&]() {
    for (int rep = next.fetch_add(1); rep < cfg.repetitions;
         rep = next.fetch_add(1)) {
      try {
        Rng rng = Rng::stream(cfg.seed, static_cast<std::uint64_t>(rep));
        const std::vector<Index> perm = rng.permutation(n);
        const std::vector<Index> train_idx(perm.begin(),
                                           perm.begin() + train_n);
        const std::vector<Index> test_idx(perm.begin() + train_n, perm.end());
        const MultiViewDataset train = data.columns(train_idx);
        const MultiViewDataset test = data.columns(test_idx);
        for (std::size_t ki = 0; ki < cfg.k_grid.size(); ++ki) {
          const FittedModel model = fit(train, cfg.k_grid[ki], cfg.fit);
          const SourceEstimates est = transform(model, test);
          std::vector<Matrix> shared;
          shared.reserve(est.z.size());
          for (std::size_t d = 0; d < est.z.size(); ++d)
            shared.push_back(est.shared(d));
          report.nre(rep, static_cast<Index>(ki)) = nre_mean(shared);
        }
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
        return;
      }
    }
  };

  const int nthreads =
      std::min<int>(cfg.threads, std::max(1, cfg.repetitions));
  if (nthreads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(nthreads));
    for (int t = 0; t < nthreads; ++t) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }
  if (error) std::rethrow_exception(error);

  report.mean_nre.resize(cfg.k_grid.size());
  for (std::size_t ki = 0; ki < cfg.k_grid.size(); ++ki)
    report.mean_nre[ki] = report.nre.col(static_cast<Index>(ki)).mean();

  report.selected =
      select_from_curve(cfg.k_grid, report.mean_nre, cfg.plateau_rtol);
  return report;
}

}  // namespace mvbss
