// Command-line entry point: simulate / fit / transform / select-k / eval /
// glasso / pipeline / emit-curve.  Results are written as files, progress
// goes to standard error, and an optional --json flag emits a machine-
// readable summary (embedding the fully resolved configuration) on standard
// output.  Exit codes: 0 success, 1 usage error, 2 data/validation error,
// 3 numerical failure.
#include <CLI11.hpp>
#include <json.hpp>

#include "mvbss/glasso.hpp"
#include "mvbss/io.hpp"
#include "mvbss/metrics.hpp"
#include "mvbss/model_selection.hpp"
#include "mvbss/pipeline.hpp"
#include "mvbss/simulate.hpp"

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace mvbss;

namespace {

// ---------------------------------------------------------------------------
// Shared helpers

// Output paths honor one environment override: relative --out values are
// resolved under MVBSS_OUT_DIR when it is set.
fs::path resolve_out(const fs::path& p) {
  const char* base = std::getenv("MVBSS_OUT_DIR");
  if (base != nullptr && *base != '\0' && p.is_relative())
    return fs::path(base) / p;
  return p;
}

void ensure_parent(const fs::path& p) {
  const fs::path dir = p.parent_path();
  if (dir.empty()) return;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string());
}

void ensure_dir(const fs::path& p) {
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw IoError("cannot create directory " + p.string());
}

int default_threads() {
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

// Grid grammar: "a:b" (inclusive range) or a comma list such as "2,4,8".
std::vector<Index> parse_k_grid(const std::string& text) {
  const auto parse_int = [&](const std::string& tok) -> Index {
    std::size_t used = 0;
    long long v = 0;
    try {
      v = std::stoll(tok, &used);
    } catch (const std::exception&) {
      throw ValidationError("k-grid: cannot parse '" + tok + "'");
    }
    if (used != tok.size())
      throw ValidationError("k-grid: cannot parse '" + tok + "'");
    if (v < 1) throw ValidationError("k-grid: values must be >= 1");
    return static_cast<Index>(v);
  };
  if (text.empty()) throw ValidationError("k-grid: empty specification");
  std::vector<Index> grid;
  const std::size_t colon = text.find(':');
  if (colon != std::string::npos) {
    if (text.find(':', colon + 1) != std::string::npos ||
        text.find(',') != std::string::npos)
      throw ValidationError("k-grid: use either a:b or a comma list");
    const Index lo = parse_int(text.substr(0, colon));
    const Index hi = parse_int(text.substr(colon + 1));
    if (lo > hi) throw ValidationError("k-grid: range must be ascending");
    for (Index k = lo; k <= hi; ++k) grid.push_back(k);
    return grid;
  }
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = text.find(',', start);
    const std::string tok =
        text.substr(start, (comma == std::string::npos ? text.size() : comma) -
                               start);
    grid.push_back(parse_int(tok));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return grid;
}

// Retention grammar: "all", a positive integer (dimension count), or a
// fraction in (0, 1) (variance share).
Retain parse_retain(const std::string& text) {
  if (text == "all") return Retain::all();
  try {
    std::size_t used = 0;
    const long long count = std::stoll(text, &used);
    if (used == text.size()) {
      if (count < 1) throw ValidationError("retain: count must be >= 1");
      return Retain::dims(static_cast<Index>(count));
    }
    const double frac = std::stod(text, &used);
    if (used != text.size()) throw ValidationError("retain: trailing junk");
    return Retain::variance(frac);
  } catch (const ValidationError&) {
    throw;
  } catch (const std::exception&) {
    throw ValidationError("retain: expected 'all', a count, or a fraction");
  }
}

// CLI11 validators route grammar mistakes to usage errors (exit code 1).
std::string validate_k_grid(const std::string& text) {
  try {
    parse_k_grid(text);
  } catch (const ValidationError& e) {
    return std::string(e.what());
  }
  return {};
}

std::string validate_retain(const std::string& text) {
  try {
    parse_retain(text);
  } catch (const ValidationError& e) {
    return std::string(e.what());
  }
  return {};
}

void write_text_file(const fs::path& path, const std::string& body) {
  ensure_parent(path);
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << body;
  if (!out) throw IoError("write failed for " + path.string());
}

std::string edges_csv(const std::vector<Edge>& edges) {
  std::string body = "i,j,strength,rank\n";
  int rank = 1;
  for (const Edge& e : edges) {
    body += std::to_string(e.i) + ',' + std::to_string(e.j) + ',' +
            io_detail::format_double(e.strength) + ',' +
            std::to_string(rank++) + '\n';
  }
  return body;
}

void emit_summary(bool enabled, const json& j) {
  if (enabled) std::cout << j.dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// Per-subcommand option bags

struct FitFlags {
  double lambda = 1.0;
  std::string nonlinearity = "logcosh";
  std::string retain = "all";
  int max_iter = 500;
  double tol = 1e-7;
  std::uint64_t seed = 0;

  FitConfig to_config(double stagnation_tol = 0.0) const {
    FitConfig cfg;
    cfg.lambda = lambda;
    cfg.nonlinearity = nonlinearity_from_string(nonlinearity);
    cfg.retain = parse_retain(retain);
    cfg.optimizer.max_iterations = max_iter;
    cfg.optimizer.gradient_tolerance = tol;
    cfg.optimizer.objective_stagnation_tol = stagnation_tol;
    cfg.seed = seed;
    return cfg;
  }

  json to_json() const {
    return json{{"lambda", lambda},       {"nonlinearity", nonlinearity},
                {"retain", retain},       {"max_iter", max_iter},
                {"tol", tol},             {"seed", seed}};
  }
};

// Registers the shared model-fitting flags on a subcommand.  The seed flag
// is skipped for subcommands that already own a --seed (the fit then reuses
// that procedure seed).
void add_fit_flags(CLI::App* cmd, FitFlags& f, bool add_seed = true) {
  cmd->add_option("--lambda", f.lambda, "Coupling strength for shared rows")
      ->capture_default_str();
  cmd->add_option("--nonlinearity", f.nonlinearity, "Source contrast")
      ->check(CLI::IsMember({"logcosh", "gauss"}))
      ->capture_default_str();
  cmd->add_option("--retain", f.retain,
                  "Whitening retention: 'all', a count, or a variance "
                  "fraction in (0,1)")
      ->check(CLI::Validator(validate_retain, "RETAIN"))
      ->capture_default_str();
  cmd->add_option("--max-iter", f.max_iter, "Optimizer iteration cap")
      ->capture_default_str();
  cmd->add_option("--tol", f.tol, "Optimizer gradient tolerance")
      ->capture_default_str();
  if (add_seed)
    cmd->add_option("--seed", f.seed, "Seed for the deterministic init")
        ->capture_default_str();
}

// ---------------------------------------------------------------------------
// simulate

struct SimulateFlags {
  int views = 2;
  int sources = 0;
  std::vector<int> per_view_sources;
  int shared = 0;
  Index samples = 0;
  std::vector<double> noise_sigma{0.0};
  std::string law = "laplace";
  double mixing_mean = 1.0;
  double mixing_std = 0.1;
  std::uint64_t seed = 0;
  std::string out;
  bool json_summary = false;
};

int run_simulate(const SimulateFlags& f) {
  SimulationConfig cfg;
  cfg.n_views = f.views;
  cfg.sources_per_view = f.sources;
  cfg.per_view_sources = f.per_view_sources;
  cfg.shared_count = f.shared;
  cfg.samples = f.samples;
  cfg.noise_sigma = f.noise_sigma;
  cfg.source_law = source_law_from_string(f.law);
  cfg.mixing_mean = f.mixing_mean;
  cfg.mixing_std = f.mixing_std;
  cfg.seed = f.seed;

  const fs::path dir = resolve_out(f.out);
  std::cerr << "simulate: " << f.views << " views, " << f.samples
            << " samples -> " << dir.string() << '\n';
  const SimulationResult sim = simulate(cfg);
  ensure_dir(dir);
  const fs::path manifest = save_dataset(dir, sim.data);
  const fs::path truth_path = dir / "truth.json";
  save_truth(truth_path, sim.truth);
  std::cerr << "simulate: wrote " << manifest.string() << " and "
            << truth_path.string() << '\n';

  json summary{
      {"command", "simulate"},
      {"manifest", manifest.string()},
      {"truth", truth_path.string()},
      {"config",
       {{"views", f.views},
        {"sources", f.sources},
        {"per_view_sources", f.per_view_sources},
        {"shared", f.shared},
        {"samples", f.samples},
        {"noise_sigma", f.noise_sigma},
        {"law", f.law},
        {"mixing_mean", f.mixing_mean},
        {"mixing_std", f.mixing_std},
        {"seed", f.seed}}}};
  emit_summary(f.json_summary, summary);
  return 0;
}

// ---------------------------------------------------------------------------
// fit

struct FitCmdFlags {
  std::string manifest;
  Index shared_k = 0;
  FitFlags fit;
  std::string out;
  bool json_summary = false;
};

int run_fit(const FitCmdFlags& f) {
  const MultiViewDataset data = load_dataset(f.manifest);
  std::cerr << "fit: " << data.view_count() << " views, "
            << data.sample_count() << " samples, shared k = " << f.shared_k
            << '\n';
  const FittedModel model = fit(data, f.shared_k, f.fit.to_config());
  const fs::path out = resolve_out(f.out);
  ensure_parent(out);
  save_model(out, model);

  const std::size_t iterations =
      model.objective_trace().empty() ? 0 : model.objective_trace().size() - 1;
  std::cerr << "fit: converged=" << (model.converged() ? "yes" : "no")
            << " iterations=" << iterations
            << " objective=" << model.objective_trace().back() << '\n';

  json dims = json::array();
  for (std::size_t d = 0; d < model.view_count(); ++d)
    dims.push_back(model.unmixing_whitened()[d].rows());
  json summary{{"command", "fit"},
               {"model", out.string()},
               {"converged", model.converged()},
               {"iterations", iterations},
               {"final_objective", model.objective_trace().back()},
               {"view_dims", dims},
               {"config", f.fit.to_json()}};
  summary["config"]["manifest"] = f.manifest;
  summary["config"]["shared_k"] = f.shared_k;
  emit_summary(f.json_summary, summary);
  return 0;
}

// ---------------------------------------------------------------------------
// transform

struct TransformFlags {
  std::string model;
  std::string manifest;
  std::string out;
  bool json_summary = false;
};

int run_transform(const TransformFlags& f) {
  const FittedModel model = load_model(f.model);
  const MultiViewDataset data = load_dataset(f.manifest);
  std::cerr << "transform: applying model to " << data.sample_count()
            << " samples\n";
  const SourceEstimates est = transform(model, data);

  const fs::path dir = resolve_out(f.out);
  ensure_dir(dir);
  json files = json::array();
  for (std::size_t d = 0; d < est.z.size(); ++d) {
    const fs::path p = dir / ("sources_" + data.names()[d] + ".csv");
    write_csv_matrix(p, est.z[d]);
    files.push_back(p.string());
  }
  const fs::path mean_path = dir / "shared_mean.csv";
  write_csv_matrix(mean_path, est.shared_mean);

  json summary{{"command", "transform"},
               {"sources", files},
               {"shared_mean", mean_path.string()},
               {"shared_count", est.shared_count},
               {"samples", est.shared_mean.cols()},
               {"config", {{"model", f.model}, {"manifest", f.manifest}}}};
  emit_summary(f.json_summary, summary);
  return 0;
}

// ---------------------------------------------------------------------------
// select-k

struct SelectKFlags {
  std::string manifest;
  std::string k_grid;
  double train_frac = 0.75;
  int reps = 10;
  double plateau_rtol = 0.05;
  std::uint64_t seed = 0;
  int threads = default_threads();
  FitFlags fit{1.0, "logcosh", "all", 200, 1e-5, 0};
  std::string out;
  bool json_summary = false;
};

int run_select_k(SelectKFlags f) {
  const MultiViewDataset data = load_dataset(f.manifest);
  SelectionConfig cfg;
  cfg.k_grid = parse_k_grid(f.k_grid);
  // Exploratory fits: a soft stagnation stop keeps the sweep affordable
  // without changing the score ranking.  The procedure seed also seeds the
  // per-fit deterministic initialization.
  f.fit.seed = f.seed;
  cfg.fit = f.fit.to_config(1e-9);
  cfg.train_fraction = f.train_frac;
  cfg.repetitions = f.reps;
  cfg.plateau_rtol = f.plateau_rtol;
  cfg.seed = f.seed;
  cfg.threads = f.threads;

  std::cerr << "select-k: grid of " << cfg.k_grid.size() << " values, "
            << f.reps << " repetitions, " << f.threads << " threads\n";
  const SelectionReport report = select_shared_count(data, cfg);
  std::cerr << "select-k: selected k = " << report.selected << '\n';

  json grid = json::array();
  for (Index k : report.k_grid) grid.push_back(k);
  json report_json{{"format_version", kFormatVersion},
                   {"command", "select-k"},
                   {"k_grid", grid},
                   {"selected", report.selected},
                   {"mean_nre", report.mean_nre},
                   {"nre", io_detail::matrix_to_json(report.nre)},
                   {"train_fraction", report.train_fraction},
                   {"repetitions", report.repetitions},
                   {"seed", report.seed},
                   {"threads", f.threads},
                   {"fit", f.fit.to_json()}};
  report_json["config"] = {{"manifest", f.manifest},
                           {"k_grid", f.k_grid},
                           {"train_frac", f.train_frac},
                           {"reps", f.reps},
                           {"plateau_rtol", f.plateau_rtol},
                           {"seed", f.seed},
                           {"threads", f.threads}};
  const fs::path out = resolve_out(f.out);
  ensure_parent(out);
  io_detail::save_json(out, report_json);

  json summary = report_json;
  summary["report"] = out.string();
  summary.erase("nre");  // keep the stdout summary small
  emit_summary(f.json_summary, summary);
  return 0;
}

// ---------------------------------------------------------------------------
// eval amari / eval mcc

struct EvalFlags {
  std::string model;
  std::string truth;
  std::string manifest;  // mcc only
  bool json_summary = false;
};

int run_eval_amari(const EvalFlags& f) {
  const FittedModel model = load_model(f.model);
  const GenerativeGroundTruth truth = load_truth(f.truth);
  require(model.view_count() == truth.mixing.size(),
          "eval amari: model and truth disagree on the view count");
  json per_view = json::array();
  double mean_raw = 0.0;
  double mean_norm = 0.0;
  for (std::size_t d = 0; d < model.view_count(); ++d) {
    const double raw =
        amari_distance(truth.mixing[d], model.mixing_estimates()[d]);
    const double norm = amari_distance_normalized(
        truth.mixing[d], model.mixing_estimates()[d]);
    mean_raw += raw;
    mean_norm += norm;
    per_view.push_back({{"view", d}, {"amari", raw}, {"normalized", norm}});
    if (!f.json_summary)
      std::cout << "view " << d << ": amari " << raw << " normalized " << norm
                << '\n';
  }
  mean_raw /= static_cast<double>(model.view_count());
  mean_norm /= static_cast<double>(model.view_count());
  if (!f.json_summary)
    std::cout << "mean: amari " << mean_raw << " normalized " << mean_norm
              << '\n';
  emit_summary(f.json_summary,
               json{{"command", "eval amari"},
                    {"per_view", per_view},
                    {"mean_amari", mean_raw},
                    {"mean_normalized", mean_norm},
                    {"config", {{"model", f.model}, {"truth", f.truth}}}});
  return 0;
}

int run_eval_mcc(const EvalFlags& f) {
  const FittedModel model = load_model(f.model);
  const GenerativeGroundTruth truth = load_truth(f.truth);
  const MultiViewDataset data = load_dataset(f.manifest);
  const SourceEstimates est = transform(model, data);
  require(truth.shared_sources.cols() == est.shared_mean.cols(),
          "eval mcc: truth and data sample counts differ");

  const double shared_score =
      mcc(est.shared_mean, truth.shared_sources).mcc;
  json per_view = json::array();
  for (std::size_t d = 0; d < est.z.size(); ++d) {
    const double view_score = mcc(est.z[d], truth.sources(d)).mcc;
    per_view.push_back({{"view", d}, {"mcc", view_score}});
    if (!f.json_summary)
      std::cout << "view " << d << ": mcc " << view_score << '\n';
  }
  if (!f.json_summary) std::cout << "shared: mcc " << shared_score << '\n';
  emit_summary(f.json_summary,
               json{{"command", "eval mcc"},
                    {"shared_mcc", shared_score},
                    {"per_view", per_view},
                    {"config",
                     {{"model", f.model},
                      {"truth", f.truth},
                      {"manifest", f.manifest}}}});
  return 0;
}

// ---------------------------------------------------------------------------
// glasso

struct GlassoFlags {
  std::string input;
  double lambda = -1.0;  // < 0 means "path mode"
  int grid_size = 30;
  double gamma = 0.5;
  double tol = 1e-6;
  int max_sweeps = 200;
  Index n_samples = 0;  // 0: use the input row count
  std::string out;
  std::string precision_out;
  std::string path_out;
  bool json_summary = false;
};

int run_glasso(const GlassoFlags& f) {
  // Rows are observations, columns the variables whose conditional
  // dependence graph is estimated.
  const Matrix observations = read_csv_matrix(f.input);
  const Matrix corr = correlation_matrix(observations);
  const Index n =
      f.n_samples > 0 ? f.n_samples : observations.rows();
  std::cerr << "glasso: " << corr.rows() << " variables from "
            << observations.rows() << " observations\n";

  PrecisionEstimate chosen;
  json path_json = json::array();
  if (f.lambda >= 0.0) {
    chosen = graphical_lasso(corr, f.lambda, f.tol, f.max_sweeps);
  } else {
    const std::vector<double> grid = lambda_grid(corr, f.grid_size);
    const std::vector<PrecisionEstimate> path =
        glasso_path(corr, grid, f.tol, f.max_sweeps);
    double best = std::numeric_limits<double>::infinity();
    std::string path_csv = "lambda,ebic,edge_count\n";
    for (const PrecisionEstimate& est : path) {
      const double score = ebic(est, corr, n, f.gamma);
      path_json.push_back({{"lambda", est.lambda},
                           {"ebic", score},
                           {"edge_count", est.edge_count()}});
      path_csv += io_detail::format_double(est.lambda) + ',' +
                  io_detail::format_double(score) + ',' +
                  std::to_string(est.edge_count()) + '\n';
      if (score < best) {
        best = score;
        chosen = est;
      }
    }
    if (!f.path_out.empty())
      write_text_file(resolve_out(f.path_out), path_csv);
  }

  const double score = ebic(chosen, corr, n, f.gamma);
  const std::vector<Edge> edges = chosen.edges();
  const fs::path out = resolve_out(f.out);
  write_text_file(out, edges_csv(edges));
  if (!f.precision_out.empty())
    write_csv_matrix(resolve_out(f.precision_out), chosen.theta);
  std::cerr << "glasso: lambda=" << chosen.lambda << " edges=" << edges.size()
            << " ebic=" << score << '\n';

  json summary{{"command", "glasso"},
               {"edges", out.string()},
               {"lambda", chosen.lambda},
               {"ebic", score},
               {"edge_count", edges.size()},
               {"kkt_residual", chosen.kkt_residual},
               {"converged", chosen.converged},
               {"config",
                {{"input", f.input},
                 {"lambda", f.lambda},
                 {"grid_size", f.grid_size},
                 {"gamma", f.gamma},
                 {"tol", f.tol},
                 {"max_sweeps", f.max_sweeps},
                 {"n_samples", n}}}};
  if (!path_json.empty()) summary["path"] = path_json;
  emit_summary(f.json_summary, summary);
  return 0;
}

// ---------------------------------------------------------------------------
// pipeline coregulation

struct PipelineFlags {
  std::string manifest;
  Index shared_k = 1;
  int grid_size = 30;
  double gamma = 0.5;
  int top = 10;
  FitFlags fit;
  std::string out;
  bool json_summary = false;
};

int run_pipeline(const PipelineFlags& f) {
  const MultiViewDataset data = load_dataset(f.manifest);
  require(data.view_count() == 2,
          "pipeline coregulation: exactly two views are required");
  PipelineConfig cfg;
  cfg.shared_count = f.shared_k;
  cfg.fit = f.fit.to_config();
  cfg.lambda_grid_size = f.grid_size;
  cfg.gamma = f.gamma;
  cfg.top_models = f.top;

  std::cerr << "pipeline: integrating two views over " << data.view(0).cols()
            << " feature columns\n";
  const PipelineResult result =
      coregulation_pipeline(data.view(0), data.view(1), cfg);

  const fs::path dir = resolve_out(f.out);
  ensure_dir(dir);
  const fs::path edges_path = dir / "edges.csv";
  const fs::path curve_path = dir / "ebic_path.csv";
  const fs::path corr_path = dir / "correlation.csv";
  const fs::path precision_path = dir / "precision.csv";

  const RankedModel& best = result.top_models.front();
  write_text_file(edges_path, edges_csv(best.estimate.edges()));
  std::string curve = "lambda,ebic,edge_count\n";
  for (std::size_t i = 0; i < result.grid.size(); ++i)
    curve += io_detail::format_double(result.grid[i]) + ',' +
             io_detail::format_double(result.ebic_scores[i]) + ',' +
             std::to_string(result.edge_counts[i]) + '\n';
  write_text_file(curve_path, curve);
  write_csv_matrix(corr_path, result.correlation);
  write_csv_matrix(precision_path, best.estimate.theta);
  std::cerr << "pipeline: best lambda=" << best.lambda
            << " ebic=" << best.ebic_score << " edges="
            << best.estimate.edge_count() << '\n';

  json tops = json::array();
  for (const RankedModel& m : result.top_models)
    tops.push_back({{"lambda", m.lambda},
                    {"ebic", m.ebic_score},
                    {"edge_count", m.estimate.edge_count()}});
  json summary{{"command", "pipeline coregulation"},
               {"edges", edges_path.string()},
               {"ebic_path", curve_path.string()},
               {"correlation", corr_path.string()},
               {"precision", precision_path.string()},
               {"stacked_rows", result.stacked_rows},
               {"grid", result.grid},
               {"ebic_scores", result.ebic_scores},
               {"top_models", tops},
               {"config",
                {{"manifest", f.manifest},
                 {"shared_k", f.shared_k},
                 {"grid_size", f.grid_size},
                 {"gamma", f.gamma},
                 {"top", f.top},
                 {"fit", f.fit.to_json()}}}};
  emit_summary(f.json_summary, summary);
  return 0;
}

// ---------------------------------------------------------------------------
// emit-curve

struct EmitCurveFlags {
  std::string report;
  std::string sweep;
  std::string out;
  bool json_summary = false;
};

int run_emit_curve(const EmitCurveFlags& f) {
  const fs::path out = resolve_out(f.out);
  std::string body;
  std::string kind;
  if (!f.report.empty()) {
    kind = "nre";
    const json j = io_detail::load_json(f.report);
    io_detail::check_version(j, "report");
    if (!j.contains("k_grid") || !j.at("k_grid").is_array() ||
        !j.contains("nre"))
      throw SchemaError("report: expected 'k_grid' and 'nre' fields");
    const Matrix nre = io_detail::matrix_from_json(j.at("nre"), "report nre");
    const auto grid = j.at("k_grid").get<std::vector<Index>>();
    if (static_cast<Index>(grid.size()) != nre.cols() && !grid.empty())
      throw SchemaError("report: k_grid length does not match the nre matrix");
    body = "k,nre_mean,nre_ci_low,nre_ci_high\n";
    const double reps = static_cast<double>(nre.rows());
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const auto col = nre.col(static_cast<Index>(i));
      const double mean = col.mean();
      double half = 0.0;
      if (nre.rows() > 1) {
        const double sd = std::sqrt((col.array() - mean).square().sum() /
                                    (reps - 1.0));
        half = 1.96 * sd / std::sqrt(reps);
      }
      body += std::to_string(grid[i]) + ',' +
              io_detail::format_double(mean) + ',' +
              io_detail::format_double(mean - half) + ',' +
              io_detail::format_double(mean + half) + '\n';
    }
  } else {
    kind = "amari";
    const json j = io_detail::load_json(f.sweep);
    io_detail::check_version(j, "sweep");
    if (!j.contains("sweep") || !j.at("sweep").is_array())
      throw SchemaError("sweep: expected a 'sweep' array");
    body = "shared_count,amari_mean,seed\n";
    for (const auto& row : j.at("sweep")) {
      if (!row.contains("shared_count") || !row.contains("amari_mean") ||
          !row.contains("seed"))
        throw SchemaError(
            "sweep: rows need shared_count, amari_mean and seed");
      body += std::to_string(row.at("shared_count").get<Index>()) + ',' +
              io_detail::format_double(row.at("amari_mean").get<double>()) +
              ',' + std::to_string(row.at("seed").get<std::uint64_t>()) + '\n';
    }
  }
  write_text_file(out, body);
  std::cerr << "emit-curve: wrote " << out.string() << '\n';
  emit_summary(f.json_summary,
               json{{"command", "emit-curve"},
                    {"curve", out.string()},
                    {"kind", kind},
                    {"config",
                     {{"report", f.report}, {"sweep", f.sweep}}}});
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Multi-view blind source separation: simulation, estimation, model "
      "selection and sparse co-dependence analysis"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "mvbss 1.0.0");

  SimulateFlags sim;
  auto* sim_cmd = app.add_subcommand(
      "simulate", "Draw a synthetic multi-view dataset with ground truth");
  sim_cmd->add_option("--views", sim.views, "Number of views")
      ->capture_default_str();
  sim_cmd->add_option("--sources", sim.sources, "Sources per view");
  sim_cmd
      ->add_option("--per-view-sources", sim.per_view_sources,
                   "Per-view source counts (overrides --sources)")
      ->delimiter(',');
  sim_cmd->add_option("--shared", sim.shared, "Shared source count")
      ->required();
  sim_cmd->add_option("--samples", sim.samples, "Sample count")->required();
  sim_cmd
      ->add_option("--noise-sigma", sim.noise_sigma,
                   "Noise level (one value, or one per view)")
      ->delimiter(',');
  sim_cmd->add_option("--law", sim.law, "Source distribution")
      ->check(CLI::IsMember({"laplace", "uniform"}))
      ->capture_default_str();
  sim_cmd->add_option("--mixing-mean", sim.mixing_mean, "Mixing entry mean")
      ->capture_default_str();
  sim_cmd->add_option("--mixing-std", sim.mixing_std, "Mixing entry spread")
      ->capture_default_str();
  sim_cmd->add_option("--seed", sim.seed, "RNG seed")->required();
  sim_cmd->add_option("--out", sim.out, "Output directory")->required();
  sim_cmd->add_flag("--json", sim.json_summary, "Print a JSON summary");
  sim_cmd->callback([&]() { run_simulate(sim); });

  FitCmdFlags fitf;
  auto* fit_cmd =
      app.add_subcommand("fit", "Estimate the separation model");
  fit_cmd->add_option("--manifest", fitf.manifest, "Dataset manifest")
      ->required();
  fit_cmd->add_option("--shared-k", fitf.shared_k, "Shared source count")
      ->required();
  add_fit_flags(fit_cmd, fitf.fit);
  fit_cmd->add_option("--out", fitf.out, "Model output path")->required();
  fit_cmd->add_flag("--json", fitf.json_summary, "Print a JSON summary");
  fit_cmd->callback([&]() { run_fit(fitf); });

  TransformFlags tr;
  auto* tr_cmd = app.add_subcommand(
      "transform", "Apply a fitted model to data and write source estimates");
  tr_cmd->add_option("--model", tr.model, "Fitted model path")->required();
  tr_cmd->add_option("--manifest", tr.manifest, "Dataset manifest")
      ->required();
  tr_cmd->add_option("--out", tr.out, "Output directory")->required();
  tr_cmd->add_flag("--json", tr.json_summary, "Print a JSON summary");
  tr_cmd->callback([&]() { run_transform(tr); });

  SelectKFlags sel;
  auto* sel_cmd = app.add_subcommand(
      "select-k", "Choose the shared source count by split-refit scoring");
  sel_cmd->add_option("--manifest", sel.manifest, "Dataset manifest")
      ->required();
  sel_cmd
      ->add_option("--k-grid", sel.k_grid,
                   "Candidate grid: 'a:b' (inclusive) or a comma list")
      ->check(CLI::Validator(validate_k_grid, "KGRID"))
      ->required();
  sel_cmd
      ->add_option("--train-frac", sel.train_frac,
                   "Training fraction of the columns")
      ->capture_default_str();
  sel_cmd->add_option("--reps", sel.reps, "Split repetitions")
      ->capture_default_str();
  sel_cmd
      ->add_option("--plateau-rtol", sel.plateau_rtol,
                   "Relative width of the near-minimum score plateau; the "
                   "largest k inside it is selected")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  sel_cmd
      ->add_option("--threads", sel.threads,
                   "Worker threads (results are thread-count independent)")
      ->capture_default_str();
  add_fit_flags(sel_cmd, sel.fit, /*add_seed=*/false);
  sel_cmd->add_option("--seed", sel.seed, "RNG seed for the splits")
      ->required();
  sel_cmd->add_option("--out", sel.out, "Report output path")->required();
  sel_cmd->add_flag("--json", sel.json_summary, "Print a JSON summary");
  sel_cmd->callback([&]() { run_select_k(sel); });

  EvalFlags ev;
  auto* eval_cmd =
      app.add_subcommand("eval", "Score a fitted model against ground truth");
  eval_cmd->require_subcommand(1);
  auto* amari_cmd = eval_cmd->add_subcommand(
      "amari", "Per-view mixing-matrix distance");
  amari_cmd->add_option("--model", ev.model, "Fitted model path")->required();
  amari_cmd->add_option("--truth", ev.truth, "Ground-truth bundle")
      ->required();
  amari_cmd->add_flag("--json", ev.json_summary, "Print a JSON summary");
  amari_cmd->callback([&]() { run_eval_amari(ev); });
  auto* mcc_cmd = eval_cmd->add_subcommand(
      "mcc", "Matched correlation between estimated and true sources");
  mcc_cmd->add_option("--model", ev.model, "Fitted model path")->required();
  mcc_cmd->add_option("--truth", ev.truth, "Ground-truth bundle")->required();
  mcc_cmd->add_option("--manifest", ev.manifest, "Dataset manifest")
      ->required();
  mcc_cmd->add_flag("--json", ev.json_summary, "Print a JSON summary");
  mcc_cmd->callback([&]() { run_eval_mcc(ev); });

  GlassoFlags gl;
  auto* gl_cmd = app.add_subcommand(
      "glasso",
      "Sparse precision estimation on a CSV of observations x variables");
  gl_cmd->add_option("--input", gl.input, "Observation matrix CSV")
      ->required();
  auto* gl_lambda =
      gl_cmd->add_option("--lambda", gl.lambda, "Single penalty value")
          ->check(CLI::NonNegativeNumber);
  auto* gl_grid = gl_cmd->add_option(
      "--grid-size", gl.grid_size,
      "Penalty path length (scored and ranked automatically)");
  gl_lambda->excludes(gl_grid);
  gl_grid->excludes(gl_lambda);
  gl_cmd->add_option("--gamma", gl.gamma, "Extended-criterion weight")
      ->capture_default_str();
  gl_cmd->add_option("--tol", gl.tol, "Solver tolerance")
      ->capture_default_str();
  gl_cmd->add_option("--max-sweeps", gl.max_sweeps, "Solver sweep cap")
      ->capture_default_str();
  gl_cmd->add_option("--n-samples", gl.n_samples,
                     "Sample count for scoring (default: input rows)");
  gl_cmd->add_option("--out", gl.out, "Edge list CSV output")->required();
  gl_cmd->add_option("--precision-out", gl.precision_out,
                     "Optional precision matrix CSV");
  gl_cmd->add_option("--path-out", gl.path_out,
                     "Optional penalty-path CSV (path mode)");
  gl_cmd->add_flag("--json", gl.json_summary, "Print a JSON summary");
  gl_cmd->callback([&]() { run_glasso(gl); });

  PipelineFlags pl;
  auto* pl_cmd = app.add_subcommand(
      "pipeline", "Composite analyses built from the toolkit");
  pl_cmd->require_subcommand(1);
  auto* co_cmd = pl_cmd->add_subcommand(
      "coregulation",
      "Two-view integration followed by sparse co-dependence selection");
  co_cmd->add_option("--manifest", pl.manifest, "Two-view dataset manifest")
      ->required();
  co_cmd->add_option("--shared-k", pl.shared_k, "Shared source count")
      ->required();
  co_cmd->add_option("--grid-size", pl.grid_size, "Penalty path length")
      ->capture_default_str();
  co_cmd->add_option("--gamma", pl.gamma, "Extended-criterion weight")
      ->capture_default_str();
  co_cmd->add_option("--top", pl.top, "Models kept in the ranking")
      ->capture_default_str();
  add_fit_flags(co_cmd, pl.fit);
  co_cmd->add_option("--out", pl.out, "Output directory")->required();
  co_cmd->add_flag("--json", pl.json_summary, "Print a JSON summary");
  co_cmd->callback([&]() { run_pipeline(pl); });

  EmitCurveFlags ec;
  auto* ec_cmd = app.add_subcommand(
      "emit-curve", "Convert a report into a tidy CSV for plotting");
  auto* ec_report = ec_cmd->add_option(
      "--report", ec.report, "Selection report (writes the score curve)");
  auto* ec_sweep = ec_cmd->add_option(
      "--sweep", ec.sweep, "Distance sweep results (writes the trend curve)");
  ec_report->excludes(ec_sweep);
  ec_sweep->excludes(ec_report);
  ec_cmd->add_option("--out", ec.out, "CSV output path")->required();
  ec_cmd->add_flag("--json", ec.json_summary, "Print a JSON summary");
  ec_cmd->callback([&]() {
    if (ec.report.empty() && ec.sweep.empty())
      throw CLI::RequiredError("--report or --sweep");
    run_emit_curve(ec);
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return 3;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
