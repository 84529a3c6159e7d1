#pragma once

#include "mvbss/datamodel.hpp"

#include <json.hpp>

#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <system_error>
#include <utility>
#include <vector>

namespace mvbss {

inline constexpr int kFormatVersion = 1;

namespace io_detail {

inline double parse_double(std::string_view token, const std::string& path,
                           std::size_t line, std::size_t column) {
  double value = 0.0;
  // Trim surrounding whitespace; from_chars wants a bare number.
  std::size_t b = token.find_first_not_of(" \t");
  std::size_t e = token.find_last_not_of(" \t");
  if (b == std::string_view::npos)
    throw IoError(path + ":" + std::to_string(line) + ": empty field " +
                  std::to_string(column));
  token = token.substr(b, e - b + 1);
  const auto res = std::from_chars(token.data(), token.data() + token.size(),
                                   value);
  if (res.ec != std::errc{} || res.ptr != token.data() + token.size())
    throw IoError(path + ":" + std::to_string(line) + ": cannot parse '" +
                  std::string(token) + "' as a number");
  return value;
}

inline std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);  // shortest round-trip form
}

}  // namespace io_detail

// Reads a headerless numeric CSV (rows = features, columns = samples).
inline Matrix read_csv_matrix(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    std::vector<double> row;
    std::size_t start = 0;
    std::size_t field = 0;
    while (true) {
      const std::size_t comma = line.find(',', start);
      const std::size_t len =
          (comma == std::string::npos ? line.size() : comma) - start;
      row.push_back(io_detail::parse_double(
          std::string_view(line).substr(start, len), path.string(), lineno,
          ++field));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (!rows.empty() && row.size() != rows.front().size())
      throw IoError(path.string() + ":" + std::to_string(lineno) +
                    ": ragged row (expected " +
                    std::to_string(rows.front().size()) + " fields, got " +
                    std::to_string(row.size()) + ")");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw IoError(path.string() + ": empty CSV");
  Matrix m(static_cast<Index>(rows.size()),
           static_cast<Index>(rows.front().size()));
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j)
      m(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  return m;
}

// Writes a matrix as headerless CSV with shortest round-trip formatting, so
// a write/read cycle reproduces every entry bit-exactly.
inline void write_csv_matrix(const std::filesystem::path& path,
                             const Matrix& m) {
  require(m.rows() >= 1 && m.cols() >= 1, "write_csv_matrix: empty matrix");
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  std::string line;
  for (Index i = 0; i < m.rows(); ++i) {
    line.clear();
    for (Index j = 0; j < m.cols(); ++j) {
      if (j) line += ',';
      line += io_detail::format_double(m(i, j));
    }
    line += '\n';
    out << line;
  }
  if (!out) throw IoError("write failed for " + path.string());
}

namespace io_detail {

using nlohmann::json;

inline json matrix_to_json(const Matrix& m) {
  std::vector<double> data;
  data.reserve(static_cast<std::size_t>(m.size()));
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) data.push_back(m(i, j));
  return json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", data}};
}

inline Matrix matrix_from_json(const json& j, const std::string& what) {
  if (!j.is_object() || !j.contains("rows") || !j.contains("cols") ||
      !j.contains("data"))
    throw SchemaError(what + ": expected {rows, cols, data}");
  const Index rows = j.at("rows").get<Index>();
  const Index cols = j.at("cols").get<Index>();
  const auto& data = j.at("data");
  if (rows < 0 || cols < 0 ||
      data.size() != static_cast<std::size_t>(rows * cols))
    throw SchemaError(what + ": data length does not match rows*cols");
  Matrix m(rows, cols);
  std::size_t k = 0;
  for (Index i = 0; i < rows; ++i)
    for (Index j2 = 0; j2 < cols; ++j2) m(i, j2) = data[k++].get<double>();
  return m;
}

inline json vector_to_json(const Vector& v) {
  return json(std::vector<double>(v.data(), v.data() + v.size()));
}

inline Vector vector_from_json(const json& j, const std::string& what) {
  if (!j.is_array()) throw SchemaError(what + ": expected an array");
  Vector v(static_cast<Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i)
    v(static_cast<Index>(i)) = j[i].get<double>();
  return v;
}

inline json load_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw IoError(path.string() + ": invalid JSON: " + e.what());
  }
  return j;
}

inline void save_json(const std::filesystem::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw IoError("write failed for " + path.string());
}

inline void check_version(const json& j, const std::string& what) {
  if (!j.contains("format_version") ||
      j.at("format_version").get<int>() != kFormatVersion)
    throw SchemaError(what + ": missing or unsupported format_version");
}

}  // namespace io_detail

// Saves every view as <name>.csv next to a manifest.json listing them.
// Returns the manifest path.
inline std::filesystem::path save_dataset(const std::filesystem::path& dir,
                                          const MultiViewDataset& data) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string());
  io_detail::json manifest;
  manifest["format_version"] = kFormatVersion;
  std::vector<std::string> files;
  for (std::size_t d = 0; d < data.view_count(); ++d) {
    const std::string file = data.names()[d] + ".csv";
    write_csv_matrix(dir / file, data.view(d));
    files.push_back(file);
  }
  manifest["views"] = files;
  manifest["names"] = data.names();
  const fs::path mpath = dir / "manifest.json";
  io_detail::save_json(mpath, manifest);
  return mpath;
}

// Loads a dataset from a manifest: {"format_version":1, "views":[csv paths],
// "names":[...]} with view paths resolved relative to the manifest location.
inline MultiViewDataset load_dataset(const std::filesystem::path& manifest) {
  const auto j = io_detail::load_json(manifest);
  io_detail::check_version(j, "manifest");
  if (!j.contains("views") || !j.at("views").is_array() ||
      j.at("views").empty())
    throw SchemaError("manifest: 'views' must be a non-empty array");
  const auto base = manifest.parent_path();
  std::vector<Matrix> views;
  std::vector<std::string> names;
  for (const auto& entry : j.at("views")) {
    const std::filesystem::path p = entry.get<std::string>();
    views.push_back(read_csv_matrix(p.is_absolute() ? p : base / p));
  }
  if (j.contains("names")) {
    names = j.at("names").get<std::vector<std::string>>();
    if (names.size() != views.size())
      throw SchemaError("manifest: 'names' length must match 'views'");
  }
  return MultiViewDataset(std::move(views), std::move(names));
}

inline void save_model(const std::filesystem::path& path,
                       const FittedModel& model) {
  using io_detail::json;
  json j;
  j["format_version"] = kFormatVersion;
  j["shared_count"] = model.shared_count();
  j["lambda"] = model.lambda();
  j["nonlinearity"] = to_string(model.nonlinearity());
  j["converged"] = model.converged();
  j["objective_trace"] = model.objective_trace();
  json views = json::array();
  for (std::size_t d = 0; d < model.view_count(); ++d) {
    const WhiteningTransform& w = model.whitening()[d];
    views.push_back(
        {{"unmixing_whitened",
          io_detail::matrix_to_json(model.unmixing_whitened()[d])},
         {"mixing_estimate",
          io_detail::matrix_to_json(model.mixing_estimates()[d])},
         {"whitening",
          {{"forward", io_detail::matrix_to_json(w.forward())},
           {"inverse", io_detail::matrix_to_json(w.inverse())},
           {"mean", io_detail::vector_to_json(w.mean())},
           {"eigenvalues", io_detail::vector_to_json(w.eigenvalues())}}}});
  }
  j["views"] = std::move(views);
  io_detail::save_json(path, j);
}

inline FittedModel load_model(const std::filesystem::path& path) {
  const auto j = io_detail::load_json(path);
  io_detail::check_version(j, "model");
  for (const char* key :
       {"shared_count", "lambda", "nonlinearity", "converged", "views"}) {
    if (!j.contains(key))
      throw SchemaError(std::string("model: missing field '") + key + "'");
  }
  std::vector<Matrix> unmixing;
  std::vector<WhiteningTransform> whitening;
  std::vector<Matrix> mixing;
  for (const auto& v : j.at("views")) {
    unmixing.push_back(
        io_detail::matrix_from_json(v.at("unmixing_whitened"), "model"));
    mixing.push_back(
        io_detail::matrix_from_json(v.at("mixing_estimate"), "model"));
    const auto& w = v.at("whitening");
    whitening.emplace_back(
        io_detail::matrix_from_json(w.at("forward"), "model whitening"),
        io_detail::matrix_from_json(w.at("inverse"), "model whitening"),
        io_detail::vector_from_json(w.at("mean"), "model whitening"),
        io_detail::vector_from_json(w.at("eigenvalues"), "model whitening"));
  }
  std::vector<double> trace;
  if (j.contains("objective_trace"))
    trace = j.at("objective_trace").get<std::vector<double>>();
  try {
    return FittedModel(std::move(unmixing), std::move(whitening),
                       std::move(mixing), j.at("shared_count").get<Index>(),
                       j.at("lambda").get<double>(),
                       nonlinearity_from_string(
                           j.at("nonlinearity").get<std::string>()),
                       std::move(trace), j.at("converged").get<bool>());
  } catch (const ValidationError& e) {
    throw SchemaError(std::string("model: ") + e.what());
  }
}

inline void save_truth(const std::filesystem::path& path,
                       const GenerativeGroundTruth& truth) {
  using io_detail::json;
  truth.validate();
  json j;
  j["format_version"] = kFormatVersion;
  j["shared_count"] = truth.shared_count;
  j["noise_sigma"] = truth.noise_sigma;
  j["shared_sources"] = io_detail::matrix_to_json(truth.shared_sources);
  json views = json::array();
  for (std::size_t d = 0; d < truth.mixing.size(); ++d) {
    views.push_back(
        {{"mixing", io_detail::matrix_to_json(truth.mixing[d])},
         {"individual_sources",
          io_detail::matrix_to_json(truth.individual_sources[d])}});
  }
  j["views"] = std::move(views);
  io_detail::save_json(path, j);
}

inline GenerativeGroundTruth load_truth(const std::filesystem::path& path) {
  const auto j = io_detail::load_json(path);
  io_detail::check_version(j, "truth");
  for (const char* key :
       {"shared_count", "noise_sigma", "shared_sources", "views"}) {
    if (!j.contains(key))
      throw SchemaError(std::string("truth: missing field '") + key + "'");
  }
  GenerativeGroundTruth t;
  t.shared_count = j.at("shared_count").get<Index>();
  t.noise_sigma = j.at("noise_sigma").get<std::vector<double>>();
  t.shared_sources = io_detail::matrix_from_json(j.at("shared_sources"),
                                                 "truth shared_sources");
  for (const auto& v : j.at("views")) {
    t.mixing.push_back(io_detail::matrix_from_json(v.at("mixing"), "truth"));
    t.individual_sources.push_back(
        io_detail::matrix_from_json(v.at("individual_sources"), "truth"));
  }
  try {
    t.validate();
  } catch (const ValidationError& e) {
    throw SchemaError(std::string("truth: ") + e.what());
  }
  return t;
}

}  // namespace mvbss
