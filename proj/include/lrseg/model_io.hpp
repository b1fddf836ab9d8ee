// Copyright 2026 The lrseg Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Model files are JSON documents tagged with "estimator" ("gmm" | "flow" | "knn").
// A fitted pair is a manifest naming two model files plus the decision threshold.

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "lrseg/classifier.hpp"
#include "lrseg/error.hpp"

namespace lrseg {

using json = nlohmann::json;

namespace detail {

inline json rows_to_json(const Matrix& m) {
  json out = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) out.push_back(std::vector<double>(m.row(i).data(), m.row(i).data() + m.cols()));
  return out;
}

inline json vec_to_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

inline Matrix rows_from_json(const json& j, Eigen::Index rows, Eigen::Index cols, const char* what) {
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != rows)
    throw Error(Errc::MalformedMetadata, std::string(what) + ": wrong row count");
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto row = j[static_cast<std::size_t>(i)].get<std::vector<double>>();
    if (static_cast<Eigen::Index>(row.size()) != cols) throw Error(Errc::MalformedMetadata, std::string(what) + ": wrong column count");
    for (Eigen::Index c = 0; c < cols; ++c) m(i, c) = row[static_cast<std::size_t>(c)];
  }
  return m;
}

inline Vector vec_from_json(const json& j, Eigen::Index size, const char* what) {
  const auto v = j.get<std::vector<double>>();
  if (static_cast<Eigen::Index>(v.size()) != size) throw Error(Errc::MalformedMetadata, std::string(what) + ": wrong length");
  return Eigen::Map<const Vector>(v.data(), size);
}

}  // namespace detail

inline json to_json(const GmmModel& g) {
  return json{{"estimator", "gmm"},
              {"C", g.dim()},
              {"K", g.components()},
              {"weights", detail::vec_to_json(g.weights)},
              {"means", detail::rows_to_json(g.means)},
              {"variances", detail::rows_to_json(g.variances)}};
}

inline json to_json(const FlowModel& m) {
  const auto& c = m.config;
  json blocks = json::array();
  for (const auto& b : m.blocks) {
    json w = json::array(), bs = json::array();
    for (const auto& x : b.weights) w.push_back(detail::rows_to_json(x));
    for (const auto& x : b.biases) bs.push_back(detail::vec_to_json(x));
    blocks.push_back(json{{"log_scale", detail::vec_to_json(b.log_scale)},
                          {"bias", detail::vec_to_json(b.bias)},
                          {"perm", b.perm},
                          {"sign", detail::vec_to_json(b.sign)},
                          {"lower", detail::rows_to_json(b.lower)},
                          {"upper", detail::rows_to_json(b.upper)},
                          {"log_abs_diag", detail::vec_to_json(b.log_abs_diag)},
                          {"weights", std::move(w)},
                          {"biases", std::move(bs)}});
  }
  return json{{"estimator", "flow"},
              {"C", m.dim},
              {"bins", c.bins},
              {"tail_bound", c.tail_bound},
              {"hidden", c.hidden},
              {"hidden_layers", c.hidden_layers},
              {"min_bin", c.min_bin},
              {"min_derivative", c.min_derivative},
              {"blocks", std::move(blocks)}};
}

inline json to_json(const KnnIndex& k) {
  return json{{"estimator", "knn"}, {"C", k.dim()}, {"k", k.k}, {"rows", detail::rows_to_json(k.rows)}};
}

inline json to_json(const DensityModel& m) {
  return std::visit([](const auto& x) { return to_json(x); }, m);
}

inline GmmModel gmm_from_json(const json& j) {
  const int c = j.at("C").get<int>();
  const int k = j.at("K").get<int>();
  if (c < 1 || k < 1) throw Error(Errc::MalformedMetadata, "gmm sizes must be positive");
  GmmModel g;
  g.weights = detail::vec_from_json(j.at("weights"), k, "weights");
  g.means = detail::rows_from_json(j.at("means"), k, c, "means");
  g.variances = detail::rows_from_json(j.at("variances"), k, c, "variances");
  return g;
}

inline FlowModel flow_from_json(const json& j) {
  FlowConfig cfg;
  cfg.bins = j.at("bins").get<int>();
  cfg.tail_bound = j.at("tail_bound").get<double>();
  cfg.hidden = j.at("hidden").get<int>();
  cfg.hidden_layers = j.at("hidden_layers").get<int>();
  cfg.min_bin = j.at("min_bin").get<double>();
  cfg.min_derivative = j.at("min_derivative").get<double>();
  const auto& blocks = j.at("blocks");
  cfg.blocks = static_cast<int>(blocks.size());
  FlowModel m = make_identity_flow(j.at("C").get<int>(), cfg);
  const Eigen::Index c = m.dim;
  for (std::size_t bi = 0; bi < m.blocks.size(); ++bi) {
    const auto& jb = blocks[bi];
    auto& b = m.blocks[bi];
    b.log_scale = detail::vec_from_json(jb.at("log_scale"), c, "log_scale");
    b.bias = detail::vec_from_json(jb.at("bias"), c, "bias");
    b.perm = jb.at("perm").get<std::vector<int>>();
    std::vector<int> sorted = b.perm;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < sorted.size(); ++i)
      if (sorted[i] != static_cast<int>(i) || sorted.size() != static_cast<std::size_t>(c))
        throw Error(Errc::MalformedMetadata, "perm is not a permutation");
    b.sign = detail::vec_from_json(jb.at("sign"), c, "sign");
    b.lower = detail::rows_from_json(jb.at("lower"), c, c, "lower");
    b.upper = detail::rows_from_json(jb.at("upper"), c, c, "upper");
    b.log_abs_diag = detail::vec_from_json(jb.at("log_abs_diag"), c, "log_abs_diag");
    const auto& w = jb.at("weights");
    const auto& bs = jb.at("biases");
    if (w.size() != b.weights.size() || bs.size() != b.biases.size())
      throw Error(Errc::MalformedMetadata, "conditioner layer count mismatch");
    for (std::size_t l = 0; l < b.weights.size(); ++l) {
      b.weights[l] = detail::rows_from_json(w[l], b.weights[l].rows(), b.weights[l].cols(), "weights");
      b.biases[l] = detail::vec_from_json(bs[l], b.biases[l].size(), "biases");
    }
  }
  return m;
}

inline KnnIndex knn_from_json(const json& j) {
  const int c = j.at("C").get<int>();
  const auto& rows = j.at("rows");
  KnnIndex idx{detail::rows_from_json(rows, static_cast<Eigen::Index>(rows.size()), c, "rows"), j.at("k").get<int>()};
  if (idx.k < 1 || idx.k > idx.rows.rows()) throw Error(Errc::KTooLarge, "stored k does not fit the stored rows");
  return idx;
}

inline DensityModel model_from_json(const json& j) {
  try {
    const auto tag = j.at("estimator").get<std::string>();
    if (tag == "gmm") return gmm_from_json(j);
    if (tag == "flow") return flow_from_json(j);
    if (tag == "knn") return knn_from_json(j);
    throw Error(Errc::MalformedMetadata, "unknown estimator tag '" + tag + "'");
  } catch (const json::exception& e) {
    throw Error(Errc::MalformedMetadata, std::string("model file: ") + e.what());
  }
}

inline void write_json_file(const std::filesystem::path& path, const json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::IoError, "cannot open " + path.string() + " for writing");
  out << j.dump(1) << '\n';
  if (!out) throw Error(Errc::IoError, "failed writing " + path.string());
}

inline json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(Errc::MalformedMetadata, path.string() + ": " + e.what());
  }
}

inline void save_model(const std::filesystem::path& path, const DensityModel& m) { write_json_file(path, to_json(m)); }

inline DensityModel load_model(const std::filesystem::path& path) { return model_from_json(read_json_file(path)); }

/// Writes manifest.json plus free.model.json / obstacle.model.json into dir.
inline void save_pair(const std::filesystem::path& dir, const EstimatorPair& p, const json& extra = json::object()) {
  std::filesystem::create_directories(dir);
  save_model(dir / "free.model.json", p.free_model);
  save_model(dir / "obstacle.model.json", p.obstacle_model);
  json manifest{{"kind", std::string(to_string(p.kind))},
                {"free_model", "free.model.json"},
                {"obstacle_model", "obstacle.model.json"},
                {"threshold", p.threshold},
                {"normalize_queries", p.normalize_queries},
                {"C", p.dim()}};
  for (const auto& [key, value] : extra.items()) manifest[key] = value;
  write_json_file(dir / "manifest.json", manifest);
}

inline EstimatorPair load_pair(const std::filesystem::path& manifest_path) {
  const json m = read_json_file(manifest_path);
  const auto dir = manifest_path.parent_path();
  try {
    EstimatorPair p{parse_estimator_kind(m.at("kind").get<std::string>()),
                    load_model(dir / m.at("free_model").get<std::string>()),
                    load_model(dir / m.at("obstacle_model").get<std::string>()), m.at("threshold").get<double>(),
                    m.value("normalize_queries", false)};
    validate_pair(p);
    return p;
  } catch (const json::exception& e) {
    throw Error(Errc::MalformedMetadata, "manifest: " + std::string(e.what()));
  }
}

}  // namespace lrseg
