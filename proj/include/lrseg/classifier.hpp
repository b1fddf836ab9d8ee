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

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>

#include "lrseg/error.hpp"
#include "lrseg/flow.hpp"
#include "lrseg/gmm.hpp"
#include "lrseg/knn.hpp"
#include "lrseg/reference_set.hpp"
#include "lrseg/types.hpp"

namespace lrseg {

enum class EstimatorKind { gmm, flow, knn };

constexpr std::string_view to_string(EstimatorKind k) noexcept {
  switch (k) {
    case EstimatorKind::gmm: return "gmm";
    case EstimatorKind::flow: return "flow";
    case EstimatorKind::knn: return "knn";
  }
  return "unknown";
}

inline EstimatorKind parse_estimator_kind(std::string_view s) {
  if (s == "gmm") return EstimatorKind::gmm;
  if (s == "flow") return EstimatorKind::flow;
  if (s == "knn") return EstimatorKind::knn;
  throw Error(Errc::InvalidArgument, "unknown estimator kind '" + std::string(s) + "'");
}

using DensityModel = std::variant<GmmModel, FlowModel, KnnIndex>;

inline EstimatorKind kind_of(const DensityModel& m) noexcept { return static_cast<EstimatorKind>(m.index()); }

inline int dim_of(const DensityModel& m) {
  return std::visit(
      [](const auto& x) -> int {
        if constexpr (std::is_same_v<std::decay_t<decltype(x)>, FlowModel>) return x.dim;
        else return x.dim();
      },
      m);
}

/// Decision threshold on the native score scale: log-ratio 0 or ratio 1.
constexpr double default_threshold(EstimatorKind k) noexcept { return k == EstimatorKind::knn ? 1.0 : 0.0; }

struct EstimatorConfig {
  std::uint64_t seed = 0;
  // gmm
  int components = 50;
  EmOptions em;
  // flow
  FlowConfig flow;
  FlowTrainConfig flow_train;
  // knn
  int k = 5;
  /// Unit-normalize reference rows and queries. Unset: on for knn only.
  std::optional<bool> normalize;
  /// Unset: default_threshold(kind).
  std::optional<double> threshold;

  [[nodiscard]] bool normalize_for(EstimatorKind kind) const noexcept {
    return normalize.value_or(kind == EstimatorKind::knn);
  }
};

/// Free-space and obstacle estimators of one kind.
struct EstimatorPair {
  EstimatorKind kind = EstimatorKind::knn;
  DensityModel free_model;
  DensityModel obstacle_model;
  double threshold = 1.0;
  bool normalize_queries = false;

  [[nodiscard]] int dim() const { return dim_of(free_model); }
};

struct LrDecision {
  SegmentKey key;
  double score = 0.0;
  bool is_obstacle = false;
};

inline void validate_pair(const EstimatorPair& p) {
  if (kind_of(p.free_model) != p.kind || kind_of(p.obstacle_model) != p.kind)
    throw Error(Errc::KindMismatch, "estimator models do not match pair kind " + std::string(to_string(p.kind)));
  if (dim_of(p.free_model) != dim_of(p.obstacle_model))
    throw Error(Errc::DimMismatch, "free and obstacle models have different dimensionality");
}

namespace detail {

inline DensityModel fit_one(EstimatorKind kind, const Matrix& data, const EstimatorConfig& cfg, std::uint64_t stream) {
  switch (kind) {
    case EstimatorKind::gmm:
      return em_fit(data, cfg.components, derive_seed(cfg.seed, stream), cfg.em).model;
    case EstimatorKind::flow: {
      FlowTrainConfig tc = cfg.flow_train;
      tc.seed = derive_seed(cfg.seed, stream);
      return train_flow(data, cfg.flow, tc);
    }
    case EstimatorKind::knn:
      return build_index(data, cfg.k);
  }
  throw Error(Errc::InvalidArgument, "unknown estimator kind");
}

}  // namespace detail

/// Fits one estimator per reference set.
inline EstimatorPair fit_pair(EstimatorKind kind, const ReferenceSet& free, const ReferenceSet& obstacle,
                              const EstimatorConfig& cfg) {
  if (free.kind != ReferenceKind::free || obstacle.kind != ReferenceKind::obstacle)
    throw Error(Errc::KindMismatch, "reference sets must be (free, obstacle)");
  if (free.size() == 0 || obstacle.size() == 0) throw Error(Errc::EmptyReferenceSet, "reference set is empty");
  if (free.dim() != obstacle.dim()) throw Error(Errc::DimMismatch, "reference sets have different dimensionality");
  const bool normalize = cfg.normalize_for(kind);
  auto prepared = [&](const ReferenceSet& r) {
    Matrix m = r.features;
    if (normalize && !r.normalized) validate_rows(m, true);
    return m;
  };
  EstimatorPair p{kind, detail::fit_one(kind, prepared(free), cfg, 1), detail::fit_one(kind, prepared(obstacle), cfg, 2),
                  cfg.threshold.value_or(default_threshold(kind)), normalize};
  return p;
}

/// Single-model score, higher = more typical of that model's reference set:
/// log-density for gmm and flow, mean top-k cosine similarity for knn.
inline double density_score(const DensityModel& m, std::span<const double> t) {
  return std::visit(
      [&](const auto& model) -> double {
        using T = std::decay_t<decltype(model)>;
        if constexpr (std::is_same_v<T, GmmModel>) return gmm_log_density(model, t);
        else if constexpr (std::is_same_v<T, FlowModel>) return flow_log_density(model, t);
        else return avg_topk_similarity(model, t);
      },
      m);
}

namespace detail {

inline std::vector<double> prepare_query(const EstimatorPair& p, std::span<const double> t) {
  if (static_cast<int>(t.size()) != p.dim())
    throw Error(Errc::DimMismatch, "query has " + std::to_string(t.size()) + " dims, models have " + std::to_string(p.dim()));
  std::vector<double> q(t.begin(), t.end());
  if (p.normalize_queries && p.kind != EstimatorKind::knn) {
    double sq = 0.0;
    for (double v : q) sq += v * v;
    if (!(sq > 0.0)) throw Error(Errc::ZeroQueryVector, "query vector has zero norm");
    const double norm = std::sqrt(sq);
    for (double& v : q) v /= norm;
  }
  return q;
}

}  // namespace detail

/// log p_obstacle(t) - log p_free(t) for gmm/flow; the k-NN similarity ratio for knn.
inline double lr_score(const EstimatorPair& p, std::span<const double> t) {
  const std::vector<double> q = detail::prepare_query(p, t);
  if (p.kind == EstimatorKind::knn)
    return knn_ratio(std::get<KnnIndex>(p.obstacle_model), std::get<KnnIndex>(p.free_model), q);
  return density_score(p.obstacle_model, q) - density_score(p.free_model, q);
}

/// Ties go to obstacle for every kind.
inline LrDecision decide(const EstimatorPair& p, SegmentKey key, std::span<const double> t) {
  const double s = lr_score(p, t);
  return {key, s, s >= p.threshold};
}

inline constexpr double kScoreClamp = 50.0;

/// Maps a native score to the shared log scale used by score maps:
/// log of the ratio for knn, the log-ratio itself otherwise, clamped to +-50.
inline double common_scale(EstimatorKind kind, double score) {
  double v = score;
  if (kind == EstimatorKind::knn) v = score > 0.0 ? std::log(score) : -kScoreClamp;
  if (std::isnan(v)) throw Error(Errc::NumericFailure, "score is NaN");
  return std::clamp(v, -kScoreClamp, kScoreClamp);
}

}  // namespace lrseg
