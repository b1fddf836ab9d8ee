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

// Seeded 2-D two-distribution scenarios and tiled synthetic scenes with
// planted obstacle segments. All geometry is in units of the noise scale.
// Scenes sit at a positive x offset so that the angle of a feature (what
// cosine similarity sees) still separates the two classes.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lrseg/container.hpp"
#include "lrseg/error.hpp"
#include "lrseg/random.hpp"
#include "lrseg/reference_set.hpp"
#include "lrseg/rle.hpp"
#include "lrseg/types.hpp"

namespace lrseg {

enum class Scenario { blobs, rings, moons };

constexpr std::string_view to_string(Scenario s) noexcept {
  switch (s) {
    case Scenario::blobs: return "blobs";
    case Scenario::rings: return "rings";
    case Scenario::moons: return "moons";
  }
  return "unknown";
}

inline Scenario parse_scenario(std::string_view s) {
  if (s == "blobs") return Scenario::blobs;
  if (s == "rings") return Scenario::rings;
  if (s == "moons") return Scenario::moons;
  throw Error(Errc::UnknownScenario, "unknown scenario '" + std::string(s) + "' (expected blobs, rings or moons)");
}

struct ScenarioConfig {
  Scenario scenario = Scenario::blobs;
  int dim = 2;
  /// Closest gap between the two classes' generating shapes, in noise units.
  double separation = 8.0;
  double noise = 1.0;
  double offset = 10.0;
};

/// Draws n feature vectors of one class.
inline Matrix sample_scenario(const ScenarioConfig& cfg, ReferenceKind kind, int n, Rng& rng) {
  if (cfg.dim < 2) throw Error(Errc::InvalidArgument, "synthetic features need at least 2 dims");
  if (n < 0) throw Error(Errc::InvalidArgument, "negative sample count");
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double sigma = cfg.noise;
  const double half = 0.5 * cfg.separation * sigma;
  const double side = kind == ReferenceKind::free ? -1.0 : 1.0;
  constexpr double kRadius = 4.0;
  const double r = kRadius * sigma;
  Matrix out(n, cfg.dim);
  for (int i = 0; i < n; ++i) {
    double x = cfg.offset * sigma;
    double y = 0.0;
    switch (cfg.scenario) {
      case Scenario::blobs:
        y = side * half;
        break;
      case Scenario::moons: {
        // arcs bulging away from each other, shifted horizontally by r
        const double theta = std::numbers::pi * unit(rng);
        x += -side * 0.5 * r + side * r * std::cos(theta);
        y = side * (half + r * std::sin(theta));
        break;
      }
      case Scenario::rings: {
        const double theta = 2.0 * std::numbers::pi * unit(rng);
        x += r * std::cos(theta);
        y = side * (half + r) + r * std::sin(theta);
        break;
      }
    }
    out(i, 0) = x + sigma * gauss(rng);
    out(i, 1) = y + sigma * gauss(rng);
    for (int j = 2; j < cfg.dim; ++j) out(i, j) = sigma * gauss(rng);
  }
  return out;
}

/// Reference container: one record per row with a 1x1 placeholder mask.
inline FeatureContainer reference_container(const Matrix& features) {
  FeatureContainer c{{static_cast<std::uint32_t>(features.cols()), 1, 1}, {}};
  for (Eigen::Index i = 0; i < features.rows(); ++i) {
    SegmentRecord r;
    r.image_id = 0;
    r.segment_id = static_cast<std::uint32_t>(i);
    for (Eigen::Index j = 0; j < features.cols(); ++j) r.feature.push_back(static_cast<float>(features(i, j)));
    r.mask = RleMask{1, 1, {0, 1}};
    r.predicted_iou = 1.0;
    r.stability_score = 1.0;
    c.records.push_back(std::move(r));
  }
  return c;
}

struct SceneConfig {
  int images = 4;
  int height = 48;
  int width = 64;
  int tile = 16;
  int obstacles_per_image = 2;
  /// Top rows labeled ignore in the ground truth and left out of the ROI.
  int ignore_rows = 8;
};

struct SyntheticScenes {
  FeatureContainer segments;
  std::vector<LabelMap> ground_truth;  // indexed by image id
  BinaryMask roi;
};

namespace detail {

struct Rect {
  int top, left, height, width;
  [[nodiscard]] bool contains(int r, int c) const noexcept {
    return r >= top && r < top + height && c >= left && c < left + width;
  }
};

inline SegmentRecord scene_record(std::uint32_t image, std::uint32_t segment, const BinaryMask& mask,
                                  std::span<const double> feature, double iou, double stability) {
  SegmentRecord r;
  r.image_id = image;
  r.segment_id = segment;
  for (double v : feature) r.feature.push_back(static_cast<float>(v));
  r.mask = rle_encode(mask);
  r.predicted_iou = iou;
  r.stability_score = stability;
  int rmin = mask.height, rmax = -1, cmin = mask.width, cmax = -1;
  for (int y = 0; y < mask.height; ++y)
    for (int x = 0; x < mask.width; ++x)
      if (mask.at(y, x)) {
        rmin = std::min(rmin, y);
        rmax = std::max(rmax, y);
        cmin = std::min(cmin, x);
        cmax = std::max(cmax, x);
      }
  if (rmax >= 0) r.prompt_xy = {(cmin + cmax) / 2, (rmin + rmax) / 2};
  return r;
}

}  // namespace detail

/// Tiled scenes: each tile is a free-space segment, and planted obstacles are
/// rectangles carved out of tiles below the top tile row. Each image also
/// carries one near-duplicate and one low-quality segment for the filters.
inline SyntheticScenes make_scenes(const ScenarioConfig& scenario, const SceneConfig& cfg, std::uint64_t seed) {
  if (cfg.tile < 8 || cfg.height < 2 * cfg.tile || cfg.width < cfg.tile || cfg.images < 0)
    throw Error(Errc::InvalidArgument, "scene needs at least two tile rows of size >= 8");
  const int tiles_y = cfg.height / cfg.tile;
  const int tiles_x = cfg.width / cfg.tile;
  const int eligible = (tiles_y - 1) * tiles_x;
  if (cfg.obstacles_per_image > eligible) throw Error(Errc::InvalidArgument, "too many obstacles for the tile grid");

  SyntheticScenes out;
  out.segments.header = {static_cast<std::uint32_t>(scenario.dim), static_cast<std::uint32_t>(cfg.height),
                         static_cast<std::uint32_t>(cfg.width)};
  out.roi = BinaryMask(cfg.height, cfg.width, 1);
  for (int y = 0; y < std::min(cfg.ignore_rows, cfg.height); ++y)
    for (int x = 0; x < cfg.width; ++x) out.roi.at(y, x) = 0;

  for (int image = 0; image < cfg.images; ++image) {
    Rng rng = make_rng(seed, static_cast<std::uint64_t>(image));
    std::uniform_real_distribution<double> good_iou(0.90, 1.0), good_stab(0.92, 1.0), bad_iou(0.3, 0.7);
    const auto uid = static_cast<std::uint32_t>(image);

    std::vector<int> tiles(static_cast<std::size_t>(eligible));
    std::iota(tiles.begin(), tiles.end(), tiles_x);
    std::shuffle(tiles.begin(), tiles.end(), rng);
    std::vector<std::pair<int, detail::Rect>> planted;
    for (int o = 0; o < cfg.obstacles_per_image; ++o) {
      const int t = tiles[static_cast<std::size_t>(o)];
      const int ty = (t / tiles_x) * cfg.tile, tx = (t % tiles_x) * cfg.tile;
      std::uniform_int_distribution<int> size(4, cfg.tile - 4);
      const int h = size(rng), w = size(rng);
      const int top = ty + std::uniform_int_distribution<int>(2, cfg.tile - 2 - h)(rng);
      const int left = tx + std::uniform_int_distribution<int>(2, cfg.tile - 2 - w)(rng);
      planted.emplace_back(t, detail::Rect{top, left, h, w});
    }

    LabelMap gt(cfg.height, cfg.width, LabelMap::kFree);
    std::uint32_t next_id = 0;
    std::vector<SegmentRecord> road;
    for (int t = 0; t < tiles_y * tiles_x; ++t) {
      const detail::Rect tile{(t / tiles_x) * cfg.tile, (t % tiles_x) * cfg.tile, cfg.tile, cfg.tile};
      const auto hit = std::find_if(planted.begin(), planted.end(), [&](const auto& p) { return p.first == t; });
      BinaryMask free_mask(cfg.height, cfg.width, 0), obstacle_mask(cfg.height, cfg.width, 0);
      for (int y = tile.top; y < tile.top + tile.height; ++y)
        for (int x = tile.left; x < tile.left + tile.width; ++x) {
          const bool obstacle = hit != planted.end() && hit->second.contains(y, x);
          (obstacle ? obstacle_mask : free_mask).at(y, x) = 1;
          if (obstacle) gt.at(y, x) = LabelMap::kObstacle;
        }
      const Matrix f = sample_scenario(scenario, ReferenceKind::free, 1, rng);
      auto rec = detail::scene_record(uid, next_id++, free_mask, std::span<const double>(f.data(), static_cast<std::size_t>(f.cols())),
                                      good_iou(rng), good_stab(rng));
      road.push_back(rec);
      out.segments.records.push_back(std::move(rec));
      if (hit != planted.end()) {
        const Matrix g = sample_scenario(scenario, ReferenceKind::obstacle, 1, rng);
        out.segments.records.push_back(detail::scene_record(
            uid, next_id++, obstacle_mask, std::span<const double>(g.data(), static_cast<std::size_t>(g.cols())), good_iou(rng),
            good_stab(rng)));
      }
    }

    // near-duplicate of a road segment, slightly lower quality
    const auto& original = road[std::uniform_int_distribution<std::size_t>(0, road.size() - 1)(rng)];
    {
      SegmentRecord dup = original;
      dup.segment_id = next_id++;
      dup.predicted_iou = std::max(0.88, original.predicted_iou - 0.01);
      const Matrix f = sample_scenario(scenario, ReferenceKind::free, 1, rng);
      for (Eigen::Index j = 0; j < f.cols(); ++j) dup.feature[static_cast<std::size_t>(j)] = static_cast<float>(f(0, j));
      out.segments.records.push_back(std::move(dup));
    }
    // low-quality segment with obstacle-like features; must be filtered out
    {
      BinaryMask m(cfg.height, cfg.width, 0);
      const int top = cfg.ignore_rows + std::uniform_int_distribution<int>(0, std::max(0, cfg.height - cfg.ignore_rows - 6))(rng);
      const int left = std::uniform_int_distribution<int>(0, cfg.width - 6)(rng);
      for (int y = top; y < std::min(cfg.height, top + 6); ++y)
        for (int x = left; x < left + 6; ++x) m.at(y, x) = 1;
      const Matrix g = sample_scenario(scenario, ReferenceKind::obstacle, 1, rng);
      out.segments.records.push_back(detail::scene_record(uid, next_id++, m,
                                                          std::span<const double>(g.data(), static_cast<std::size_t>(g.cols())),
                                                          bad_iou(rng), good_stab(rng)));
    }

    for (int y = 0; y < std::min(cfg.ignore_rows, cfg.height); ++y)
      for (int x = 0; x < cfg.width; ++x) gt.at(y, x) = LabelMap::kIgnore;
    out.ground_truth.push_back(std::move(gt));
  }
  return out;
}

}  // namespace lrseg
