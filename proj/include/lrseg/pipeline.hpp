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
#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lrseg/classifier.hpp"
#include "lrseg/container.hpp"
#include "lrseg/error.hpp"
#include "lrseg/rle.hpp"
#include "lrseg/types.hpp"

namespace lrseg {

struct FilterConfig {
  double min_predicted_iou = 0.88;
  double min_stability = 0.90;
  double dedup_iou_threshold = 0.90;
  std::optional<BinaryMask> roi;

  void validate() const {
    for (double v : {min_predicted_iou, min_stability, dedup_iou_threshold})
      if (!(v >= 0.0 && v <= 1.0)) throw Error(Errc::InvalidArgument, "filter thresholds must lie in [0,1]");
  }
};

/// Per-pixel scores on the common log scale. Uncovered pixels hold `floor`.
struct PixelScoreMap {
  Grid<double> scores;
  BinaryMask covered;
  double floor = -kScoreClamp;
};

inline double mask_iou(const BinaryMask& a, const BinaryMask& b) {
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    inter += static_cast<std::size_t>(a.data[i] & b.data[i]);
    uni += static_cast<std::size_t>(a.data[i] | b.data[i]);
  }
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

/// Drops low-quality records, records outside the ROI, then near-duplicates
/// by greedy NMS on mask IoU (higher predicted_iou wins, ties to lower
/// segment_id). Survivors keep their input order.
inline std::vector<SegmentRecord> filter_segments(std::span<const SegmentRecord> records, const FilterConfig& cfg) {
  cfg.validate();
  std::vector<std::size_t> candidates;
  std::vector<BinaryMask> masks(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    if (r.predicted_iou < cfg.min_predicted_iou || r.stability_score < cfg.min_stability) continue;
    masks[i] = rle_decode(r.mask);
    if (cfg.roi) {
      if (!masks[i].same_shape(*cfg.roi)) throw Error(Errc::ShapeMismatch, "ROI does not match mask dimensions");
      bool touches = false;
      for (std::size_t p = 0; p < masks[i].data.size() && !touches; ++p) touches = masks[i].data[p] && cfg.roi->data[p];
      if (!touches) continue;
    }
    candidates.push_back(i);
  }
  std::stable_sort(candidates.begin(), candidates.end(), [&](std::size_t a, std::size_t b) {
    const auto& ra = records[a];
    const auto& rb = records[b];
    if (ra.predicted_iou != rb.predicted_iou) return ra.predicted_iou > rb.predicted_iou;
    return ra.segment_id < rb.segment_id;
  });
  std::vector<std::size_t> kept;
  for (std::size_t i : candidates) {
    bool duplicate = false;
    for (std::size_t j : kept) {
      if (mask_iou(masks[i], masks[j]) >= cfg.dedup_iou_threshold) {
        duplicate = true;
        break;
      }
    }
    if (!duplicate) kept.push_back(i);
  }
  std::sort(kept.begin(), kept.end());
  std::vector<SegmentRecord> out;
  out.reserve(kept.size());
  for (std::size_t i : kept) out.push_back(records[i]);
  return out;
}

namespace detail {

inline void check_roi(const BinaryMask* roi, int h, int w) {
  if (roi && !roi->same_shape(h, w)) throw Error(Errc::ShapeMismatch, "ROI does not match image dimensions");
}

inline void check_mask(const SegmentRecord& r, int h, int w) {
  if (r.mask.height != h || r.mask.width != w) throw Error(Errc::ShapeMismatch, "segment mask does not match image dimensions");
}

}  // namespace detail

/// Obstacle pixels are the union of obstacle-decided masks (inside the ROI when given).
inline LabelMap compose_decision_map(std::span<const SegmentRecord> records, std::span<const LrDecision> decisions, int h,
                                     int w, const BinaryMask* roi = nullptr) {
  detail::check_roi(roi, h, w);
  std::map<SegmentKey, bool> lookup;
  for (const auto& d : decisions) lookup[d.key] = d.is_obstacle;
  LabelMap out(h, w, LabelMap::kFree);
  for (const auto& r : records) {
    const auto it = lookup.find(r.key());
    if (it == lookup.end())
      throw Error(Errc::MissingDecision, "no decision for segment " + std::to_string(r.segment_id) + " of image " + std::to_string(r.image_id));
    if (!it->second) continue;
    detail::check_mask(r, h, w);
    const BinaryMask m = rle_decode(r.mask);
    for (std::size_t p = 0; p < m.data.size(); ++p)
      if (m.data[p] && (!roi || roi->data[p])) out.data[p] = LabelMap::kObstacle;
  }
  return out;
}

/// Per-pixel maximum over covering segments' common-scale scores.
inline PixelScoreMap compose_score_map(std::span<const SegmentRecord> records, const std::map<SegmentKey, double>& scores,
                                       int h, int w, double floor = -kScoreClamp, const BinaryMask* roi = nullptr) {
  detail::check_roi(roi, h, w);
  PixelScoreMap out{Grid<double>(h, w, floor), BinaryMask(h, w, 0), floor};
  for (const auto& r : records) {
    const auto it = scores.find(r.key());
    if (it == scores.end())
      throw Error(Errc::MissingDecision, "no score for segment " + std::to_string(r.segment_id) + " of image " + std::to_string(r.image_id));
    detail::check_mask(r, h, w);
    const BinaryMask m = rle_decode(r.mask);
    for (std::size_t p = 0; p < m.data.size(); ++p) {
      if (!m.data[p] || (roi && !roi->data[p])) continue;
      if (!out.covered.data[p] || it->second > out.scores.data[p]) out.scores.data[p] = it->second;
      out.covered.data[p] = 1;
    }
  }
  return out;
}

// Score map file: one JSON header line, then H*W f32-LE scores, then H*W
// coverage bytes (0/1), all row-major.

inline void write_score_map(const std::filesystem::path& path, const PixelScoreMap& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::IoError, "cannot open " + path.string() + " for writing");
  const nlohmann::json header{{"format", "LRSM0001"}, {"height", m.scores.height}, {"width", m.scores.width}, {"floor", m.floor}};
  out << header.dump() << '\n';
  for (double s : m.scores.data) detail::put_f32(out, static_cast<float>(s));
  out.write(reinterpret_cast<const char*>(m.covered.data.data()), static_cast<std::streamsize>(m.covered.size()));
  if (!out) throw Error(Errc::IoError, "failed writing " + path.string());
}

inline PixelScoreMap read_score_map(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  PixelScoreMap m;
  try {
    const auto header = nlohmann::json::parse(line);
    if (header.at("format").get<std::string>() != "LRSM0001") throw Error(Errc::BadMagic, "not a score map");
    const int h = header.at("height").get<int>();
    const int w = header.at("width").get<int>();
    m = PixelScoreMap{Grid<double>(h, w), BinaryMask(h, w, 0), header.at("floor").get<double>()};
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::MalformedMetadata, "score map header: " + std::string(e.what()));
  }
  const std::string rest = detail::slurp(in);
  const std::size_t n = m.scores.size();
  if (rest.size() != 5 * n) throw Error(Errc::TruncatedFile, "score map payload has wrong length");
  const auto* p = reinterpret_cast<const unsigned char*>(rest.data());
  for (std::size_t i = 0; i < n; ++i) m.scores.data[i] = detail::get_f32(p + 4 * i);
  for (std::size_t i = 0; i < n; ++i) m.covered.data[i] = p[4 * n + i] ? 1 : 0;
  return m;
}

}  // namespace lrseg
