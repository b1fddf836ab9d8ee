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

// Pixel-level (AP, FPR95) and component-level (sIoU_gt, PPV, mean F1)
// evaluation against label maps. Ignore-labeled pixels never count.

#include <algorithm>
#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <vector>

#include "lrseg/error.hpp"
#include "lrseg/pipeline.hpp"
#include "lrseg/types.hpp"

namespace lrseg {

enum class Connectivity { four = 4, eight = 8 };

struct ComponentSet {
  Grid<int> labels;  // 0 background, 1..count
  int count = 0;
};

/// Labels maximal connected foreground regions; ids follow the first pixel
/// of each region in row-major order.
inline ComponentSet connected_components(const BinaryMask& mask, Connectivity conn = Connectivity::eight) {
  ComponentSet cs{Grid<int>(mask.height, mask.width, 0), 0};
  std::deque<std::pair<int, int>> queue;
  for (int r = 0; r < mask.height; ++r) {
    for (int c = 0; c < mask.width; ++c) {
      if (!mask.at(r, c) || cs.labels.at(r, c)) continue;
      const int id = ++cs.count;
      cs.labels.at(r, c) = id;
      queue.emplace_back(r, c);
      while (!queue.empty()) {
        const auto [y, x] = queue.front();
        queue.pop_front();
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            if ((dy == 0 && dx == 0) || (conn == Connectivity::four && dy != 0 && dx != 0)) continue;
            const int ny = y + dy, nx = x + dx;
            if (ny < 0 || nx < 0 || ny >= mask.height || nx >= mask.width) continue;
            if (!mask.at(ny, nx) || cs.labels.at(ny, nx)) continue;
            cs.labels.at(ny, nx) = id;
            queue.emplace_back(ny, nx);
          }
        }
      }
    }
  }
  return cs;
}

struct ScoredPixel {
  double score = 0.0;
  bool positive = false;
};

/// Appends the non-ignored pixels of one image.
inline void collect_pixels(const Grid<double>& scores, const LabelMap& gt, std::vector<ScoredPixel>& out) {
  if (!scores.same_shape(gt)) throw Error(Errc::ShapeMismatch, "score map and ground truth differ in shape");
  for (std::size_t i = 0; i < gt.data.size(); ++i)
    if (gt.data[i] != LabelMap::kIgnore) out.push_back({scores.data[i], gt.data[i] == LabelMap::kObstacle});
}

struct ApResult {
  double value = 0.0;
  /// No positive pixels to evaluate (e.g. everything ignored).
  bool empty_eval = false;
};

struct Fpr95Result {
  double value = 0.0;
  /// False when reaching 95% TPR requires pixels at or below the floor score,
  /// i.e. pixels no segment covered.
  bool attainable = true;
  bool empty_eval = false;
};

namespace detail {

struct ThresholdStep {
  double score;
  std::size_t tp;
  std::size_t fp;
};

// Cumulative counts after admitting each distinct score, highest first.
inline std::vector<ThresholdStep> threshold_steps(std::span<const ScoredPixel> px, std::size_t& positives) {
  std::vector<ScoredPixel> sorted(px.begin(), px.end());
  std::sort(sorted.begin(), sorted.end(), [](const ScoredPixel& a, const ScoredPixel& b) { return a.score > b.score; });
  std::vector<ThresholdStep> steps;
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < sorted.size();) {
    const double s = sorted[i].score;
    for (; i < sorted.size() && sorted[i].score == s; ++i) (sorted[i].positive ? tp : fp) += 1;
    steps.push_back({s, tp, fp});
  }
  positives = tp;
  return steps;
}

}  // namespace detail

/// Step-wise area under the precision-recall curve over distinct score thresholds.
inline ApResult average_precision(std::span<const ScoredPixel> px) {
  std::size_t pos = 0;
  const auto steps = detail::threshold_steps(px, pos);
  if (pos == 0) return {0.0, true};
  double ap = 0.0, prev_recall = 0.0;
  for (const auto& s : steps) {
    const double recall = static_cast<double>(s.tp) / static_cast<double>(pos);
    const double precision = static_cast<double>(s.tp) / static_cast<double>(s.tp + s.fp);
    ap += (recall - prev_recall) * precision;
    prev_recall = recall;
  }
  return {ap, false};
}

/// Lowest false-positive rate among thresholds whose TPR is at least 0.95.
/// Pixels sharing a score are admitted together, so ties are never split in
/// favor of positives. With `floor`, thresholds at or below it make the
/// result unattainable (the value at that threshold is still reported).
inline Fpr95Result fpr_at_95tpr(std::span<const ScoredPixel> px, std::optional<double> floor = std::nullopt) {
  std::size_t pos = 0;
  const auto steps = detail::threshold_steps(px, pos);
  if (pos == 0) return {0.0, false, true};
  const std::size_t neg = px.size() - pos;
  for (const auto& s : steps) {
    if (s.tp * 20 < pos * 19) continue;
    const double fpr = neg == 0 ? 0.0 : static_cast<double>(s.fp) / static_cast<double>(neg);
    return {fpr, !(floor && s.score <= *floor), false};
  }
  return {1.0, false, false};
}

inline ApResult average_precision(const PixelScoreMap& m, const LabelMap& gt) {
  std::vector<ScoredPixel> px;
  collect_pixels(m.scores, gt, px);
  return average_precision(px);
}

inline Fpr95Result fpr_at_95tpr(const PixelScoreMap& m, const LabelMap& gt) {
  std::vector<ScoredPixel> px;
  collect_pixels(m.scores, gt, px);
  return fpr_at_95tpr(px, m.floor);
}

/// Mann-Whitney AUROC; ties count one half.
inline double auroc(std::span<const double> positives, std::span<const double> negatives) {
  if (positives.empty() || negatives.empty()) throw Error(Errc::InvalidArgument, "AUROC needs both classes");
  std::vector<std::pair<double, int>> all;
  all.reserve(positives.size() + negatives.size());
  for (double v : positives) all.emplace_back(v, 1);
  for (double v : negatives) all.emplace_back(v, 0);
  std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  double wins = 0.0;
  std::size_t neg_below = 0;
  for (std::size_t i = 0; i < all.size();) {
    std::size_t j = i, p = 0, n = 0;
    for (; j < all.size() && all[j].first == all[i].first; ++j) (all[j].second ? p : n) += 1;
    wins += static_cast<double>(p) * (static_cast<double>(neg_below) + 0.5 * static_cast<double>(n));
    neg_below += n;
    i = j;
  }
  return wins / (static_cast<double>(positives.size()) * static_cast<double>(negatives.size()));
}

// ---------------------------------------------------------------------------
// Component level

/// How the sIoU denominator collects predictions around a ground-truth component.
enum class SiouUnion {
  /// Every predicted-positive pixel in the image.
  all_predicted,
  /// Only predicted components that intersect the gt component.
  intersecting_components,
};

inline std::vector<double> default_threshold_grid() {
  std::vector<double> g;
  for (int i = 0; i <= 10; ++i) g.push_back(static_cast<double>(25 + 5 * i) / 100.0);
  return g;
}

struct ComponentConfig {
  std::vector<double> thresholds = default_threshold_grid();
  Connectivity connectivity = Connectivity::eight;
  SiouUnion siou_union = SiouUnion::all_predicted;
};

/// Per-component scores; concatenate across images before summarizing.
struct ComponentScores {
  std::vector<double> siou;  // one per gt component
  std::vector<double> ppv;   // one per predicted component

  void append(const ComponentScores& o) {
    siou.insert(siou.end(), o.siou.begin(), o.siou.end());
    ppv.insert(ppv.end(), o.ppv.begin(), o.ppv.end());
  }
};

struct F1Row {
  double threshold = 0.0;
  std::size_t tp = 0;
  std::size_t fn = 0;
  std::size_t fp = 0;
  double f1 = 0.0;
};

struct ComponentMetrics {
  double siou_gt = 0.0;
  double ppv = 0.0;
  double mean_f1 = 0.0;
  std::vector<F1Row> table;
  /// Neither ground-truth nor predicted components exist.
  bool empty_eval = false;
};

inline ComponentScores component_scores(const LabelMap& pred, const LabelMap& gt, const ComponentConfig& cfg = {}) {
  if (!pred.same_shape(gt)) throw Error(Errc::ShapeMismatch, "prediction and ground truth differ in shape");
  const int h = gt.height, w = gt.width;
  BinaryMask gmask(h, w, 0), pmask(h, w, 0);
  for (std::size_t i = 0; i < gt.data.size(); ++i) {
    if (gt.data[i] == LabelMap::kIgnore) continue;
    gmask.data[i] = gt.data[i] == LabelMap::kObstacle;
    pmask.data[i] = pred.data[i] == LabelMap::kObstacle;
  }
  const ComponentSet gc = connected_components(gmask, cfg.connectivity);
  const ComponentSet pc = connected_components(pmask, cfg.connectivity);

  std::vector<std::size_t> g_area(static_cast<std::size_t>(gc.count) + 1, 0), p_area(static_cast<std::size_t>(pc.count) + 1, 0);
  std::vector<std::size_t> p_in_gt(static_cast<std::size_t>(pc.count) + 1, 0), g_hit(static_cast<std::size_t>(gc.count) + 1, 0);
  // predicted components touching each gt component
  std::vector<std::vector<int>> touching(static_cast<std::size_t>(gc.count) + 1);
  std::size_t pred_outside_gt = 0;
  for (std::size_t i = 0; i < gt.data.size(); ++i) {
    const auto g = static_cast<std::size_t>(gc.labels.data[i]);
    const auto p = static_cast<std::size_t>(pc.labels.data[i]);
    if (g) ++g_area[g];
    if (p) {
      ++p_area[p];
      if (g) ++p_in_gt[p];
      else ++pred_outside_gt;
    }
    if (g && p) {
      ++g_hit[g];
      auto& t = touching[g];
      if (std::find(t.begin(), t.end(), static_cast<int>(p)) == t.end()) t.push_back(static_cast<int>(p));
    }
  }

  ComponentScores out;
  for (int g = 1; g <= gc.count; ++g) {
    const auto gi = static_cast<std::size_t>(g);
    // |g u (K \ A_g)| = |g| + |K \ G| since g and A_g together make up G
    std::size_t outside = 0;
    if (cfg.siou_union == SiouUnion::all_predicted) {
      outside = pred_outside_gt;
    } else {
      for (int p : touching[gi]) {
        const auto pi = static_cast<std::size_t>(p);
        outside += p_area[pi] - p_in_gt[pi];
      }
    }
    out.siou.push_back(static_cast<double>(g_hit[gi]) / static_cast<double>(g_area[gi] + outside));
  }
  for (int p = 1; p <= pc.count; ++p) {
    const auto pi = static_cast<std::size_t>(p);
    out.ppv.push_back(static_cast<double>(p_in_gt[pi]) / static_cast<double>(p_area[pi]));
  }
  return out;
}

inline double mean_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

inline ComponentMetrics summarize_components(const ComponentScores& s, std::span<const double> thresholds) {
  if (thresholds.empty()) throw Error(Errc::InvalidArgument, "threshold grid is empty");
  ComponentMetrics m;
  m.siou_gt = mean_of(s.siou);
  m.ppv = mean_of(s.ppv);
  m.empty_eval = s.siou.empty() && s.ppv.empty();
  double f1_total = 0.0;
  for (double tau : thresholds) {
    F1Row row{tau, 0, 0, 0, 0.0};
    row.tp = static_cast<std::size_t>(std::count_if(s.siou.begin(), s.siou.end(), [&](double v) { return v > tau; }));
    row.fn = s.siou.size() - row.tp;
    row.fp = static_cast<std::size_t>(std::count_if(s.ppv.begin(), s.ppv.end(), [&](double v) { return v <= tau; }));
    const std::size_t den = 2 * row.tp + row.fn + row.fp;
    row.f1 = den == 0 ? 0.0 : 2.0 * static_cast<double>(row.tp) / static_cast<double>(den);
    f1_total += row.f1;
    m.table.push_back(row);
  }
  m.mean_f1 = f1_total / static_cast<double>(thresholds.size());
  return m;
}

inline ComponentMetrics component_metrics(const LabelMap& pred, const LabelMap& gt, const ComponentConfig& cfg = {}) {
  return summarize_components(component_scores(pred, gt, cfg), cfg.thresholds);
}

}  // namespace lrseg
