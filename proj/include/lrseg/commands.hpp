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

// Subcommand bodies behind the lrseg binary. Each writes its outputs plus
// run_config.json into the output directory. Paths are echoed as given so
// two runs from different working directories with relative paths produce
// identical bytes.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lrseg/classifier.hpp"
#include "lrseg/container.hpp"
#include "lrseg/error.hpp"
#include "lrseg/eval_report.hpp"
#include "lrseg/label_map.hpp"
#include "lrseg/metrics.hpp"
#include "lrseg/model_io.hpp"
#include "lrseg/parallel.hpp"
#include "lrseg/pipeline.hpp"
#include "lrseg/reference_set.hpp"
#include "lrseg/svg.hpp"
#include "lrseg/synth.hpp"

namespace lrseg::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

inline constexpr const char* kVersion = "lrseg 0.1.0";

enum ExitCode : int { kOk = 0, kUsage = 2, kDataError = 3, kNumericFailure = 4 };

inline int exit_code(Errc e) noexcept {
  switch (e) {
    case Errc::InvalidArgument:
    case Errc::UnknownScenario: return kUsage;
    case Errc::NumericFailure: return kNumericFailure;
    default: return kDataError;
  }
}

inline void write_run_config(const fs::path& dir, const std::string& command, json options) {
  fs::create_directories(dir);
  json cfg{{"command", command}, {"version", kVersion}, {"options", std::move(options)}};
  write_json_file(dir / "run_config.json", cfg);
}

inline std::string image_file(const char* prefix, std::uint32_t id, const char* ext) {
  return std::string(prefix) + "_" + std::to_string(id) + ext;
}

// Parses "<prefix>_<id><ext>"; nullopt for anything else.
inline std::optional<std::uint32_t> parse_image_file(const std::string& name, const std::string& prefix, const std::string& ext) {
  if (name.size() <= prefix.size() + 1 + ext.size()) return std::nullopt;
  if (name.compare(0, prefix.size() + 1, prefix + "_") != 0) return std::nullopt;
  if (name.compare(name.size() - ext.size(), ext.size(), ext) != 0) return std::nullopt;
  const std::string digits = name.substr(prefix.size() + 1, name.size() - prefix.size() - 1 - ext.size());
  if (digits.empty() || digits.size() > 9 || !std::all_of(digits.begin(), digits.end(), [](char c) { return c >= '0' && c <= '9'; }))
    return std::nullopt;
  return static_cast<std::uint32_t>(std::stoul(digits));
}

inline std::map<std::uint32_t, fs::path> list_images(const fs::path& dir, const std::string& prefix, const std::string& ext) {
  if (!fs::is_directory(dir)) throw Error(Errc::IoError, dir.string() + " is not a directory");
  std::map<std::uint32_t, fs::path> out;
  for (const auto& entry : fs::directory_iterator(dir))
    if (auto id = parse_image_file(entry.path().filename().string(), prefix, ext)) out[*id] = entry.path();
  return out;
}

// ---------------------------------------------------------------------------
// synth

struct SynthOptions {
  ScenarioConfig scenario;
  SceneConfig scene;
  int n_free = 500;
  int n_obstacle = 500;
  std::uint64_t seed = 0;
  fs::path out;
};

inline json to_json(const SynthOptions& o) {
  return {{"scenario", std::string(to_string(o.scenario.scenario))},
          {"dim", o.scenario.dim},
          {"separation", o.scenario.separation},
          {"noise", o.scenario.noise},
          {"offset", o.scenario.offset},
          {"n_free", o.n_free},
          {"n_obstacle", o.n_obstacle},
          {"images", o.scene.images},
          {"height", o.scene.height},
          {"width", o.scene.width},
          {"tile", o.scene.tile},
          {"obstacles_per_image", o.scene.obstacles_per_image},
          {"ignore_rows", o.scene.ignore_rows},
          {"seed", o.seed},
          {"out", o.out.generic_string()}};
}

/// free.lrsf, obstacle.lrsf, scene.lrsf, roi.pgm and gt/gt_<id>.pgm.
inline void run_synth(const SynthOptions& o, std::ostream& log) {
  if (o.n_free < 1 || o.n_obstacle < 1) throw Error(Errc::InvalidArgument, "reference sets need at least one sample");
  fs::create_directories(o.out / "gt");
  Rng free_rng = make_rng(o.seed, 1), obstacle_rng = make_rng(o.seed, 2);
  const Matrix free = sample_scenario(o.scenario, ReferenceKind::free, o.n_free, free_rng);
  const Matrix obstacle = sample_scenario(o.scenario, ReferenceKind::obstacle, o.n_obstacle, obstacle_rng);
  write_feature_container(o.out / "free.lrsf", reference_container(free));
  write_feature_container(o.out / "obstacle.lrsf", reference_container(obstacle));
  const SyntheticScenes scenes = make_scenes(o.scenario, o.scene, derive_seed(o.seed, 3));
  write_feature_container(o.out / "scene.lrsf", scenes.segments);
  Grid<std::uint8_t> roi = scenes.roi;
  for (auto& v : roi.data) v = v ? 255 : 0;
  write_label_map(o.out / "roi.pgm", roi);
  for (std::size_t i = 0; i < scenes.ground_truth.size(); ++i)
    write_label_map(o.out / "gt" / image_file("gt", static_cast<std::uint32_t>(i), ".pgm"), scenes.ground_truth[i]);
  write_run_config(o.out, "synth", to_json(o));
  log << "synth " << to_string(o.scenario.scenario) << ": " << o.n_free << " free, " << o.n_obstacle << " obstacle references, "
      << scenes.segments.records.size() << " segments over " << o.scene.images << " images\n";
}

// ---------------------------------------------------------------------------
// fit

struct FitOptions {
  EstimatorKind kind = EstimatorKind::knn;
  fs::path free;
  fs::path obstacle;
  fs::path out;
  EstimatorConfig estimator;
};

inline json to_json(const FitOptions& o) {
  const auto& e = o.estimator;
  json j{{"kind", std::string(to_string(o.kind))},
         {"free", o.free.generic_string()},
         {"obstacle", o.obstacle.generic_string()},
         {"out", o.out.generic_string()},
         {"seed", e.seed},
         {"normalize", e.normalize_for(o.kind)},
         {"threshold", e.threshold.value_or(default_threshold(o.kind))}};
  switch (o.kind) {
    case EstimatorKind::gmm:
      j["K"] = e.components;
      j["em"] = {{"max_iter", e.em.max_iter}, {"rel_tol", e.em.rel_tol}, {"variance_floor", e.em.variance_floor}};
      break;
    case EstimatorKind::flow:
      j["flow"] = {{"blocks", e.flow.blocks},       {"bins", e.flow.bins},
                   {"tail_bound", e.flow.tail_bound}, {"hidden", e.flow.hidden},
                   {"hidden_layers", e.flow.hidden_layers}, {"min_bin", e.flow.min_bin},
                   {"min_derivative", e.flow.min_derivative}};
      j["train"] = {{"epochs", e.flow_train.epochs},       {"batch_size", e.flow_train.batch_size},
                    {"step_size", e.flow_train.step_size}, {"beta1", e.flow_train.beta1},
                    {"beta2", e.flow_train.beta2},         {"epsilon", e.flow_train.epsilon}};
      break;
    case EstimatorKind::knn:
      j["k"] = e.k;
      break;
  }
  return j;
}

struct FitSummary {
  /// Mean log-density (or mean top-k similarity for knn) of each reference set under its own model.
  double free_score = 0.0;
  double obstacle_score = 0.0;
  /// Flow only: the same quantity for the actnorm-initialized, untrained model.
  std::optional<double> free_init, obstacle_init;
  Eigen::Index free_size = 0, obstacle_size = 0;
};

namespace detail {

inline double mean_score(const DensityModel& m, const Matrix& data) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < data.rows(); ++i) {
    const Vector row = data.row(i).transpose();
    s += density_score(m, std::span<const double>(row.data(), static_cast<std::size_t>(row.size())));
  }
  return data.rows() == 0 ? 0.0 : s / static_cast<double>(data.rows());
}

}  // namespace detail

inline FitSummary run_fit(const FitOptions& o, std::ostream& log) {
  const FeatureContainer fc = read_feature_container(o.free);
  const FeatureContainer oc = read_feature_container(o.obstacle);
  if (fc.header.dim != oc.header.dim)
    throw Error(Errc::DimMismatch, "free container has C=" + std::to_string(fc.header.dim) + ", obstacle container has C=" +
                                       std::to_string(oc.header.dim));
  const bool normalize = o.estimator.normalize_for(o.kind);
  const ReferenceSet free = make_reference_set(fc, ReferenceKind::free, normalize);
  const ReferenceSet obstacle = make_reference_set(oc, ReferenceKind::obstacle, normalize);
  const EstimatorPair pair = fit_pair(o.kind, free, obstacle, o.estimator);

  FitSummary s;
  s.free_size = free.size();
  s.obstacle_size = obstacle.size();
  s.free_score = detail::mean_score(pair.free_model, free.features);
  s.obstacle_score = detail::mean_score(pair.obstacle_model, obstacle.features);
  if (o.kind == EstimatorKind::flow) {
    auto init = [&](const Matrix& data, std::uint64_t stream) {
      FlowTrainConfig tc = o.estimator.flow_train;
      tc.seed = derive_seed(o.estimator.seed, stream);
      tc.epochs = 0;
      return detail::mean_score(train_flow(data, o.estimator.flow, tc), data);
    };
    s.free_init = init(free.features, 1);
    s.obstacle_init = init(obstacle.features, 2);
  }

  save_pair(o.out, pair);
  write_run_config(o.out, "fit", to_json(o));
  log << "fit " << to_string(o.kind) << " C=" << pair.dim() << "\n";
  switch (o.kind) {
    case EstimatorKind::gmm:
      log << "  free:     K=" << o.estimator.components << " mean log-likelihood " << s.free_score << "\n"
          << "  obstacle: K=" << o.estimator.components << " mean log-likelihood " << s.obstacle_score << "\n";
      break;
    case EstimatorKind::flow:
      log << "  free:     mean log-density " << *s.free_init << " -> " << s.free_score << "\n"
          << "  obstacle: mean log-density " << *s.obstacle_init << " -> " << s.obstacle_score << "\n";
      break;
    case EstimatorKind::knn:
      log << "  free:     index size " << s.free_size << ", k=" << o.estimator.k << "\n"
          << "  obstacle: index size " << s.obstacle_size << ", k=" << o.estimator.k << "\n";
      break;
  }
  return s;
}

// ---------------------------------------------------------------------------
// predict

struct PredictOptions {
  fs::path manifest;
  fs::path segments;
  fs::path out;
  double min_predicted_iou = 0.88;
  double min_stability = 0.90;
  double dedup_iou_threshold = 0.90;
  std::optional<fs::path> roi;
  /// Emit maps for images 0..n-1 even when the container has no segments for some.
  std::optional<std::uint32_t> image_count;
};

inline json to_json(const PredictOptions& o) {
  return {{"manifest", o.manifest.generic_string()},
          {"segments", o.segments.generic_string()},
          {"out", o.out.generic_string()},
          {"min_predicted_iou", o.min_predicted_iou},
          {"min_stability", o.min_stability},
          {"dedup_iou_threshold", o.dedup_iou_threshold},
          {"roi", o.roi ? json(o.roi->generic_string()) : json(nullptr)},
          {"image_count", o.image_count ? json(*o.image_count) : json(nullptr)}};
}

/// Per image: pred_<id>.pgm, score_<id>.lrsm, decisions_<id>.jsonl.
inline std::size_t run_predict(const PredictOptions& o, std::ostream& log) {
  const EstimatorPair pair = load_pair(o.manifest);
  const FeatureContainer c = read_feature_container(o.segments);
  if (static_cast<int>(c.header.dim) != pair.dim())
    throw Error(Errc::DimMismatch, "segments have C=" + std::to_string(c.header.dim) + ", models have C=" + std::to_string(pair.dim()));
  const int h = static_cast<int>(c.header.height), w = static_cast<int>(c.header.width);

  FilterConfig filter{o.min_predicted_iou, o.min_stability, o.dedup_iou_threshold, std::nullopt};
  if (o.roi) {
    filter.roi = read_binary_mask(*o.roi);
    if (!filter.roi->same_shape(h, w)) throw Error(Errc::ShapeMismatch, "ROI does not match image dimensions");
  }
  filter.validate();

  std::map<std::uint32_t, std::vector<SegmentRecord>> by_image;
  if (o.image_count)
    for (std::uint32_t i = 0; i < *o.image_count; ++i) by_image[i];
  for (const auto& r : c.records) by_image[r.image_id].push_back(r);
  std::vector<std::uint32_t> ids;
  for (const auto& [id, recs] : by_image) ids.push_back(id);

  fs::create_directories(o.out);
  std::vector<std::size_t> kept(ids.size()), obstacles(ids.size());
  parallel_for(ids.size(), [&](std::size_t n) {
    const std::uint32_t id = ids[n];
    const auto survivors = filter_segments(by_image.at(id), filter);
    std::vector<LrDecision> decisions;
    std::map<SegmentKey, double> scores;
    std::string lines;
    for (const auto& r : survivors) {
      const std::vector<double> t(r.feature.begin(), r.feature.end());
      const LrDecision d = decide(pair, r.key(), t);
      const double common = common_scale(pair.kind, d.score);
      decisions.push_back(d);
      scores[d.key] = common;
      obstacles[n] += d.is_obstacle ? 1 : 0;
      json line{{"image_id", id}, {"segment_id", r.segment_id}, {"is_obstacle", d.is_obstacle}, {"common_score", common}};
      line["score"] = std::isfinite(d.score) ? json(d.score) : json("inf");
      lines += line.dump() + "\n";
    }
    kept[n] = survivors.size();
    const BinaryMask* roi = filter.roi ? &*filter.roi : nullptr;
    write_label_map(o.out / image_file("pred", id, ".pgm"), compose_decision_map(survivors, decisions, h, w, roi));
    write_score_map(o.out / image_file("score", id, ".lrsm"), compose_score_map(survivors, scores, h, w, -kScoreClamp, roi));
    std::ofstream jl(o.out / image_file("decisions", id, ".jsonl"), std::ios::binary);
    jl << lines;
    if (!jl) throw Error(Errc::IoError, "failed writing decisions for image " + std::to_string(id));
  });
  write_run_config(o.out, "predict", to_json(o));
  std::size_t total_kept = 0, total_obstacles = 0;
  for (std::size_t n = 0; n < ids.size(); ++n) {
    total_kept += kept[n];
    total_obstacles += obstacles[n];
  }
  log << "predict " << to_string(pair.kind) << ": " << ids.size() << " images, " << total_kept << " of " << c.records.size()
      << " segments kept, " << total_obstacles << " marked obstacle\n";
  return ids.size();
}

// ---------------------------------------------------------------------------
// eval

struct EvalOptions {
  fs::path pred;
  fs::path gt;
  fs::path out;
  ComponentConfig components;
};

inline json to_json(const EvalOptions& o) {
  return {{"pred", o.pred.generic_string()},
          {"gt", o.gt.generic_string()},
          {"out", o.out.generic_string()},
          {"thresholds", o.components.thresholds},
          {"connectivity", static_cast<int>(o.components.connectivity)},
          {"siou_union", o.components.siou_union == SiouUnion::all_predicted ? "all_predicted" : "intersecting_components"}};
}

struct ImageEval {
  std::uint32_t image_id = 0;
  bool missing_prediction = false;
  std::vector<ScoredPixel> pixels;
  ComponentScores scores;
};

/// Pixel scores come from score_<id>.lrsm when present, else from the
/// decision map (obstacle pixels at +50, the rest at the floor). Ground-truth
/// images without a prediction count as all-free predictions.
inline EvalReport run_eval(const EvalOptions& o, std::ostream& log) {
  const auto gts = list_images(o.gt, "gt", ".pgm");
  const auto preds = list_images(o.pred, "pred", ".pgm");
  for (const auto& [id, path] : preds)
    if (!gts.contains(id)) throw Error(Errc::MissingGroundTruth, "no ground truth for " + path.filename().string());
  if (o.components.thresholds.empty()) throw Error(Errc::InvalidArgument, "threshold grid is empty");

  std::vector<ImageEval> images;
  for (const auto& [id, path] : gts) images.push_back({id, !preds.contains(id), {}, {}});
  std::vector<fs::path> gt_paths;
  for (const auto& [id, path] : gts) gt_paths.push_back(path);

  parallel_for(images.size(), [&](std::size_t n) {
    auto& im = images[n];
    const LabelMap gt = read_label_map(gt_paths[n]);
    LabelMap pred(gt.height, gt.width, LabelMap::kFree);
    if (!im.missing_prediction) pred = read_label_map(preds.at(im.image_id));
    if (!pred.same_shape(gt)) throw Error(Errc::ShapeMismatch, "prediction and ground truth differ for image " + std::to_string(im.image_id));
    PixelScoreMap sm{Grid<double>(gt.height, gt.width, -kScoreClamp), BinaryMask(gt.height, gt.width, 0), -kScoreClamp};
    const fs::path score_path = o.pred / image_file("score", im.image_id, ".lrsm");
    if (!im.missing_prediction && fs::exists(score_path)) {
      sm = read_score_map(score_path);
      if (!sm.scores.same_shape(gt)) throw Error(Errc::ShapeMismatch, "score map and ground truth differ for image " + std::to_string(im.image_id));
      if (sm.floor != -kScoreClamp) throw Error(Errc::MalformedMetadata, "score maps must share the floor " + std::to_string(-kScoreClamp));
    } else {
      for (std::size_t p = 0; p < pred.data.size(); ++p)
        if (pred.data[p] == LabelMap::kObstacle) {
          sm.scores.data[p] = kScoreClamp;
          sm.covered.data[p] = 1;
        }
    }
    collect_pixels(sm.scores, gt, im.pixels);
    im.scores = component_scores(pred, gt, o.components);
  });

  std::vector<ScoredPixel> pixels;
  ComponentScores scores;
  for (const auto& im : images) {
    pixels.insert(pixels.end(), im.pixels.begin(), im.pixels.end());
    scores.append(im.scores);
  }
  const EvalReport report = make_eval_report(pixels, -kScoreClamp, scores, o.components.thresholds, images.size());

  json j = to_json(report);
  json per_image = json::array();
  std::size_t missing = 0;
  for (const auto& im : images) {
    const EvalReport r = make_eval_report(im.pixels, -kScoreClamp, im.scores, o.components.thresholds, 1);
    json e = to_json(r);
    e.erase("f1_table");
    e.erase("images");
    e["image_id"] = im.image_id;
    e["missing_prediction"] = im.missing_prediction;
    missing += im.missing_prediction ? 1 : 0;
    per_image.push_back(std::move(e));
  }
  j["missing_predictions"] = missing;
  j["per_image"] = std::move(per_image);

  fs::create_directories(o.out);
  write_json_file(o.out / "eval.json", j);
  std::string text = to_text(report);
  if (missing) text += "\n" + std::to_string(missing) + " ground-truth image(s) had no prediction and were scored as all-free\n";
  std::ofstream txt(o.out / "eval.txt", std::ios::binary);
  txt << text;
  if (!txt) throw Error(Errc::IoError, "failed writing eval.txt");
  write_run_config(o.out, "eval", to_json(o));
  log << text;
  return report;
}

// ---------------------------------------------------------------------------
// report

struct ReportOptions {
  fs::path manifest;
  fs::path out;
  std::optional<fs::path> free;
  std::optional<fs::path> obstacle;
  int resolution = 80;
};

inline json to_json(const ReportOptions& o) {
  return {{"manifest", o.manifest.generic_string()},
          {"out", o.out.generic_string()},
          {"free", o.free ? json(o.free->generic_string()) : json(nullptr)},
          {"obstacle", o.obstacle ? json(o.obstacle->generic_string()) : json(nullptr)},
          {"resolution", o.resolution}};
}

/// free.svg, obstacle.svg and ratio.svg over a grid covering the reference
/// points (or a default window). Needs C = 2.
inline void run_report(const ReportOptions& o, std::ostream& log) {
  if (o.resolution < 2 || o.resolution > 1000) throw Error(Errc::InvalidArgument, "resolution must be in [2, 1000]");
  const EstimatorPair pair = load_pair(o.manifest);
  if (pair.dim() != 2) throw Error(Errc::DimMismatch, "report renders 2-D feature spaces only, models have C=" + std::to_string(pair.dim()));

  std::vector<svg::Point> points;
  auto add = [&](const std::optional<fs::path>& p, bool obstacle) {
    if (!p) return;
    const FeatureContainer c = read_feature_container(*p);
    if (c.header.dim != 2) throw Error(Errc::DimMismatch, p->string() + " is not 2-D");
    for (const auto& r : c.records) points.push_back({r.feature[0], r.feature[1], obstacle});
  };
  add(o.free, false);
  add(o.obstacle, true);

  svg::Bounds b{0.0, 20.0, -12.0, 12.0};
  if (!points.empty()) {
    b = {points[0].x, points[0].x, points[0].y, points[0].y};
    for (const auto& p : points) {
      b.x_min = std::min(b.x_min, p.x);
      b.x_max = std::max(b.x_max, p.x);
      b.y_min = std::min(b.y_min, p.y);
      b.y_max = std::max(b.y_max, p.y);
    }
    const double pad = 0.1 * std::max({b.x_max - b.x_min, b.y_max - b.y_min, 1e-3});
    b = {b.x_min - pad, b.x_max + pad, b.y_min - pad, b.y_max + pad};
  }

  const int n = o.resolution;
  Grid<double> free(n, n), obstacle(n, n), ratio(n, n);
  parallel_for(static_cast<std::size_t>(n), [&](std::size_t row) {
    const int r = static_cast<int>(row);
    for (int c = 0; c < n; ++c) {
      const double q[2] = {b.x_min + (c + 0.5) / n * (b.x_max - b.x_min), b.y_max - (r + 0.5) / n * (b.y_max - b.y_min)};
      try {
        const auto t = lrseg::detail::prepare_query(pair, q);
        free.at(r, c) = density_score(pair.free_model, t);
        obstacle.at(r, c) = density_score(pair.obstacle_model, t);
        ratio.at(r, c) = common_scale(pair.kind, lr_score(pair, q));
      } catch (const Error& e) {
        if (e.code() != Errc::ZeroQueryVector) throw;
        free.at(r, c) = obstacle.at(r, c) = ratio.at(r, c) = 0.0;
      }
    }
  });
  // Clamp log-densities so the colour ramp is not swamped by far tails.
  if (pair.kind != EstimatorKind::knn)
    for (auto* g : {&free, &obstacle})
      for (double& v : g->data) v = std::max(v, -kScoreClamp);

  fs::create_directories(o.out);
  const std::string what = pair.kind == EstimatorKind::knn ? "mean top-k similarity" : "log-density";
  auto write = [&](const char* name, const std::string& body) {
    std::ofstream f(o.out / name, std::ios::binary);
    f << body;
    if (!f) throw Error(Errc::IoError, std::string("failed writing ") + name);
  };
  write("free.svg", svg::heatmap("free space: " + what, free, b, points, false));
  write("obstacle.svg", svg::heatmap("obstacle: " + what, obstacle, b, points, false));
  write("ratio.svg", svg::heatmap("log likelihood ratio", ratio, b, points, true));
  write_run_config(o.out, "report", to_json(o));
  log << "report: wrote free.svg, obstacle.svg, ratio.svg (" << n << "x" << n << ")\n";
}

}  // namespace lrseg::cli
