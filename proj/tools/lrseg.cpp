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

#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "lrseg/commands.hpp"

namespace {

using namespace lrseg;
using namespace lrseg::cli;

// "a:b:step" (inclusive) or "v1,v2,...".
std::vector<double> parse_grid(const std::string& s) {
  std::vector<double> out;
  auto number = [&](const std::string& tok) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(tok, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != tok.size() || tok.empty()) throw Error(Errc::InvalidArgument, "bad number '" + tok + "' in threshold grid");
    return v;
  };
  if (s.find(':') != std::string::npos) {
    std::vector<std::string> parts;
    std::stringstream ss(s);
    for (std::string p; std::getline(ss, p, ':');) parts.push_back(p);
    if (parts.size() != 3) throw Error(Errc::InvalidArgument, "threshold grid range must be a:b:step");
    const double a = number(parts[0]), b = number(parts[1]), step = number(parts[2]);
    if (!(step > 0.0) || b < a) throw Error(Errc::InvalidArgument, "threshold grid range needs a <= b and step > 0");
    const auto n = static_cast<long>(std::floor((b - a) / step + 1e-9));
    for (long i = 0; i <= n; ++i) out.push_back(a + static_cast<double>(i) * step);
  } else {
    std::stringstream ss(s);
    for (std::string p; std::getline(ss, p, ',');) out.push_back(number(p));
  }
  for (double v : out)
    if (!(v >= 0.0 && v <= 1.0)) throw Error(Errc::InvalidArgument, "threshold grid values must lie in [0,1]");
  if (out.empty()) throw Error(Errc::InvalidArgument, "threshold grid is empty");
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Likelihood-ratio obstacle segmentation over segment features"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  SynthOptions synth;
  std::string scenario = "blobs";
  auto* s = app.add_subcommand("synth", "Generate seeded synthetic reference sets and scenes");
  s->add_option("--scenario", scenario, "blobs, moons or rings")->capture_default_str();
  s->add_option("--seed", synth.seed, "Root seed")->capture_default_str();
  s->add_option("--out", synth.out, "Output directory")->required();
  s->add_option("--n-free", synth.n_free, "Free-space reference samples")->capture_default_str();
  s->add_option("--n-obstacle", synth.n_obstacle, "Obstacle reference samples")->capture_default_str();
  s->add_option("--dim", synth.scenario.dim, "Feature dimensionality C (extra dims are noise)")->capture_default_str();
  s->add_option("--separation", synth.scenario.separation, "Class gap in noise units")->capture_default_str();
  s->add_option("--noise", synth.scenario.noise, "Noise standard deviation")->capture_default_str();
  s->add_option("--offset", synth.scenario.offset, "Distance of the scene from the origin")->capture_default_str();
  s->add_option("--images", synth.scene.images, "Scene images")->capture_default_str();
  s->add_option("--height", synth.scene.height, "Image height")->capture_default_str();
  s->add_option("--width", synth.scene.width, "Image width")->capture_default_str();
  s->add_option("--tile", synth.scene.tile, "Segment tile size")->capture_default_str();
  s->add_option("--obstacles", synth.scene.obstacles_per_image, "Planted obstacles per image")->capture_default_str();

  FitOptions fit;
  std::string kind;
  bool normalize = false, no_normalize = false;
  double threshold = 0.0;
  auto* f = app.add_subcommand("fit", "Fit the free-space and obstacle estimators");
  f->add_option("--kind", kind, "gmm, flow or knn")->required();
  f->add_option("--free", fit.free, "Free-space reference container")->required();
  f->add_option("--obstacle", fit.obstacle, "Obstacle reference container")->required();
  f->add_option("--out", fit.out, "Model output directory")->required();
  f->add_option("--seed", fit.estimator.seed, "Root seed")->capture_default_str();
  f->add_option("--K", fit.estimator.components, "GMM components")->capture_default_str();
  f->add_option("--em-max-iter", fit.estimator.em.max_iter, "EM iteration cap")->capture_default_str();
  f->add_option("--k", fit.estimator.k, "Neighbours for knn")->capture_default_str();
  f->add_option("--epochs", fit.estimator.flow_train.epochs, "Flow training epochs")->capture_default_str();
  f->add_option("--batch-size", fit.estimator.flow_train.batch_size, "Flow batch size")->capture_default_str();
  f->add_option("--lr", fit.estimator.flow_train.step_size, "Flow Adam step size")->capture_default_str();
  f->add_option("--blocks", fit.estimator.flow.blocks, "Flow blocks")->capture_default_str();
  f->add_option("--bins", fit.estimator.flow.bins, "Spline bins")->capture_default_str();
  f->add_option("--hidden", fit.estimator.flow.hidden, "Conditioner width")->capture_default_str();
  auto* norm_flag = f->add_flag("--normalize", normalize, "Unit-normalize features (default: knn only)");
  f->add_flag("--no-normalize", no_normalize, "Do not normalize features")->excludes(norm_flag);
  auto* thr = f->add_option("--threshold", threshold, "Decision threshold on the native score (default 0, knn 1)");

  PredictOptions predict;
  std::string roi;
  std::uint32_t image_count = 0;
  auto* p = app.add_subcommand("predict", "Classify segments and write per-image maps");
  p->add_option("--model", predict.manifest, "manifest.json written by fit")->required();
  p->add_option("--segments", predict.segments, "Segment container")->required();
  p->add_option("--out", predict.out, "Output directory")->required();
  auto* roi_opt = p->add_option("--roi", roi, "Binary ROI mask (PGM)");
  p->add_option("--min-iou", predict.min_predicted_iou, "Minimum predicted IoU")->capture_default_str();
  p->add_option("--min-stability", predict.min_stability, "Minimum stability score")->capture_default_str();
  p->add_option("--dedup-iou", predict.dedup_iou_threshold, "Mask IoU at which segments count as duplicates")->capture_default_str();
  auto* count_opt = p->add_option("--image-count", image_count, "Also emit all-free maps for images without segments");

  EvalOptions eval;
  std::string grid, siou_union = "all";
  int connectivity = 8;
  auto* e = app.add_subcommand("eval", "Score predictions against ground truth");
  e->add_option("--pred", eval.pred, "Directory with pred_<id>.pgm (and score_<id>.lrsm)")->required();
  e->add_option("--gt", eval.gt, "Directory with gt_<id>.pgm")->required();
  e->add_option("--out", eval.out, "Report directory")->required();
  auto* grid_opt = e->add_option("--threshold-grid", grid, "a:b:step or comma list (default 0.25:0.75:0.05)");
  e->add_option("--connectivity", connectivity, "4 or 8")->check(CLI::IsMember({4, 8}))->capture_default_str();
  e->add_option("--siou-union", siou_union,
                "all (every predicted pixel outside gt) or intersecting (touching components only)")
      ->check(CLI::IsMember({"intersecting", "all"}))
      ->capture_default_str();

  ReportOptions report;
  std::string report_free, report_obstacle;
  auto* r = app.add_subcommand("report", "Render density and ratio heatmaps for 2-D models");
  r->add_option("--model", report.manifest, "manifest.json written by fit")->required();
  r->add_option("--out", report.out, "Output directory")->required();
  auto* rf = r->add_option("--free", report_free, "Free-space reference container to overlay");
  auto* ro = r->add_option("--obstacle", report_obstacle, "Obstacle reference container to overlay");
  r->add_option("--resolution", report.resolution, "Grid cells per side")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (s->parsed()) {
      synth.scenario.scenario = parse_scenario(scenario);
      run_synth(synth, std::cout);
    } else if (f->parsed()) {
      fit.kind = parse_estimator_kind(kind);
      if (normalize) fit.estimator.normalize = true;
      if (no_normalize) fit.estimator.normalize = false;
      if (thr->count()) fit.estimator.threshold = threshold;
      run_fit(fit, std::cout);
    } else if (p->parsed()) {
      if (roi_opt->count()) predict.roi = roi;
      if (count_opt->count()) predict.image_count = image_count;
      run_predict(predict, std::cout);
    } else if (e->parsed()) {
      if (grid_opt->count()) eval.components.thresholds = parse_grid(grid);
      eval.components.connectivity = connectivity == 4 ? Connectivity::four : Connectivity::eight;
      eval.components.siou_union = siou_union == "all" ? SiouUnion::all_predicted : SiouUnion::intersecting_components;
      run_eval(eval, std::cout);
    } else if (r->parsed()) {
      if (rf->count()) report.free = report_free;
      if (ro->count()) report.obstacle = report_obstacle;
      run_report(report, std::cout);
    }
  } catch (const Error& err) {
    std::cerr << "lrseg: " << err.what() << "\n";
    return exit_code(err.code());
  } catch (const std::filesystem::filesystem_error& err) {
    std::cerr << "lrseg: IoError: " << err.what() << "\n";
    return kDataError;
  } catch (const std::exception& err) {
    std::cerr << "lrseg: " << err.what() << "\n";
    return kDataError;
  }
  return kOk;
}
