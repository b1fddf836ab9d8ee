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

#include <cstdio>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lrseg/metrics.hpp"

namespace lrseg {

struct EvalReport {
  std::size_t images = 0;
  ApResult ap;
  Fpr95Result fpr95;
  ComponentMetrics components;
  std::size_t gt_components = 0;
  std::size_t pred_components = 0;
};

inline EvalReport make_eval_report(std::span<const ScoredPixel> pixels, std::optional<double> floor,
                                   const ComponentScores& scores, std::span<const double> thresholds, std::size_t images) {
  EvalReport r;
  r.images = images;
  r.ap = average_precision(pixels);
  r.fpr95 = fpr_at_95tpr(pixels, floor);
  r.components = summarize_components(scores, thresholds);
  r.gt_components = scores.siou.size();
  r.pred_components = scores.ppv.size();
  return r;
}

inline nlohmann::json to_json(const EvalReport& r) {
  nlohmann::json table = nlohmann::json::array();
  for (const auto& row : r.components.table)
    table.push_back({{"threshold", row.threshold}, {"tp", row.tp}, {"fn", row.fn}, {"fp", row.fp}, {"f1", row.f1}});
  nlohmann::json warnings = nlohmann::json::array();
  if (r.ap.empty_eval) warnings.push_back("EmptyEval: no positive ground-truth pixels");
  if (r.components.empty_eval) warnings.push_back("EmptyEval: no ground-truth or predicted components");
  if (!r.fpr95.attainable && !r.fpr95.empty_eval) warnings.push_back("FPR95 unattainable: 95% TPR needs uncovered pixels");
  return {{"images", r.images},
          {"ap", r.ap.value},
          {"fpr95", r.fpr95.attainable ? nlohmann::json(r.fpr95.value) : nlohmann::json("unattainable")},
          {"fpr95_at_floor", r.fpr95.value},
          {"siou_gt", r.components.siou_gt},
          {"ppv", r.components.ppv},
          {"mean_f1", r.components.mean_f1},
          {"gt_components", r.gt_components},
          {"pred_components", r.pred_components},
          {"f1_table", std::move(table)},
          {"warnings", std::move(warnings)}};
}

inline std::string to_text(const EvalReport& r) {
  char buf[160];
  std::string s;
  auto line = [&](const char* name, const std::string& value) {
    std::snprintf(buf, sizeof buf, "%-16s %s\n", name, value.c_str());
    s += buf;
  };
  auto num = [](double v) {
    char b[32];
    std::snprintf(b, sizeof b, "%.4f", v);
    return std::string(b);
  };
  line("images", std::to_string(r.images));
  line("AP", num(r.ap.value) + (r.ap.empty_eval ? "  (empty)" : ""));
  line("FPR95", r.fpr95.attainable ? num(r.fpr95.value) : "-  (" + num(r.fpr95.value) + " at floor)");
  line("sIoU_gt", num(r.components.siou_gt));
  line("PPV", num(r.components.ppv));
  line("mean F1", num(r.components.mean_f1));
  line("gt components", std::to_string(r.gt_components));
  line("pred components", std::to_string(r.pred_components));
  s += "\n   tau     TP     FN     FP      F1\n";
  for (const auto& row : r.components.table) {
    std::snprintf(buf, sizeof buf, "%6.2f %6zu %6zu %6zu %7.4f\n", row.threshold, row.tp, row.fn, row.fp, row.f1);
    s += buf;
  }
  return s;
}

}  // namespace lrseg
