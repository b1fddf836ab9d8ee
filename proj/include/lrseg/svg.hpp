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
#include <array>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "lrseg/types.hpp"

namespace lrseg::svg {

struct Bounds {
  double x_min = 0.0, x_max = 1.0, y_min = 0.0, y_max = 1.0;
};

struct Point {
  double x = 0.0, y = 0.0;
  bool obstacle = false;
};

inline std::string rgb(double r, double g, double b) {
  char buf[8];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", static_cast<int>(std::lround(std::clamp(r, 0.0, 1.0) * 255)),
                static_cast<int>(std::lround(std::clamp(g, 0.0, 1.0) * 255)),
                static_cast<int>(std::lround(std::clamp(b, 0.0, 1.0) * 255)));
  return buf;
}

// Sequential ramp, dark blue to yellow.
inline std::string sequential(double t) {
  t = std::clamp(t, 0.0, 1.0);
  return rgb(0.27 + 0.72 * t * t, 0.0 + 0.9 * t, 0.33 + 0.35 * std::sin(3.14159 * t) - 0.2 * t);
}

// Diverging ramp around 0: blue (free) to white to red (obstacle).
inline std::string diverging(double v, double scale) {
  const double t = std::clamp(v / scale, -1.0, 1.0);
  return t < 0 ? rgb(1.0 + t, 1.0 + 0.6 * t, 1.0) : rgb(1.0, 1.0 - 0.8 * t, 1.0 - t);
}

/// Heatmap of a rows x cols grid (row 0 at the top = y_max) with optional points.
inline std::string heatmap(const std::string& title, const Grid<double>& values, const Bounds& b,
                           const std::vector<Point>& points, bool centered) {
  constexpr int kCell = 6;
  const int w = values.width * kCell, h = values.height * kCell;
  double lo = values.data.empty() ? 0.0 : values.data.front(), hi = lo, absmax = 0.0;
  for (double v : values.data) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
    absmax = std::max(absmax, std::abs(v));
  }
  std::string s = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(w) + "\" height=\"" +
                  std::to_string(h + 24) + "\">\n";
  s += "<text x=\"4\" y=\"16\" font-family=\"sans-serif\" font-size=\"13\">" + title + "</text>\n<g transform=\"translate(0,24)\">\n";
  for (int r = 0; r < values.height; ++r) {
    for (int c = 0; c < values.width; ++c) {
      const double v = values.at(r, c);
      const std::string fill = centered ? diverging(v, std::max(absmax, 1e-12)) : sequential(hi > lo ? (v - lo) / (hi - lo) : 0.5);
      s += "<rect x=\"" + std::to_string(c * kCell) + "\" y=\"" + std::to_string(r * kCell) + "\" width=\"" +
           std::to_string(kCell) + "\" height=\"" + std::to_string(kCell) + "\" fill=\"" + fill + "\"/>\n";
    }
  }
  for (const auto& p : points) {
    const double px = (p.x - b.x_min) / (b.x_max - b.x_min) * w;
    const double py = (b.y_max - p.y) / (b.y_max - b.y_min) * h;
    if (px < 0 || py < 0 || px > w || py > h) continue;
    char buf[160];
    std::snprintf(buf, sizeof buf, "<circle cx=\"%.1f\" cy=\"%.1f\" r=\"1.5\" fill=\"%s\" fill-opacity=\"0.6\"/>\n", px, py,
                  p.obstacle ? "#d62728" : "#1f77b4");
    s += buf;
  }
  s += "</g>\n</svg>\n";
  return s;
}

}  // namespace lrseg::svg
