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

// Monotone rational-quadratic spline on [-B, B] with identity tails.
// Unconstrained parameter layout per transformed coordinate (3*bins - 1 values):
//   [0, bins)            bin widths, softmax-normalized
//   [bins, 2*bins)       bin heights, softmax-normalized
//   [2*bins, 3*bins - 1) interior knot derivatives, softplus-shifted
// Boundary derivatives are fixed at 1 so the tails join smoothly.

#include <algorithm>
#include <array>
#include <cmath>
#include <span>

#include "lrseg/error.hpp"

namespace lrseg {

struct SplineShape {
  int bins = 8;
  double tail_bound = 3.0;
  double min_bin = 1e-3;
  double min_derivative = 1e-3;

  [[nodiscard]] int param_count() const noexcept { return 3 * bins - 1; }
};

struct SplineResult {
  double value = 0.0;
  /// log |d value / d input|
  double log_det = 0.0;
};

namespace detail {

inline constexpr int kMaxSplineBins = 64;

inline double softplus(double x) noexcept { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

inline double sigmoid(double x) noexcept {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// Shift making a zero raw derivative parameter map to derivative exactly 1.
inline double derivative_shift(double min_derivative) { return std::log(std::expm1(1.0 - min_derivative)); }

struct SplineKnots {
  int bins = 0;
  std::array<double, kMaxSplineBins> pw{}, ph{};         // softmax outputs
  std::array<double, kMaxSplineBins> w{}, h{};           // bin widths / heights
  std::array<double, kMaxSplineBins + 1> xs{}, ys{}, d{};  // knot positions and derivatives
  std::array<double, kMaxSplineBins + 1> dpre{};          // softplus argument per interior knot
};

inline void softmax(std::span<const double> in, double* out) {
  double m = in[0];
  for (double v : in) m = std::max(m, v);
  double s = 0.0;
  for (std::size_t i = 0; i < in.size(); ++i) s += (out[i] = std::exp(in[i] - m));
  for (std::size_t i = 0; i < in.size(); ++i) out[i] /= s;
}

inline SplineKnots make_knots(std::span<const double> raw, const SplineShape& shape) {
  const int k = shape.bins;
  if (k < 1 || k > kMaxSplineBins) throw Error(Errc::InvalidArgument, "spline bin count out of range");
  if (static_cast<int>(raw.size()) != shape.param_count()) throw Error(Errc::DimMismatch, "wrong spline parameter count");
  SplineKnots kn;
  kn.bins = k;
  const double b = shape.tail_bound;
  const double spread = 1.0 - shape.min_bin * k;
  softmax(raw.subspan(0, k), kn.pw.data());
  softmax(raw.subspan(k, k), kn.ph.data());
  kn.xs[0] = -b;
  kn.ys[0] = -b;
  for (int i = 0; i < k; ++i) {
    kn.w[i] = 2.0 * b * (shape.min_bin + spread * kn.pw[i]);
    kn.h[i] = 2.0 * b * (shape.min_bin + spread * kn.ph[i]);
    kn.xs[i + 1] = kn.xs[i] + kn.w[i];
    kn.ys[i + 1] = kn.ys[i] + kn.h[i];
  }
  const double shift = derivative_shift(shape.min_derivative);
  kn.d[0] = 1.0;
  kn.d[k] = 1.0;
  for (int i = 1; i < k; ++i) {
    kn.dpre[i] = raw[2 * k + i - 1] + shift;
    kn.d[i] = shape.min_derivative + softplus(kn.dpre[i]);
  }
  return kn;
}

inline int find_bin(const std::array<double, kMaxSplineBins + 1>& knots, int bins, double v) noexcept {
  int i = 0;
  while (i + 1 < bins && v >= knots[i + 1]) ++i;
  return i;
}

}  // namespace detail

inline SplineResult rq_spline_forward(double x, std::span<const double> raw, const SplineShape& shape) {
  if (x < -shape.tail_bound || x > shape.tail_bound) return {x, 0.0};
  const auto kn = detail::make_knots(raw, shape);
  const int k = detail::find_bin(kn.xs, kn.bins, x);
  const double w = kn.w[k], h = kn.h[k], d0 = kn.d[k], d1 = kn.d[k + 1];
  const double s = h / w;
  const double xi = (x - kn.xs[k]) / w;
  const double t = xi * (1.0 - xi);
  const double num = h * (s * xi * xi + d0 * t);
  const double den = s + (d1 + d0 - 2.0 * s) * t;
  const double dnum = s * s * (d1 * xi * xi + 2.0 * s * t + d0 * (1.0 - xi) * (1.0 - xi));
  return {kn.ys[k] + num / den, std::log(dnum) - 2.0 * std::log(den)};
}

/// Inverse map; solves the per-bin quadratic in closed form. `log_det` is
/// log |dx/dy|, the negative of the forward term at the returned point.
inline SplineResult rq_spline_inverse(double y, std::span<const double> raw, const SplineShape& shape) {
  if (y < -shape.tail_bound || y > shape.tail_bound) return {y, 0.0};
  const auto kn = detail::make_knots(raw, shape);
  const int k = detail::find_bin(kn.ys, kn.bins, y);
  const double w = kn.w[k], h = kn.h[k], d0 = kn.d[k], d1 = kn.d[k + 1];
  const double s = h / w;
  const double dy = y - kn.ys[k];
  const double sum = d1 + d0 - 2.0 * s;
  const double a = h * (s - d0) + dy * sum;
  const double b = h * d0 - dy * sum;
  const double c = -s * dy;
  const double disc = std::max(b * b - 4.0 * a * c, 0.0);
  const double xi = (2.0 * c) / (-b - std::sqrt(disc));
  const double t = xi * (1.0 - xi);
  const double den = s + sum * t;
  const double dnum = s * s * (d1 * xi * xi + 2.0 * s * t + d0 * (1.0 - xi) * (1.0 - xi));
  return {kn.xs[k] + xi * w, -(std::log(dnum) - 2.0 * std::log(den))};
}

/// Reverse-mode step through rq_spline_forward. Given upstream gradients of
/// the output value (`g_value`) and of the log-det term (`g_log_det`),
/// accumulates into `g_raw` and returns the gradient w.r.t. x.
inline double rq_spline_backward(double x, std::span<const double> raw, const SplineShape& shape, double g_value,
                                 double g_log_det, std::span<double> g_raw) {
  if (x < -shape.tail_bound || x > shape.tail_bound) return g_value;
  const auto kn = detail::make_knots(raw, shape);
  const int nb = kn.bins;
  const int k = detail::find_bin(kn.xs, nb, x);
  const double w = kn.w[k], h = kn.h[k], d0 = kn.d[k], d1 = kn.d[k + 1];
  const double s = h / w;
  const double xi = (x - kn.xs[k]) / w;
  const double om = 1.0 - xi;
  const double t = xi * om;
  const double sum = d1 + d0 - 2.0 * s;
  const double num = h * (s * xi * xi + d0 * t);
  const double den = s + sum * t;
  const double q = d1 * xi * xi + 2.0 * s * t + d0 * om * om;
  const double dnum = s * s * q;

  // value = ys[k] + num / den;  log_det = log(dnum) - 2 log(den)
  const double g_num = g_value / den;
  const double g_den = -g_value * num / (den * den) - 2.0 * g_log_det / den;
  const double g_dnum = g_log_det / dnum;

  double g_s = 0.0, g_t = 0.0, g_xi = 0.0, g_d0 = 0.0, g_d1 = 0.0, g_h = 0.0, g_w = 0.0;
  // dnum = s^2 q
  g_s += g_dnum * 2.0 * s * q;
  const double g_q = g_dnum * s * s;
  g_d1 += g_q * xi * xi;
  g_s += g_q * 2.0 * t;
  g_t += g_q * 2.0 * s;
  g_d0 += g_q * om * om;
  g_xi += g_q * (2.0 * d1 * xi - 2.0 * d0 * om);
  // den = s + (d1 + d0 - 2 s) t
  g_s += g_den * (1.0 - 2.0 * t);
  g_d1 += g_den * t;
  g_d0 += g_den * t;
  g_t += g_den * sum;
  // num = h (s xi^2 + d0 t)
  g_h += g_num * (s * xi * xi + d0 * t);
  g_s += g_num * h * xi * xi;
  g_xi += g_num * h * 2.0 * s * xi;
  g_d0 += g_num * h * t;
  g_t += g_num * h * d0;
  // t = xi - xi^2
  g_xi += g_t * (1.0 - 2.0 * xi);
  // s = h / w
  g_h += g_s / w;
  g_w -= g_s * h / (w * w);
  // xi = (x - xs[k]) / w
  const double g_x = g_xi / w;
  const double g_xk = -g_xi / w;
  g_w -= g_xi * xi / w;
  const double g_yk = g_value;

  // Knot offsets are cumulative sums of the bins to their left.
  std::array<double, detail::kMaxSplineBins> g_wb{}, g_hb{};
  for (int j = 0; j < k; ++j) {
    g_wb[j] += g_xk;
    g_hb[j] += g_yk;
  }
  g_wb[k] += g_w;
  g_hb[k] += g_h;

  const double scale = 2.0 * shape.tail_bound * (1.0 - shape.min_bin * nb);
  double dot_w = 0.0, dot_h = 0.0;
  for (int j = 0; j < nb; ++j) {
    dot_w += kn.pw[j] * g_wb[j] * scale;
    dot_h += kn.ph[j] * g_hb[j] * scale;
  }
  for (int j = 0; j < nb; ++j) {
    g_raw[j] += kn.pw[j] * (g_wb[j] * scale - dot_w);
    g_raw[nb + j] += kn.ph[j] * (g_hb[j] * scale - dot_h);
  }
  if (k >= 1) g_raw[2 * nb + k - 1] += g_d0 * detail::sigmoid(kn.dpre[k]);
  if (k + 1 <= nb - 1) g_raw[2 * nb + k] += g_d1 * detail::sigmoid(kn.dpre[k + 1]);
  return g_x;
}

}  // namespace lrseg
