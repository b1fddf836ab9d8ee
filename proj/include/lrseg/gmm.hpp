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
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "lrseg/error.hpp"
#include "lrseg/random.hpp"
#include "lrseg/types.hpp"

namespace lrseg {

/// Diagonal-covariance Gaussian mixture. Row k of `means`/`variances` is component k.
struct GmmModel {
  Vector weights;
  Matrix means;
  Matrix variances;

  [[nodiscard]] int components() const noexcept { return static_cast<int>(weights.size()); }
  [[nodiscard]] int dim() const noexcept { return static_cast<int>(means.cols()); }
};

struct KMeansResult {
  Matrix centroids;
  std::vector<int> assignment;
  int iterations = 0;
};

struct EmOptions {
  int max_iter = 200;
  double rel_tol = 1e-6;
  double variance_floor = 1e-6;
};

struct EmResult {
  GmmModel model;
  /// Mean training log-likelihood of every parameter set visited, in order.
  std::vector<double> log_likelihood;
  int iterations = 0;
  bool converged = false;
};

namespace detail {

inline double log_sum_exp(std::span<const double> v) {
  double m = -std::numeric_limits<double>::infinity();
  for (double x : v) m = std::max(m, x);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

inline double squared_distance(const Matrix& a, Eigen::Index i, const Matrix& b, Eigen::Index k) {
  return (a.row(i) - b.row(k)).squaredNorm();
}

// Per-component log N(x | mu_k, diag var_k) + log pi_k for every row of x, shape N x K.
inline Matrix weighted_log_likelihoods(const GmmModel& g, const Matrix& x) {
  const Eigen::Index n = x.rows();
  const Eigen::Index k_count = g.weights.size();
  Matrix out(n, k_count);
  const double log2pi = std::log(2.0 * std::numbers::pi);
  for (Eigen::Index k = 0; k < k_count; ++k) {
    const Eigen::ArrayXd var = g.variances.row(k).transpose().array();
    const double constant = std::log(g.weights[k]) - 0.5 * (var.log().sum() + log2pi * static_cast<double>(x.cols()));
    const Eigen::RowVectorXd mu = g.means.row(k);
    const Eigen::RowVectorXd inv = var.inverse().matrix().transpose();
    for (Eigen::Index i = 0; i < n; ++i) {
      const double maha = ((x.row(i) - mu).array().square() * inv.array()).sum();
      out(i, k) = constant - 0.5 * maha;
    }
  }
  return out;
}

}  // namespace detail

/// k-means++ seeding followed by Lloyd iterations, until the assignment
/// stops changing or `max_iter` passes. Empty clusters take the point
/// farthest from its centroid.
inline KMeansResult kmeans_init(const Matrix& data, int k_count, std::uint64_t seed, int max_iter = 100) {
  const Eigen::Index n = data.rows();
  if (k_count < 1) throw Error(Errc::InvalidArgument, "K must be at least 1");
  if (n < k_count)
    throw Error(Errc::TooFewPoints, std::to_string(n) + " points for " + std::to_string(k_count) + " clusters");

  Rng rng = make_rng(seed, 0x6b6d);
  KMeansResult res;
  res.centroids.resize(k_count, data.cols());
  std::vector<bool> chosen(static_cast<std::size_t>(n), false);
  std::vector<double> d2(static_cast<std::size_t>(n), std::numeric_limits<double>::infinity());

  auto pick = [&](int k, Eigen::Index idx) {
    res.centroids.row(k) = data.row(idx);
    chosen[static_cast<std::size_t>(idx)] = true;
    for (Eigen::Index i = 0; i < n; ++i)
      d2[static_cast<std::size_t>(i)] = std::min(d2[static_cast<std::size_t>(i)], detail::squared_distance(data, i, res.centroids, k));
  };
  pick(0, std::uniform_int_distribution<Eigen::Index>(0, n - 1)(rng));
  for (int k = 1; k < k_count; ++k) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
      if (!chosen[static_cast<std::size_t>(i)]) total += d2[static_cast<std::size_t>(i)];
    Eigen::Index idx = -1;
    if (total > 0.0) {
      double u = std::uniform_real_distribution<double>(0.0, total)(rng);
      for (Eigen::Index i = 0; i < n; ++i) {
        if (chosen[static_cast<std::size_t>(i)]) continue;
        idx = i;
        u -= d2[static_cast<std::size_t>(i)];
        if (u < 0.0 && d2[static_cast<std::size_t>(i)] > 0.0) break;
      }
    } else {
      // all remaining points coincide with a centroid
      for (Eigen::Index i = 0; i < n && idx < 0; ++i)
        if (!chosen[static_cast<std::size_t>(i)]) idx = i;
    }
    pick(k, idx);
  }

  res.assignment.assign(static_cast<std::size_t>(n), -1);
  std::vector<double> dist(static_cast<std::size_t>(n), 0.0);
  for (int iter = 0; iter < max_iter; ++iter) {
    bool changed = false;
    for (Eigen::Index i = 0; i < n; ++i) {
      int best = 0;
      double best_d = detail::squared_distance(data, i, res.centroids, 0);
      for (int k = 1; k < k_count; ++k) {
        const double d = detail::squared_distance(data, i, res.centroids, k);
        if (d < best_d) {
          best_d = d;
          best = k;
        }
      }
      dist[static_cast<std::size_t>(i)] = best_d;
      if (res.assignment[static_cast<std::size_t>(i)] != best) {
        res.assignment[static_cast<std::size_t>(i)] = best;
        changed = true;
      }
    }
    res.iterations = iter + 1;

    std::vector<Eigen::Index> counts(static_cast<std::size_t>(k_count), 0);
    for (int a : res.assignment) ++counts[static_cast<std::size_t>(a)];
    for (int k = 0; k < k_count; ++k) {
      if (counts[static_cast<std::size_t>(k)] > 0) continue;
      const auto far = static_cast<Eigen::Index>(std::distance(dist.begin(), std::max_element(dist.begin(), dist.end())));
      --counts[static_cast<std::size_t>(res.assignment[static_cast<std::size_t>(far)])];
      res.assignment[static_cast<std::size_t>(far)] = k;
      ++counts[static_cast<std::size_t>(k)];
      dist[static_cast<std::size_t>(far)] = 0.0;
      changed = true;
    }

    Matrix sums = Matrix::Zero(k_count, data.cols());
    for (Eigen::Index i = 0; i < n; ++i) sums.row(res.assignment[static_cast<std::size_t>(i)]) += data.row(i);
    for (int k = 0; k < k_count; ++k)
      res.centroids.row(k) = sums.row(k) / static_cast<double>(counts[static_cast<std::size_t>(k)]);
    if (!changed) break;
  }
  return res;
}

/// Log-density of x under the mixture, via log-sum-exp over components.
inline double gmm_log_density(const GmmModel& g, std::span<const double> x) {
  if (static_cast<Eigen::Index>(x.size()) != g.means.cols())
    throw Error(Errc::DimMismatch, "query has " + std::to_string(x.size()) + " dims, model has " + std::to_string(g.dim()));
  const Matrix row = Eigen::Map<const Eigen::RowVectorXd>(x.data(), static_cast<Eigen::Index>(x.size()));
  const Matrix ll = detail::weighted_log_likelihoods(g, row);
  return detail::log_sum_exp(std::span<const double>(ll.data(), static_cast<std::size_t>(ll.cols())));
}

/// Log-densities of every row of `x`.
inline Vector gmm_log_density(const GmmModel& g, const Matrix& x) {
  if (x.cols() != g.means.cols()) throw Error(Errc::DimMismatch, "query dimensionality does not match model");
  const Matrix ll = detail::weighted_log_likelihoods(g, x);
  Vector out(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    out[i] = detail::log_sum_exp(std::span<const double>(ll.row(i).data(), static_cast<std::size_t>(ll.cols())));
  return out;
}

/// Maximum-likelihood fit by EM, initialized from k-means. Responsibilities
/// are normalized in log space. Variances are floored, never rejected.
inline EmResult em_fit(const Matrix& data, int k_count, std::uint64_t seed, const EmOptions& opt = {}) {
  const Eigen::Index n = data.rows();
  const Eigen::Index c = data.cols();
  if (n < k_count || n == 0)
    throw Error(Errc::TooFewPoints, std::to_string(n) + " points for " + std::to_string(k_count) + " components");
  const KMeansResult km = kmeans_init(data, k_count, seed);

  const Eigen::RowVectorXd global_mean = data.colwise().mean();
  const Eigen::RowVectorXd global_var =
      ((data.rowwise() - global_mean).array().square().colwise().sum() / static_cast<double>(n))
          .max(opt.variance_floor)
          .matrix();

  EmResult res;
  GmmModel& g = res.model;
  g.weights = Vector::Zero(k_count);
  g.means = km.centroids;
  g.variances = Matrix::Zero(k_count, c);
  for (Eigen::Index i = 0; i < n; ++i) {
    const int k = km.assignment[static_cast<std::size_t>(i)];
    g.weights[k] += 1.0;
    g.variances.row(k) += (data.row(i) - g.means.row(k)).array().square().matrix();
  }
  for (int k = 0; k < k_count; ++k) {
    if (g.weights[k] >= 2.0)
      g.variances.row(k) = (g.variances.row(k) / g.weights[k]).array().max(opt.variance_floor).matrix();
    else
      g.variances.row(k) = global_var;
  }
  g.weights /= static_cast<double>(n);

  Matrix resp(n, k_count);
  double previous = -std::numeric_limits<double>::infinity();
  for (int iter = 0;; ++iter) {
    // E-step
    resp = detail::weighted_log_likelihoods(g, data);
    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double lse = detail::log_sum_exp(std::span<const double>(resp.row(i).data(), static_cast<std::size_t>(k_count)));
      total += lse;
      resp.row(i) = (resp.row(i).array() - lse).exp().matrix();
    }
    const double mean_ll = total / static_cast<double>(n);
    if (!std::isfinite(mean_ll)) throw Error(Errc::NumericFailure, "EM log-likelihood is not finite");
    res.log_likelihood.push_back(mean_ll);
    if (iter > 0 && mean_ll - previous <= opt.rel_tol * std::abs(previous)) {
      res.converged = true;
      break;
    }
    if (iter >= opt.max_iter) break;
    previous = mean_ll;

    // M-step
    for (int k = 0; k < k_count; ++k) {
      const double nk = resp.col(k).sum();
      if (!(nk > 0.0)) {
        g.weights[k] = 0.0;
        continue;
      }
      g.weights[k] = nk / static_cast<double>(n);
      const Eigen::RowVectorXd mu = (resp.col(k).transpose() * data) / nk;
      Eigen::RowVectorXd var = Eigen::RowVectorXd::Zero(c);
      for (Eigen::Index i = 0; i < n; ++i) var += resp(i, k) * (data.row(i) - mu).array().square().matrix();
      g.means.row(k) = mu;
      g.variances.row(k) = (var / nk).array().max(opt.variance_floor).matrix();
    }
    g.weights /= g.weights.sum();
    res.iterations = iter + 1;
  }
  return res;
}

}  // namespace lrseg
