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
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "lrseg/error.hpp"
#include "lrseg/reference_set.hpp"
#include "lrseg/types.hpp"

namespace lrseg {

/// Exact cosine-similarity index over unit-norm reference rows.
struct KnnIndex {
  Matrix rows;
  int k = 5;

  [[nodiscard]] int dim() const noexcept { return static_cast<int>(rows.cols()); }
  [[nodiscard]] Eigen::Index size() const noexcept { return rows.rows(); }
};

/// Returned by knn_ratio when the free-space similarity is non-positive but
/// the obstacle similarity is positive.
inline constexpr double kKnnRatioSentinel = std::numeric_limits<double>::infinity();

inline KnnIndex build_index(Matrix rows, int k) {
  if (rows.rows() == 0) throw Error(Errc::EmptyReferenceSet, "cannot index an empty reference set");
  if (k < 1) throw Error(Errc::InvalidArgument, "k must be at least 1");
  if (k > rows.rows())
    throw Error(Errc::KTooLarge, "k = " + std::to_string(k) + " exceeds " + std::to_string(rows.rows()) + " reference rows");
  validate_rows(rows, true);
  return KnnIndex{std::move(rows), k};
}

inline KnnIndex build_index(const ReferenceSet& ref, int k) { return build_index(ref.features, k); }

namespace detail {

inline std::vector<double> unit_query(std::span<const double> t, Eigen::Index dim) {
  if (static_cast<Eigen::Index>(t.size()) != dim)
    throw Error(Errc::DimMismatch, "query has " + std::to_string(t.size()) + " dims, index has " + std::to_string(dim));
  double sq = 0.0;
  for (double v : t) sq += v * v;
  const double norm = std::sqrt(sq);
  if (!(norm > 0.0)) throw Error(Errc::ZeroQueryVector, "query vector has zero norm");
  if (!std::isfinite(norm)) throw Error(Errc::NonFiniteValue, "query vector is not finite");
  std::vector<double> u(t.begin(), t.end());
  for (double& v : u) v /= norm;
  return u;
}

}  // namespace detail

struct Neighbor {
  Eigen::Index index = 0;
  double similarity = 0.0;
};

/// The k rows most cosine-similar to t, best first. Equal similarities rank
/// the lower row index first.
inline std::vector<Neighbor> nearest(const KnnIndex& index, std::span<const double> t) {
  const std::vector<double> u = detail::unit_query(t, index.rows.cols());
  const Eigen::Index n = index.rows.rows();
  std::vector<double> sim(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    const double* row = index.rows.row(i).data();
    double s = 0.0;
    for (std::size_t j = 0; j < u.size(); ++j) s += row[j] * u[j];
    sim[static_cast<std::size_t>(i)] = s;
  }
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  const auto k = static_cast<std::ptrdiff_t>(index.k);
  std::partial_sort(order.begin(), order.begin() + k, order.end(), [&](Eigen::Index a, Eigen::Index b) {
    const double sa = sim[static_cast<std::size_t>(a)], sb = sim[static_cast<std::size_t>(b)];
    return sa > sb || (sa == sb && a < b);
  });
  std::vector<Neighbor> out;
  out.reserve(static_cast<std::size_t>(k));
  for (std::ptrdiff_t i = 0; i < k; ++i) {
    const Eigen::Index j = order[static_cast<std::size_t>(i)];
    out.push_back({j, sim[static_cast<std::size_t>(j)]});
  }
  return out;
}

/// Mean of the k largest cosine similarities between t and the index rows.
inline double avg_topk_similarity(const KnnIndex& index, std::span<const double> t) {
  double total = 0.0;
  for (const auto& nb : nearest(index, t)) total += nb.similarity;
  return total / static_cast<double>(index.k);
}

/// Ratio of the two averages, obstacle over free. When the free average is
/// non-positive: the sentinel if the obstacle average is positive, else 1.
inline double knn_ratio(const KnnIndex& obstacle, const KnnIndex& free, std::span<const double> t) {
  if (obstacle.dim() != free.dim()) throw Error(Errc::DimMismatch, "indexes have different dimensionality");
  const double num = avg_topk_similarity(obstacle, t);
  const double den = avg_topk_similarity(free, t);
  if (den <= 0.0) return num > 0.0 ? kKnnRatioSentinel : 1.0;
  return num / den;
}

}  // namespace lrseg
