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

#include <cmath>
#include <string>
#include <string_view>

#include "lrseg/container.hpp"
#include "lrseg/error.hpp"
#include "lrseg/types.hpp"

namespace lrseg {

enum class ReferenceKind { free, obstacle };

constexpr std::string_view to_string(ReferenceKind k) noexcept {
  return k == ReferenceKind::free ? "free" : "obstacle";
}

/// Feature vectors one distribution is fitted against.
struct ReferenceSet {
  ReferenceKind kind = ReferenceKind::free;
  Matrix features;
  bool normalized = false;

  [[nodiscard]] Eigen::Index size() const noexcept { return features.rows(); }
  [[nodiscard]] Eigen::Index dim() const noexcept { return features.cols(); }
};

/// Rejects non-finite entries and zero-norm rows; optionally scales rows to unit L2 norm.
inline void validate_rows(Matrix& rows, bool normalize) {
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    auto row = rows.row(i);
    if (!row.allFinite()) throw Error(Errc::NonFiniteValue, "row " + std::to_string(i) + " is not finite");
    const double norm = row.norm();
    if (!(norm > 0.0)) throw Error(Errc::ZeroNormRow, "row " + std::to_string(i) + " has zero norm");
    if (normalize) row /= norm;
  }
}

inline ReferenceSet make_reference_set(Matrix features, ReferenceKind kind, bool normalize) {
  if (features.rows() == 0) throw Error(Errc::EmptyReferenceSet, "reference set has no rows");
  if (features.cols() == 0) throw Error(Errc::DimMismatch, "reference features have zero length");
  validate_rows(features, normalize);
  return ReferenceSet{kind, std::move(features), normalize};
}

inline ReferenceSet make_reference_set(const FeatureContainer& c, ReferenceKind kind, bool normalize) {
  return make_reference_set(feature_matrix(c.records, c.header.dim), kind, normalize);
}

}  // namespace lrseg
