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

#include <cstddef>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "lrseg/error.hpp"

namespace lrseg {

/// Row-major dense matrix; one feature vector per row.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

/// Row-major H x W raster.
template <class T>
struct Grid {
  int height = 0;
  int width = 0;
  std::vector<T> data;

  Grid() = default;
  Grid(int h, int w, T fill = T{}) : height(h), width(w), data(static_cast<std::size_t>(h) * w, fill) {
    if (h < 0 || w < 0) throw Error(Errc::InvalidArgument, "negative raster dimensions");
  }

  [[nodiscard]] std::size_t size() const noexcept { return data.size(); }
  [[nodiscard]] T& at(int row, int col) { return data[static_cast<std::size_t>(row) * width + col]; }
  [[nodiscard]] const T& at(int row, int col) const {
    return data[static_cast<std::size_t>(row) * width + col];
  }
  [[nodiscard]] bool same_shape(int h, int w) const noexcept { return height == h && width == w; }
  template <class U>
  [[nodiscard]] bool same_shape(const Grid<U>& other) const noexcept {
    return height == other.height && width == other.width;
  }

  friend bool operator==(const Grid&, const Grid&) = default;
};

/// Binary raster, pixel values 0 or 1.
struct BinaryMask : Grid<std::uint8_t> {
  using Grid::Grid;
  friend bool operator==(const BinaryMask&, const BinaryMask&) = default;
};

/// Per-pixel ground truth or prediction: 0 free, 1 obstacle, 255 ignore.
struct LabelMap : Grid<std::uint8_t> {
  static constexpr std::uint8_t kFree = 0;
  static constexpr std::uint8_t kObstacle = 1;
  static constexpr std::uint8_t kIgnore = 255;

  using Grid::Grid;
  friend bool operator==(const LabelMap&, const LabelMap&) = default;
};

/// Identifies one segment across the pipeline.
struct SegmentKey {
  std::uint32_t image_id = 0;
  std::uint32_t segment_id = 0;

  friend auto operator<=>(const SegmentKey&, const SegmentKey&) = default;
};

}  // namespace lrseg
