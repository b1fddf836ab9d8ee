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

#include <cstdint>
#include <numeric>
#include <vector>

#include "lrseg/error.hpp"
#include "lrseg/types.hpp"

namespace lrseg {

/// Alternating run lengths over a row-major scan. The first run counts
/// zeros (and may be empty), then ones, then zeros, and so on.
struct RleMask {
  int height = 0;
  int width = 0;
  std::vector<std::uint32_t> counts;

  [[nodiscard]] std::uint64_t total() const noexcept {
    return std::accumulate(counts.begin(), counts.end(), std::uint64_t{0});
  }

  /// Number of foreground pixels, without decoding.
  [[nodiscard]] std::uint64_t area() const noexcept {
    std::uint64_t a = 0;
    for (std::size_t i = 1; i < counts.size(); i += 2) a += counts[i];
    return a;
  }

  friend bool operator==(const RleMask&, const RleMask&) = default;
};

inline RleMask rle_encode(const BinaryMask& mask) {
  RleMask rle{mask.height, mask.width, {}};
  std::uint8_t current = 0;
  std::uint32_t run = 0;
  for (std::uint8_t px : mask.data) {
    const std::uint8_t v = px != 0 ? 1 : 0;
    if (v != current) {
      rle.counts.push_back(run);
      run = 0;
      current = v;
    }
    ++run;
  }
  rle.counts.push_back(run);
  return rle;
}

inline BinaryMask rle_decode(const RleMask& rle) {
  if (rle.height < 0 || rle.width < 0) throw Error(Errc::LengthMismatch, "negative mask dimensions");
  const std::uint64_t expected = static_cast<std::uint64_t>(rle.height) * rle.width;
  if (rle.total() != expected) {
    throw Error(Errc::LengthMismatch, "run lengths sum to " + std::to_string(rle.total()) +
                                          ", expected " + std::to_string(expected));
  }
  BinaryMask mask(rle.height, rle.width, 0);
  std::size_t pos = 0;
  std::uint8_t value = 0;
  for (std::uint32_t run : rle.counts) {
    std::fill_n(mask.data.begin() + static_cast<std::ptrdiff_t>(pos), run, value);
    pos += run;
    value ^= 1U;
  }
  return mask;
}

}  // namespace lrseg
