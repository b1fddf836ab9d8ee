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

#include <gtest/gtest.h>

#include "lrseg/rle.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace lrseg;

namespace {

BinaryMask from_values(int h, int w, std::vector<std::uint8_t> v) {
  BinaryMask m(h, w);
  m.data = std::move(v);
  return m;
}

}  // namespace

TEST(Rle, AllZero) {
  const auto r = rle_encode(BinaryMask(2, 2, 0));
  EXPECT_EQ(r.counts, (std::vector<std::uint32_t>{4}));
  EXPECT_EQ(rle_decode(RleMask{2, 2, {4}}), BinaryMask(2, 2, 0));
}

TEST(Rle, AllOneStartsWithEmptyZeroRun) {
  EXPECT_EQ(rle_encode(BinaryMask(2, 2, 1)).counts, (std::vector<std::uint32_t>{0, 4}));
  EXPECT_EQ(rle_decode(RleMask{2, 2, {0, 4}}), BinaryMask(2, 2, 1));
}

TEST(Rle, HandScannedRow) {
  const auto m = from_values(1, 4, {0, 1, 1, 0});
  EXPECT_EQ(rle_encode(m).counts, (std::vector<std::uint32_t>{1, 2, 1}));
  EXPECT_EQ(rle_decode(RleMask{1, 4, {1, 2, 1}}), m);
}

TEST(Rle, LengthMismatch) {
  try {
    rle_decode(RleMask{2, 2, {1, 2}});
    FAIL() << "expected LengthMismatch";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::LengthMismatch);
  }
  EXPECT_THROW(rle_decode(RleMask{2, 2, {5}}), Error);
}

TEST(Rle, AreaWithoutDecoding) {
  EXPECT_EQ((RleMask{1, 7, {1, 2, 1, 3}}).area(), 5U);
}

TEST(RleProperty, RoundTripAndOracleOnRandomRasters) {
  Rng rng = make_rng(11);
  std::uniform_int_distribution<int> dim(1, 64);
  std::uniform_real_distribution<double> density(0.0, 1.0);
  for (int trial = 0; trial < 500; ++trial) {
    const auto m = testing_util::random_mask(rng, dim(rng), dim(rng), density(rng));
    const auto r = rle_encode(m);
    ASSERT_EQ(r.counts, oracle::rle_counts(m.data));
    ASSERT_EQ(r.total(), m.size());
    for (std::size_t i = 1; i + 1 < r.counts.size(); ++i) ASSERT_GT(r.counts[i], 0U);
    ASSERT_EQ(rle_decode(r), m);
    ASSERT_EQ(oracle::rle_expand(r.counts), m.data);
  }
}
