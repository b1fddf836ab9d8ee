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

#include <sstream>

#include <gtest/gtest.h>

#include "lrseg/container.hpp"
#include "lrseg/reference_set.hpp"
#include "test_util.hpp"

using namespace lrseg;

namespace {

std::string to_bytes(const FeatureContainer& c) {
  std::ostringstream out(std::ios::binary);
  write_feature_container(out, c);
  return out.str();
}

FeatureContainer from_bytes(const std::string& b) {
  std::istringstream in(b, std::ios::binary);
  return read_feature_container(in);
}

Errc read_error(const std::string& b) {
  try {
    from_bytes(b);
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "read succeeded";
  return Errc::IoError;
}

void expect_same(const FeatureContainer& a, const FeatureContainer& b) {
  ASSERT_EQ(a.header.dim, b.header.dim);
  ASSERT_EQ(a.header.height, b.header.height);
  ASSERT_EQ(a.header.width, b.header.width);
  ASSERT_EQ(a.records.size(), b.records.size());
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    const auto& x = a.records[i];
    const auto& y = b.records[i];
    EXPECT_EQ(x.image_id, y.image_id);
    EXPECT_EQ(x.segment_id, y.segment_id);
    ASSERT_EQ(x.feature.size(), y.feature.size());
    for (std::size_t j = 0; j < x.feature.size(); ++j)
      EXPECT_EQ(std::bit_cast<std::uint32_t>(x.feature[j]), std::bit_cast<std::uint32_t>(y.feature[j]));
    EXPECT_EQ(x.mask, y.mask);
    EXPECT_EQ(x.predicted_iou, y.predicted_iou);
    EXPECT_EQ(x.stability_score, y.stability_score);
    EXPECT_EQ(x.prompt_xy, y.prompt_xy);
  }
}

SegmentRecord simple_record(std::uint32_t id, std::vector<float> f) {
  SegmentRecord r;
  r.segment_id = id;
  r.feature = std::move(f);
  r.mask = RleMask{2, 2, {1, 2, 1}};
  r.predicted_iou = 0.9;
  r.stability_score = 0.95;
  r.prompt_xy = {1, 0};
  return r;
}

}  // namespace

TEST(Container, EmptyIsMagicPlusHeader) {
  const FeatureContainer c{{4, 2, 2}, {}};
  const std::string b = to_bytes(c);
  ASSERT_EQ(b.size(), 8U + 16U + 1U);
  EXPECT_EQ(b.substr(0, 8), "LRSF0001");
  const auto back = from_bytes(b);
  EXPECT_TRUE(back.records.empty());
  EXPECT_EQ(back.header.dim, 4U);
  EXPECT_EQ(back.header.height, 2U);
}

TEST(Container, OneRecordLayout) {
  const FeatureContainer c{{4, 2, 2}, {simple_record(0, {1.0F, -2.0F, 0.5F, 3.25F})}};
  const std::string b = to_bytes(c);
  // header, then exactly 16 feature bytes, then the separator
  EXPECT_EQ(b[24 + 16], '\n');
  EXPECT_EQ(detail::get_u32(reinterpret_cast<const unsigned char*>(b.data()) + 8), 1U);
  EXPECT_EQ(detail::get_f32(reinterpret_cast<const unsigned char*>(b.data()) + 24 + 4), -2.0F);
  const auto meta = nlohmann::json::parse(b.substr(24 + 17, b.size() - 24 - 17 - 1));
  for (const char* key : {"image_id", "segment_id", "counts", "predicted_iou", "stability_score", "prompt_xy"})
    EXPECT_TRUE(meta.contains(key)) << key;
  EXPECT_EQ(b.back(), '\n');
}

TEST(Container, ThreeRecordsRoundTrip) {
  const FeatureContainer c{{2, 2, 2}, {simple_record(0, {1, 2}), simple_record(1, {3, 4}), simple_record(2, {5, 6})}};
  expect_same(from_bytes(to_bytes(c)), c);
}

TEST(Container, HundredRandomRecordsRoundTrip) {
  Rng rng = make_rng(3);
  const auto c = testing_util::random_container(rng, 100, 7, 5, 9);
  const auto back = from_bytes(to_bytes(c));
  expect_same(back, c);
  EXPECT_EQ(to_bytes(back), to_bytes(c));
}

TEST(Container, FileRoundTrip) {
  testing_util::TempDir dir;
  Rng rng = make_rng(4);
  const auto c = testing_util::random_container(rng, 10, 3, 4, 4);
  write_feature_container(dir / "x.lrsf", c);
  expect_same(read_feature_container(dir / "x.lrsf"), c);
}

TEST(Container, BlobOneFloatShortIsTruncated) {
  const FeatureContainer c{{4, 2, 2}, {simple_record(0, {1, 2, 3, 4}), simple_record(1, {5, 6, 7, 8})}};
  std::string b = to_bytes(c);
  b.erase(24 + 28, 4);  // drop the last float
  EXPECT_EQ(read_error(b), Errc::TruncatedFile);
}

TEST(Container, CutShortIsTruncated) {
  const FeatureContainer c{{4, 2, 2}, {simple_record(0, {1, 2, 3, 4})}};
  const std::string b = to_bytes(c);
  EXPECT_EQ(read_error(b.substr(0, 20)), Errc::TruncatedFile);
  EXPECT_EQ(read_error(b.substr(0, 30)), Errc::TruncatedFile);
  EXPECT_EQ(read_error(b.substr(0, b.size() - 1)), Errc::TruncatedFile);
}

TEST(Container, BadMagic) {
  std::string b = to_bytes(FeatureContainer{{4, 2, 2}, {}});
  b[3] = 'X';
  EXPECT_EQ(read_error(b), Errc::BadMagic);
  EXPECT_EQ(read_error("LRS"), Errc::BadMagic);
}

TEST(Container, MalformedMetadata) {
  const FeatureContainer c{{2, 2, 2}, {simple_record(0, {1, 2})}};
  const std::string good = to_bytes(c);
  const std::size_t meta = 24 + 8 + 1;
  std::string b = good;
  b.replace(meta, 1, "[");
  EXPECT_EQ(read_error(b), Errc::MalformedMetadata);
  // counts that do not cover the image
  auto bad = c;
  bad.records[0].mask = RleMask{2, 2, {1, 2, 1}};
  std::string text = to_bytes(bad);
  const auto pos = text.find("[1,2,1]");
  ASSERT_NE(pos, std::string::npos);
  text.replace(pos, 7, "[1,2,2]");
  EXPECT_EQ(read_error(text), Errc::MalformedMetadata);
  // trailing garbage
  EXPECT_EQ(read_error(good + "x"), Errc::MalformedMetadata);
}

TEST(Container, DuplicateKeysRejected) {
  const FeatureContainer c{{2, 2, 2}, {simple_record(5, {1, 2}), simple_record(5, {3, 4})}};
  EXPECT_EQ(read_error(to_bytes(c)), Errc::MalformedMetadata);
}

TEST(Container, NonFiniteFeatureRejected) {
  const FeatureContainer c{{2, 2, 2}, {simple_record(0, {1, std::numeric_limits<float>::quiet_NaN()})}};
  EXPECT_EQ(read_error(to_bytes(c)), Errc::NonFiniteValue);
}

TEST(Container, WriterChecksDimensions) {
  FeatureContainer c{{3, 2, 2}, {simple_record(0, {1, 2})}};
  EXPECT_THROW(to_bytes(c), Error);
  c.header.dim = 2;
  c.records[0].mask = RleMask{3, 2, {6}};
  try {
    to_bytes(c);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::DimMismatch);
  }
}

TEST(Container, ZeroDimRejected) { EXPECT_EQ(read_error(to_bytes(FeatureContainer{{0, 2, 2}, {}})), Errc::DimMismatch); }

TEST(ReferenceSet, RowsNormalizedAtIngest) {
  Rng rng = make_rng(5);
  const Matrix m = testing_util::random_matrix(rng, 50, 6, 10.0);
  const auto r = make_reference_set(m, ReferenceKind::free, true);
  for (Eigen::Index i = 0; i < r.size(); ++i) EXPECT_NEAR(r.features.row(i).norm(), 1.0, 1e-6);
  const auto raw = make_reference_set(m, ReferenceKind::free, false);
  EXPECT_EQ(raw.features, m);
}

TEST(ReferenceSet, Rejections) {
  Matrix zero_row = Matrix::Ones(3, 2);
  zero_row.row(1).setZero();
  EXPECT_THROW(make_reference_set(zero_row, ReferenceKind::free, true), Error);
  Matrix nan = Matrix::Ones(2, 2);
  nan(0, 0) = std::nan("");
  try {
    make_reference_set(nan, ReferenceKind::obstacle, false);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::NonFiniteValue);
  }
  try {
    make_reference_set(Matrix(0, 3), ReferenceKind::free, true);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::EmptyReferenceSet);
  }
}
