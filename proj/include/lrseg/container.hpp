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

// LRSF0001 feature container:
//   "LRSF0001" | u32 record_count | u32 C | u32 H | u32 W          (little endian)
//   record_count x C x f32 features                                 (little endian, row-major)
//   "\n"
//   record_count lines of JSON metadata, one object per record, same order.

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <iterator>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lrseg/error.hpp"
#include "lrseg/rle.hpp"
#include "lrseg/types.hpp"

namespace lrseg {

inline constexpr std::array<char, 8> kContainerMagic{'L', 'R', 'S', 'F', '0', '0', '0', '1'};

struct ContainerHeader {
  std::uint32_t dim = 0;
  std::uint32_t height = 0;
  std::uint32_t width = 0;

  friend bool operator==(const ContainerHeader&, const ContainerHeader&) = default;
};

struct SegmentRecord {
  std::uint32_t image_id = 0;
  std::uint32_t segment_id = 0;
  std::vector<float> feature;
  RleMask mask;
  double predicted_iou = 0.0;
  double stability_score = 0.0;
  std::array<std::int32_t, 2> prompt_xy{0, 0};

  [[nodiscard]] SegmentKey key() const noexcept { return {image_id, segment_id}; }

  friend bool operator==(const SegmentRecord&, const SegmentRecord&) = default;
};

struct FeatureContainer {
  ContainerHeader header;
  std::vector<SegmentRecord> records;

  friend bool operator==(const FeatureContainer&, const FeatureContainer&) = default;
};

namespace detail {

inline void put_u32(std::ostream& out, std::uint32_t v) {
  const std::array<char, 4> b{static_cast<char>(v & 0xffU), static_cast<char>((v >> 8) & 0xffU),
                              static_cast<char>((v >> 16) & 0xffU), static_cast<char>((v >> 24) & 0xffU)};
  out.write(b.data(), 4);
}

inline std::uint32_t get_u32(const unsigned char* p) noexcept {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

inline void put_f32(std::ostream& out, float f) { put_u32(out, std::bit_cast<std::uint32_t>(f)); }

inline float get_f32(const unsigned char* p) noexcept { return std::bit_cast<float>(get_u32(p)); }

inline std::string slurp(std::istream& in) {
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline nlohmann::json record_metadata(const SegmentRecord& r) {
  return nlohmann::json{{"image_id", r.image_id},
                        {"segment_id", r.segment_id},
                        {"counts", r.mask.counts},
                        {"predicted_iou", r.predicted_iou},
                        {"stability_score", r.stability_score},
                        {"prompt_xy", r.prompt_xy}};
}

}  // namespace detail

inline void write_feature_container(std::ostream& out, const FeatureContainer& c) {
  const auto& h = c.header;
  for (const auto& r : c.records) {
    if (r.feature.size() != h.dim) {
      throw Error(Errc::DimMismatch, "record feature has " + std::to_string(r.feature.size()) +
                                         " values, header declares " + std::to_string(h.dim));
    }
    if (r.mask.height != static_cast<int>(h.height) || r.mask.width != static_cast<int>(h.width) ||
        r.mask.total() != static_cast<std::uint64_t>(h.height) * h.width) {
      throw Error(Errc::DimMismatch, "record mask does not match header image dimensions");
    }
  }
  out.write(kContainerMagic.data(), kContainerMagic.size());
  detail::put_u32(out, static_cast<std::uint32_t>(c.records.size()));
  detail::put_u32(out, h.dim);
  detail::put_u32(out, h.height);
  detail::put_u32(out, h.width);
  for (const auto& r : c.records)
    for (float f : r.feature) detail::put_f32(out, f);
  out.put('\n');
  for (const auto& r : c.records) out << detail::record_metadata(r).dump() << '\n';
  if (!out) throw Error(Errc::IoError, "failed writing feature container");
}

inline void write_feature_container(const std::filesystem::path& path, const FeatureContainer& c) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::IoError, "cannot open " + path.string() + " for writing");
  write_feature_container(out, c);
}

inline FeatureContainer read_feature_container(std::istream& in) {
  const std::string bytes = detail::slurp(in);
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  constexpr std::size_t kHeaderBytes = 8 + 4 * 4;
  if (bytes.size() < 8 || !std::equal(kContainerMagic.begin(), kContainerMagic.end(), bytes.begin()))
    throw Error(Errc::BadMagic, "missing LRSF0001 magic");
  if (bytes.size() < kHeaderBytes) throw Error(Errc::TruncatedFile, "header shorter than 24 bytes");

  FeatureContainer c;
  const std::uint32_t count = detail::get_u32(p + 8);
  c.header.dim = detail::get_u32(p + 12);
  c.header.height = detail::get_u32(p + 16);
  c.header.width = detail::get_u32(p + 20);
  if (c.header.dim == 0) throw Error(Errc::DimMismatch, "feature dimensionality is zero");

  const std::uint64_t blob = static_cast<std::uint64_t>(count) * c.header.dim * 4;
  if (bytes.size() - kHeaderBytes < blob) throw Error(Errc::TruncatedFile, "feature blob is short");
  std::size_t pos = kHeaderBytes + blob;
  if (pos >= bytes.size()) throw Error(Errc::TruncatedFile, "missing metadata separator");
  if (bytes[pos] != '\n') {
    // A blob short by whole floats leaves the separator (followed by the first
    // metadata object) on an earlier 4-byte boundary.
    for (std::uint64_t back = 4; back <= blob; back += 4) {
      const std::size_t q = pos - back;
      if (bytes[q] == '\n' && q + 1 < bytes.size() && bytes[q + 1] == '{')
        throw Error(Errc::TruncatedFile, "feature blob is " + std::to_string(back / 4) + " float(s) short");
    }
    throw Error(Errc::MalformedMetadata, "expected newline after feature blob");
  }
  ++pos;

  const std::uint64_t pixels = static_cast<std::uint64_t>(c.header.height) * c.header.width;
  std::set<SegmentKey> seen;
  c.records.resize(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    auto& r = c.records[i];
    r.feature.resize(c.header.dim);
    const unsigned char* row = p + kHeaderBytes + static_cast<std::uint64_t>(i) * c.header.dim * 4;
    for (std::uint32_t j = 0; j < c.header.dim; ++j) {
      r.feature[j] = detail::get_f32(row + 4 * j);
      if (!std::isfinite(r.feature[j]))
        throw Error(Errc::NonFiniteValue, "record " + std::to_string(i) + " has a non-finite feature");
    }

    const std::size_t eol = bytes.find('\n', pos);
    if (eol == std::string::npos) throw Error(Errc::TruncatedFile, "metadata line " + std::to_string(i) + " missing");
    try {
      const auto meta = nlohmann::json::parse(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
                                              bytes.begin() + static_cast<std::ptrdiff_t>(eol));
      r.image_id = meta.at("image_id").get<std::uint32_t>();
      r.segment_id = meta.at("segment_id").get<std::uint32_t>();
      r.mask.height = static_cast<int>(c.header.height);
      r.mask.width = static_cast<int>(c.header.width);
      r.mask.counts = meta.at("counts").get<std::vector<std::uint32_t>>();
      r.predicted_iou = meta.at("predicted_iou").get<double>();
      r.stability_score = meta.at("stability_score").get<double>();
      r.prompt_xy = meta.at("prompt_xy").get<std::array<std::int32_t, 2>>();
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::MalformedMetadata, "metadata line " + std::to_string(i) + ": " + e.what());
    }
    if (r.mask.total() != pixels)
      throw Error(Errc::MalformedMetadata, "mask of record " + std::to_string(i) + " does not cover the image");
    if (!(r.predicted_iou >= 0.0 && r.predicted_iou <= 1.0) || !(r.stability_score >= 0.0 && r.stability_score <= 1.0))
      throw Error(Errc::MalformedMetadata, "quality score of record " + std::to_string(i) + " outside [0,1]");
    if (!seen.insert(r.key()).second)
      throw Error(Errc::MalformedMetadata, "duplicate (image_id, segment_id) at record " + std::to_string(i));
    pos = eol + 1;
  }
  if (pos != bytes.size()) throw Error(Errc::MalformedMetadata, "trailing bytes after metadata");
  return c;
}

inline FeatureContainer read_feature_container(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot open " + path.string());
  return read_feature_container(in);
}

/// Stacks record features into an N x C matrix.
inline Matrix feature_matrix(std::span<const SegmentRecord> records, std::size_t dim) {
  Matrix m(static_cast<Eigen::Index>(records.size()), static_cast<Eigen::Index>(dim));
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (records[i].feature.size() != dim) throw Error(Errc::DimMismatch, "inconsistent feature dimensionality");
    for (std::size_t j = 0; j < dim; ++j) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = records[i].feature[j];
  }
  return m;
}

}  // namespace lrseg
