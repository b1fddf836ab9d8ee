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

#include <cctype>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include "lrseg/error.hpp"
#include "lrseg/types.hpp"

namespace lrseg {

namespace detail {

// Reads one whitespace-delimited PGM header token, skipping '#' comments.
inline std::string pgm_token(std::istream& in) {
  std::string tok;
  int ch = 0;
  while ((ch = in.get()) != EOF) {
    if (ch == '#') {
      while ((ch = in.get()) != EOF && ch != '\n') {
      }
      continue;
    }
    if (std::isspace(ch)) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(static_cast<char>(ch));
  }
  return tok;
}

inline int pgm_int(std::istream& in, const char* what) {
  const std::string tok = pgm_token(in);
  if (tok.empty() || tok.find_first_not_of("0123456789") != std::string::npos)
    throw Error(Errc::BadFormat, std::string("bad PGM ") + what + " '" + tok + "'");
  return std::stoi(tok);
}

}  // namespace detail

/// Reads a binary (P5) 8-bit PGM into a raw byte raster.
inline Grid<std::uint8_t> read_pgm(std::istream& in) {
  if (detail::pgm_token(in) != "P5") throw Error(Errc::BadFormat, "not a binary PGM (P5)");
  const int width = detail::pgm_int(in, "width");
  const int height = detail::pgm_int(in, "height");
  const int maxval = detail::pgm_int(in, "maxval");
  if (width < 1 || height < 1) throw Error(Errc::BadFormat, "PGM dimensions must be positive");
  if (maxval != 255) throw Error(Errc::BadFormat, "PGM maxval must be 255");
  Grid<std::uint8_t> g(height, width);
  in.read(reinterpret_cast<char*>(g.data.data()), static_cast<std::streamsize>(g.size()));
  if (static_cast<std::size_t>(in.gcount()) != g.size()) throw Error(Errc::BadFormat, "PGM pixel data truncated");
  return g;
}

inline void write_pgm(std::ostream& out, const Grid<std::uint8_t>& g) {
  out << "P5\n" << g.width << ' ' << g.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(g.data.data()), static_cast<std::streamsize>(g.size()));
  if (!out) throw Error(Errc::IoError, "failed writing PGM");
}

inline LabelMap read_label_map(std::istream& in) {
  auto g = read_pgm(in);
  for (std::uint8_t v : g.data) {
    if (v != LabelMap::kFree && v != LabelMap::kObstacle && v != LabelMap::kIgnore)
      throw Error(Errc::IllegalLabelValue, "label value " + std::to_string(v) + " not in {0,1,255}");
  }
  LabelMap m;
  static_cast<Grid<std::uint8_t>&>(m) = std::move(g);
  return m;
}

inline LabelMap read_label_map(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot open " + path.string());
  return read_label_map(in);
}

inline void write_label_map(const std::filesystem::path& path, const Grid<std::uint8_t>& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::IoError, "cannot open " + path.string() + " for writing");
  write_pgm(out, m);
}

/// Any nonzero PGM value marks the pixel as inside the mask.
inline BinaryMask read_binary_mask(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot open " + path.string());
  auto g = read_pgm(in);
  BinaryMask m(g.height, g.width, 0);
  for (std::size_t i = 0; i < g.size(); ++i) m.data[i] = g.data[i] != 0 ? 1 : 0;
  return m;
}

}  // namespace lrseg
