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

#include <stdexcept>
#include <string>
#include <string_view>

namespace lrseg {

enum class Errc {
  BadMagic,
  DimMismatch,
  TruncatedFile,
  MalformedMetadata,
  LengthMismatch,
  BadFormat,
  IllegalLabelValue,
  NonFiniteValue,
  ZeroNormRow,
  TooFewPoints,
  EmptyBatch,
  EmptyData,
  KTooLarge,
  EmptyReferenceSet,
  ZeroQueryVector,
  KindMismatch,
  MissingDecision,
  ShapeMismatch,
  MissingGroundTruth,
  UnknownScenario,
  IoError,
  InvalidArgument,
  NumericFailure,
};

constexpr std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::BadMagic: return "BadMagic";
    case Errc::DimMismatch: return "DimMismatch";
    case Errc::TruncatedFile: return "TruncatedFile";
    case Errc::MalformedMetadata: return "MalformedMetadata";
    case Errc::LengthMismatch: return "LengthMismatch";
    case Errc::BadFormat: return "BadFormat";
    case Errc::IllegalLabelValue: return "IllegalLabelValue";
    case Errc::NonFiniteValue: return "NonFiniteValue";
    case Errc::ZeroNormRow: return "ZeroNormRow";
    case Errc::TooFewPoints: return "TooFewPoints";
    case Errc::EmptyBatch: return "EmptyBatch";
    case Errc::EmptyData: return "EmptyData";
    case Errc::KTooLarge: return "KTooLarge";
    case Errc::EmptyReferenceSet: return "EmptyReferenceSet";
    case Errc::ZeroQueryVector: return "ZeroQueryVector";
    case Errc::KindMismatch: return "KindMismatch";
    case Errc::MissingDecision: return "MissingDecision";
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::MissingGroundTruth: return "MissingGroundTruth";
    case Errc::UnknownScenario: return "UnknownScenario";
    case Errc::IoError: return "IoError";
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::NumericFailure: return "NumericFailure";
  }
  return "Unknown";
}

/// Exception type for every recoverable failure in the library. The code is
/// what callers branch on; the message is for humans.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& detail)
      : std::runtime_error(std::string(to_string(code)) + ": " + detail), code_(code) {}

  [[nodiscard]] Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace lrseg
