// Copyright 2026 The SCPN Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace scpn {

enum class ErrorCode {
  kUnbalancedBrackets,
  kEmptyLabel,
  kTrailingGarbage,
  kEmptyHistogram,
  kEmptyCorpus,
  kDanglingContinuation,
  kBadColumnCount,
  kParseError,
  kInvalidData,
  kIo,
  kShapeMismatch,
  kEmptyKeys,
  kNonFiniteLoss,
  kEmptyInput,
  kTooLong,
  kDivergedLoss,
  kMissingParse,
  kNoWellFormedHypothesis,
  kEmptySentence,
  kZeroVector,
  kDegenerateLabels,
  kBadCheckpoint,
  kUnknownCommand,
  kMissingFlag,
  kInvalidConfig,
};

inline std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kUnbalancedBrackets: return "UnbalancedBrackets";
    case ErrorCode::kEmptyLabel: return "EmptyLabel";
    case ErrorCode::kTrailingGarbage: return "TrailingGarbage";
    case ErrorCode::kEmptyHistogram: return "EmptyHistogram";
    case ErrorCode::kEmptyCorpus: return "EmptyCorpus";
    case ErrorCode::kDanglingContinuation: return "DanglingContinuation";
    case ErrorCode::kBadColumnCount: return "BadColumnCount";
    case ErrorCode::kParseError: return "ParseError";
    case ErrorCode::kInvalidData: return "InvalidData";
    case ErrorCode::kIo: return "Io";
    case ErrorCode::kShapeMismatch: return "ShapeMismatch";
    case ErrorCode::kEmptyKeys: return "EmptyKeys";
    case ErrorCode::kNonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::kEmptyInput: return "EmptyInput";
    case ErrorCode::kTooLong: return "TooLong";
    case ErrorCode::kDivergedLoss: return "DivergedLoss";
    case ErrorCode::kMissingParse: return "MissingParse";
    case ErrorCode::kNoWellFormedHypothesis: return "NoWellFormedHypothesis";
    case ErrorCode::kEmptySentence: return "EmptySentence";
    case ErrorCode::kZeroVector: return "ZeroVector";
    case ErrorCode::kDegenerateLabels: return "DegenerateLabels";
    case ErrorCode::kBadCheckpoint: return "BadCheckpoint";
    case ErrorCode::kUnknownCommand: return "UnknownCommand";
    case ErrorCode::kMissingFlag: return "MissingFlag";
    case ErrorCode::kInvalidConfig: return "InvalidConfig";
  }
  return "Unknown";
}

// Single exception type for the library. `offset` is a 1-based byte
// position into the offending text, `line` a 1-based line number.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what,
        std::optional<std::size_t> offset = std::nullopt,
        std::optional<std::size_t> line = std::nullopt)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + what),
        code_(code),
        offset_(offset),
        line_(line) {}

  ErrorCode code() const { return code_; }
  std::optional<std::size_t> offset() const { return offset_; }
  std::optional<std::size_t> line() const { return line_; }

 private:
  ErrorCode code_;
  std::optional<std::size_t> offset_;
  std::optional<std::size_t> line_;
};

}  // namespace scpn
