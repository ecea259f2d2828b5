// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace moelab {

enum class ErrorCode {
  BadMagic,
  UnsupportedVersion,
  Truncated,
  TrailingBytes,
  InvariantViolation,
  ParseError,
  InvalidSegmentLength,
  ExpertOutOfRange,
  EmptyGroup,
  UndefinedSrp,
  EmptyTrace,
  UndefinedCV,
  MissingTokenStream,
  UndefinedScore,
  DegenerateInput,
  BudgetExceeded,
  InvalidConfig,
  Io,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::UnsupportedVersion: return "UnsupportedVersion";
    case ErrorCode::Truncated: return "Truncated";
    case ErrorCode::TrailingBytes: return "TrailingBytes";
    case ErrorCode::InvariantViolation: return "InvariantViolation";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::InvalidSegmentLength: return "InvalidSegmentLength";
    case ErrorCode::ExpertOutOfRange: return "ExpertOutOfRange";
    case ErrorCode::EmptyGroup: return "EmptyGroup";
    case ErrorCode::UndefinedSrp: return "UndefinedSrp";
    case ErrorCode::EmptyTrace: return "EmptyTrace";
    case ErrorCode::UndefinedCV: return "UndefinedCV";
    case ErrorCode::MissingTokenStream: return "MissingTokenStream";
    case ErrorCode::UndefinedScore: return "UndefinedScore";
    case ErrorCode::DegenerateInput: return "DegenerateInput";
    case ErrorCode::BudgetExceeded: return "BudgetExceeded";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the codes above so
/// callers (and the CLI exit-code mapping) can branch without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace moelab
