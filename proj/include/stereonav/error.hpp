#pragma once

#include <stdexcept>
#include <string>

namespace stereonav {

enum class ErrorCode {
  NonPositiveDisparity,
  NonPositiveDepth,
  DegenerateW,
  BehindCamera,
  InvalidArgument,
  TooFewCorrespondences,
  DegenerateConfiguration,
  ConsensusTooSmall,
  DegenerateLine,
  EmptyInput,
  SizeMismatch,
  ParamsInvalid,
  ParseError,
  ValidationError,
  IoError,
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::NonPositiveDisparity: return "NonPositiveDisparity";
    case ErrorCode::NonPositiveDepth: return "NonPositiveDepth";
    case ErrorCode::DegenerateW: return "DegenerateW";
    case ErrorCode::BehindCamera: return "BehindCamera";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::TooFewCorrespondences: return "TooFewCorrespondences";
    case ErrorCode::DegenerateConfiguration: return "DegenerateConfiguration";
    case ErrorCode::ConsensusTooSmall: return "ConsensusTooSmall";
    case ErrorCode::DegenerateLine: return "DegenerateLine";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::SizeMismatch: return "SizeMismatch";
    case ErrorCode::ParamsInvalid: return "ParamsInvalid";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::ValidationError: return "ValidationError";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

// Every failure in the library is reported through this one exception type;
// callers switch on code() when they need to distinguish causes.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace stereonav
