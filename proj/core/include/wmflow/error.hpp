#pragma once

#include <stdexcept>
#include <string>

namespace wmflow {

// Every failure mode exposed by the toolkit. The enum name doubles as the
// machine-readable error string printed by the CLI.
enum class ErrorCode {
  ShapeMismatch,
  LengthMismatch,
  DivisionByZero,
  NonFiniteInput,
  NonScalarLoss,
  NumericOverflow,
  InexactDivision,
  BadParams,
  MissingCover,
  TruncatedStream,
  ChecksumMismatch,
  RangeExceeded,
  CapacityExceeded,
  MalformedHeader,
  InconsistentMap,
  IoError,
};

const char* error_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(error_name(code)) + ": " + what), code_(code) {}

  ErrorCode code() const { return code_; }
  const char* name() const { return error_name(code_); }

 private:
  ErrorCode code_;
};

inline const char* error_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::DivisionByZero: return "DivisionByZero";
    case ErrorCode::NonFiniteInput: return "NonFiniteInput";
    case ErrorCode::NonScalarLoss: return "NonScalarLoss";
    case ErrorCode::NumericOverflow: return "NumericOverflow";
    case ErrorCode::InexactDivision: return "InexactDivision";
    case ErrorCode::BadParams: return "BadParams";
    case ErrorCode::MissingCover: return "MissingCover";
    case ErrorCode::TruncatedStream: return "TruncatedStream";
    case ErrorCode::ChecksumMismatch: return "ChecksumMismatch";
    case ErrorCode::RangeExceeded: return "RangeExceeded";
    case ErrorCode::CapacityExceeded: return "CapacityExceeded";
    case ErrorCode::MalformedHeader: return "MalformedHeader";
    case ErrorCode::InconsistentMap: return "InconsistentMap";
    case ErrorCode::IoError: return "IoError";
  }
  return "UnknownError";
}

}  // namespace wmflow
