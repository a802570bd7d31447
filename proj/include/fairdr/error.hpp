#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace fairdr {

enum class ErrorCode {
  SingleClassData,
  NonFiniteInput,
  DimensionMismatch,
  KernelMatrixTooLarge,
  EmptySampleSet,
  SingularSystem,
  NonConvergence,
  LengthMismatch,
  DegenerateInput,
  InvalidArgument,
  TooFewRows,
  SingularDesign,
  ParseError,
  ValidationFailed,
  InsufficientData,
  IoError,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Exception carrying a machine-checkable code next to the message.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace fairdr
