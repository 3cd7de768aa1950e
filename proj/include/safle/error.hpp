#ifndef SAFLE_ERROR_HPP
#define SAFLE_ERROR_HPP

#include <stdexcept>
#include <string>

namespace safle {

// Stable error identities; the CLI maps categories to exit codes.
enum class ErrorCode {
  // configuration / argument errors
  DimensionMismatch,
  CodeOutOfRange,
  IndexOutOfRange,
  LabelOutOfRange,
  NonPositiveGamma,
  AlreadyRegularized,
  NotRegularized,
  GammaMismatch,
  ShapeMismatch,
  TooFewSamples,
  EmptyClient,
  InvalidConfig,
  // I/O and format errors
  BadMagic,
  ShapeOverflow,
  NonFiniteValue,
  ChecksumMismatch,
  IoFailure,
  // numerical failures
  FactorizationFailure,
  NegativeEigenBeyondTolerance,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

const char* error_code_name(ErrorCode code);

}  // namespace safle

#endif  // SAFLE_ERROR_HPP
