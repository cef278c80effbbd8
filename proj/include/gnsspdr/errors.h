#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace gnsspdr {

enum class ErrorKind {
  kNearSingularInput,
  kDegenerateGeometry,
  kInvalidElevation,
  kDegenerateOrientation,
  kInvalidWindow,
  kIsotropicWindow,
  kAmbiguousForward,
  kInvalidDt,
  kInsufficientSatellites,
  kSingularGeometry,
  kEmptyGraph,
  kNumericalFailure,
  kConfigError,
  kParseError,
  kSchemaError,
  kNonMonotoneTime,
  kIoError,
  kAlignmentError,
  kEmptyInput,
  kDivisionByZero,
  kInvalidArgument,
};

std::string_view to_string(ErrorKind kind);

/// All library failures surface as this exception; `kind()` identifies the
/// failure class, `line()` is set for file-parsing errors.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message);
  Error(ErrorKind kind, std::size_t line, const std::string& message);

  ErrorKind kind() const { return kind_; }
  std::optional<std::size_t> line() const { return line_; }

 private:
  ErrorKind kind_;
  std::optional<std::size_t> line_;
};

}  // namespace gnsspdr
