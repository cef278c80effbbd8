#include "gnsspdr/errors.h"

namespace gnsspdr {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kNearSingularInput: return "NearSingularInput";
    case ErrorKind::kDegenerateGeometry: return "DegenerateGeometry";
    case ErrorKind::kInvalidElevation: return "InvalidElevation";
    case ErrorKind::kDegenerateOrientation: return "DegenerateOrientation";
    case ErrorKind::kInvalidWindow: return "InvalidWindow";
    case ErrorKind::kIsotropicWindow: return "IsotropicWindow";
    case ErrorKind::kAmbiguousForward: return "AmbiguousForward";
    case ErrorKind::kInvalidDt: return "InvalidDt";
    case ErrorKind::kInsufficientSatellites: return "InsufficientSatellites";
    case ErrorKind::kSingularGeometry: return "SingularGeometry";
    case ErrorKind::kEmptyGraph: return "EmptyGraph";
    case ErrorKind::kNumericalFailure: return "NumericalFailure";
    case ErrorKind::kConfigError: return "ConfigError";
    case ErrorKind::kParseError: return "ParseError";
    case ErrorKind::kSchemaError: return "SchemaError";
    case ErrorKind::kNonMonotoneTime: return "NonMonotoneTime";
    case ErrorKind::kIoError: return "IoError";
    case ErrorKind::kAlignmentError: return "AlignmentError";
    case ErrorKind::kEmptyInput: return "EmptyInput";
    case ErrorKind::kDivisionByZero: return "DivisionByZero";
    case ErrorKind::kInvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

Error::Error(ErrorKind kind, const std::string& message)
    : std::runtime_error(std::string(to_string(kind)) + ": " + message),
      kind_(kind) {}

Error::Error(ErrorKind kind, std::size_t line, const std::string& message)
    : std::runtime_error(std::string(to_string(kind)) + " (line " +
                         std::to_string(line) + "): " + message),
      kind_(kind),
      line_(line) {}

}  // namespace gnsspdr
