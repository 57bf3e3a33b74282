#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace yamabe {

enum class ErrorCode {
  UnsupportedDimension,
  InvalidResolution,
  IoError,
  FormatError,
  InvalidMesh,
  DegenerateCell,
  SolverDiverged,
  MissingFarField,
  NonpositiveConformalFactor,
  ZeroBoundaryTrace,
  PositivityViolated,
  QuadratureNotConverged,
  PreconditionRho,
  ChartTooSmall,
  FitDiverged,
  PoleNotOnBoundary,
  InvalidArgument,
};

std::string_view to_string(ErrorCode code);

// Every domain failure in the library is reported through this type; the
// CLI maps it to exit code 1.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace yamabe
