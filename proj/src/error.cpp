#include "yamabe/error.hpp"

namespace yamabe {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::UnsupportedDimension: return "UnsupportedDimension";
    case ErrorCode::InvalidResolution: return "InvalidResolution";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::FormatError: return "FormatError";
    case ErrorCode::InvalidMesh: return "InvalidMesh";
    case ErrorCode::DegenerateCell: return "DegenerateCell";
    case ErrorCode::SolverDiverged: return "SolverDiverged";
    case ErrorCode::MissingFarField: return "MissingFarField";
    case ErrorCode::NonpositiveConformalFactor: return "NonpositiveConformalFactor";
    case ErrorCode::ZeroBoundaryTrace: return "ZeroBoundaryTrace";
    case ErrorCode::PositivityViolated: return "PositivityViolated";
    case ErrorCode::QuadratureNotConverged: return "QuadratureNotConverged";
    case ErrorCode::PreconditionRho: return "PreconditionRho";
    case ErrorCode::ChartTooSmall: return "ChartTooSmall";
    case ErrorCode::FitDiverged: return "FitDiverged";
    case ErrorCode::PoleNotOnBoundary: return "PoleNotOnBoundary";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

}  // namespace yamabe
