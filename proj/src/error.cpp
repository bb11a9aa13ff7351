#include "diffopt/error.hpp"

namespace diffopt {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kSingularMatrix: return "SingularMatrix";
    case ErrorCode::kRankDeficient: return "RankDeficient";
    case ErrorCode::kMaxItersExceeded: return "MaxItersExceeded";
    case ErrorCode::kInfeasible: return "Infeasible";
    case ErrorCode::kInfeasibleStart: return "InfeasibleStart";
    case ErrorCode::kSingularHessian: return "SingularHessian";
    case ErrorCode::kSingularReducedHessian: return "SingularReducedHessian";
    case ErrorCode::kSingularSchurComplement: return "SingularSchurComplement";
    case ErrorCode::kSingularBarrierHessian: return "SingularBarrierHessian";
    case ErrorCode::kResidualTooLarge: return "ResidualTooLarge";
    case ErrorCode::kLowerSolveFailed: return "LowerSolveFailed";
    case ErrorCode::kDivergenceDetected: return "DivergenceDetected";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kDegenerateBranch: return "DegenerateBranch";
    case ErrorCode::kBoundaryContact: return "BoundaryContact";
    case ErrorCode::kEvaluationFailed: return "EvaluationFailed";
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

}  // namespace diffopt
