#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace diffopt {

enum class ErrorCode {
  kSingularMatrix,
  kRankDeficient,
  kMaxItersExceeded,
  kInfeasible,
  kInfeasibleStart,
  kSingularHessian,
  kSingularReducedHessian,
  kSingularSchurComplement,
  kSingularBarrierHessian,
  kResidualTooLarge,
  kLowerSolveFailed,
  kDivergenceDetected,
  kDimensionMismatch,
  kDegenerateBranch,
  kBoundaryContact,
  kEvaluationFailed,
  kInvalidArgument,
};

std::string_view to_string(ErrorCode code);

// All toolkit failures are reported through this exception; callers branch on code().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace diffopt
