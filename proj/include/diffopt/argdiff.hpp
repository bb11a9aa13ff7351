#pragma once

#include <vector>

#include "diffopt/problem.hpp"

namespace diffopt {

enum class JacobianMethod { kUnconstrained, kEqualityNullspace, kEqualityKkt, kBarrier };

std::string_view to_string(JacobianMethod method);

struct SolutionJacobian {
  Mat dy_dx;  // n x p, column j = d y* / d x_j
  JacobianMethod method = JacobianMethod::kUnconstrained;
  StationaryPoint at_point;
};

// Points whose stationarity residual exceeds this are refused.
inline constexpr double kStationarityGate = 1e-8;

/// -f_YY^{-1} f_XY at a stationary point. One factorization serves all p
/// parameter columns. Works unchanged for maximization oracles.
SolutionJacobian grad_unconstrained(const ObjectiveOracle& oracle, const Vec& x,
                                    const StationaryPoint& sp);

/// -F (F^T f_YY F)^{-1} F^T f_XY with F an orthonormal basis of null(A).
SolutionJacobian grad_equality_nullspace(const ObjectiveOracle& oracle,
                                         const EqualityConstraint& eq, const Vec& x,
                                         const StationaryPoint& sp);

/// (H^{-1} A^T (A H^{-1} A^T)^{-1} A H^{-1} - H^{-1}) f_XY with H = f_YY.
/// An A with zero rows gives -H^{-1} f_XY.
SolutionJacobian grad_equality_kkt(const ObjectiveOracle& oracle, const EqualityConstraint& eq,
                                   const Vec& x, const StationaryPoint& sp);

/// Jacobian of the minimizer of t f0 - sum log(-f_i):
/// -(t f_YY - phi_YY)^{-1} (t f_XY - phi_XY), evaluated at a strictly feasible
/// stationary point of that barrier objective.
SolutionJacobian grad_barrier(const ObjectiveOracle& oracle,
                              const std::vector<InequalityConstraint>& constraints, const Vec& x,
                              const StationaryPoint& sp_t, double t);

}  // namespace diffopt
