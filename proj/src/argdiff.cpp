#include "diffopt/argdiff.hpp"

#include <string>

namespace diffopt {

std::string_view to_string(JacobianMethod method) {
  switch (method) {
    case JacobianMethod::kUnconstrained: return "unconstrained";
    case JacobianMethod::kEqualityNullspace: return "equality_nullspace";
    case JacobianMethod::kEqualityKkt: return "equality_kkt";
    case JacobianMethod::kBarrier: return "barrier";
  }
  return "unknown";
}

namespace {

// Pivots are judged against the right-hand side too: a 1x1 Hessian at a double
// root is tiny next to f_XY, while exp(f) shrinks both by the same factor.
SymFactor factor_or(const Mat& h, ErrorCode code, const char* what, double rhs_scale = 0.0) {
  if (max_abs(h) == 0.0) throw Error(code, std::string(what) + " vanishes");
  try {
    return SymFactor(h, rhs_scale);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kSingularMatrix) throw Error(code, e.what());
    throw;
  }
}

void check_shapes(const Vec& x, const StationaryPoint& sp, const Mat& cross) {
  if (cross.rows() != sp.y.size() || cross.cols() != x.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "cross_xy must be n x p");
  }
}

void gate(double residual) {
  if (!(residual <= kStationarityGate)) {
    throw Error(ErrorCode::kResidualTooLarge,
                "stationarity residual " + std::to_string(residual) + " above gate");
  }
}

void check_feasible(const EqualityConstraint& eq, const Vec& y) {
  if (eq.a.cols() != y.size()) throw Error(ErrorCode::kDimensionMismatch, "A cols vs y");
  if (eq.violation(y) > 1e-8) throw Error(ErrorCode::kInfeasible, "point violates A y = b");
}

}  // namespace

SolutionJacobian grad_unconstrained(const ObjectiveOracle& oracle, const Vec& x,
                                    const StationaryPoint& sp) {
  const SmoothFunction f = minimization_form(oracle);
  gate(max_abs(f.grad_y(x, sp.y)));
  const Mat cross = f.cross_xy(x, sp.y);
  check_shapes(x, sp, cross);
  const SymFactor h =
      factor_or(f.hess_yy(x, sp.y), ErrorCode::kSingularHessian, "f_YY", max_abs(cross));
  return {-h.solve(cross), JacobianMethod::kUnconstrained, sp};
}

SolutionJacobian grad_equality_nullspace(const ObjectiveOracle& oracle,
                                         const EqualityConstraint& eq, const Vec& x,
                                         const StationaryPoint& sp) {
  eq.validate();
  check_feasible(eq, sp.y);
  const SmoothFunction f = minimization_form(oracle);
  const Mat basis = nullspace_basis(eq.a);
  gate(max_abs(basis.transpose() * f.grad_y(x, sp.y)));
  const Mat cross = f.cross_xy(x, sp.y);
  check_shapes(x, sp, cross);
  const Mat reduced = basis.transpose() * f.hess_yy(x, sp.y) * basis;
  const Mat reduced_cross = basis.transpose() * cross;
  const SymFactor rf = factor_or(reduced, ErrorCode::kSingularReducedHessian, "F^T f_YY F",
                                 max_abs(reduced_cross));
  return {-basis * rf.solve(reduced_cross), JacobianMethod::kEqualityNullspace, sp};
}

SolutionJacobian grad_equality_kkt(const ObjectiveOracle& oracle, const EqualityConstraint& eq,
                                   const Vec& x, const StationaryPoint& sp) {
  eq.validate();
  const SmoothFunction f = minimization_form(oracle);
  const Vec g = f.grad_y(x, sp.y);
  if (eq.rows() == 0) {
    gate(max_abs(g));
  } else {
    check_feasible(eq, sp.y);
    gate(max_abs(nullspace_basis(eq.a).transpose() * g));
  }
  const Mat cross = f.cross_xy(x, sp.y);
  check_shapes(x, sp, cross);
  const SymFactor h =
      factor_or(f.hess_yy(x, sp.y), ErrorCode::kSingularHessian, "f_YY", max_abs(cross));
  const Mat hinv_cross = h.solve(cross);
  if (eq.rows() == 0) return {-hinv_cross, JacobianMethod::kEqualityKkt, sp};

  const Mat hinv_at = h.solve(Mat(eq.a.transpose()));
  const SymFactor schur =
      factor_or(eq.a * hinv_at, ErrorCode::kSingularSchurComplement, "A H^-1 A^T");
  const Mat dy_dx = hinv_at * schur.solve(Mat(eq.a * hinv_cross)) - hinv_cross;
  return {dy_dx, JacobianMethod::kEqualityKkt, sp};
}

SolutionJacobian grad_barrier(const ObjectiveOracle& oracle,
                              const std::vector<InequalityConstraint>& constraints, const Vec& x,
                              const StationaryPoint& sp_t, double t) {
  if (!(max_constraint(constraints, x, sp_t.y) < 0.0)) {
    throw Error(ErrorCode::kInfeasible, "barrier point is not strictly feasible");
  }
  const SmoothFunction barrier = barrier_function(oracle, constraints, t);
  gate(max_abs(barrier.grad_y(x, sp_t.y)) / std::max(1.0, t));
  const Mat cross = barrier.cross_xy(x, sp_t.y);
  check_shapes(x, sp_t, cross);
  const SymFactor h =
      factor_or(barrier.hess_yy(x, sp_t.y), ErrorCode::kSingularBarrierHessian, "barrier Hessian",
                max_abs(cross));
  return {-h.solve(cross), JacobianMethod::kBarrier, sp_t};
}

}  // namespace diffopt
