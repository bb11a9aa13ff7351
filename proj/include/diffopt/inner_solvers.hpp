#pragma once

#include <optional>
#include <vector>

#include "diffopt/problem.hpp"

namespace diffopt {

struct SolveOptions {
  double grad_tol = 1e-10;
  int max_iters = 100;
  double armijo_c = 1e-4;
  double backtrack_beta = 0.5;

  void validate() const;
};

struct BarrierOptions {
  double t_init = 1.0;
  double mu = 10.0;
  double duality_gap_tol = 1e-8;
  // Solve once at this t instead of following the central path.
  std::optional<double> t_fixed;

  void validate() const;
};

// Raised when a solver gives up; carries the best iterate seen.
class SolveError : public Error {
 public:
  SolveError(ErrorCode code, const std::string& what, StationaryPoint best)
      : Error(code, what), best_(std::move(best)) {}
  const StationaryPoint& best() const noexcept { return best_; }

 private:
  StationaryPoint best_;
};

/// Damped Newton iteration for grad_y f(x, y) = 0.
///
/// The line search is Armijo backtracking on ||grad||^2, so any stationary
/// point (minimum, maximum or saddle) is an acceptable limit. When the Newton
/// direction is not a descent direction for that merit the step falls back
/// to steepest descent on it.
StationaryPoint newton_stationary(const ObjectiveOracle& oracle, const Vec& x, const Vec& y0,
                                  const SolveOptions& opts = {});

/// Newton's method on the KKT system of min f s.t. A y = b from a feasible
/// start. Multipliers are reported for the minimization form
/// (grad f + A^T lambda = 0). An empty A reduces to newton_stationary.
StationaryPoint newton_equality(const ObjectiveOracle& oracle, const EqualityConstraint& eq,
                                const Vec& x, const Vec& y0, const SolveOptions& opts = {});

struct BarrierResult {
  StationaryPoint point;
  double t = 0.0;
};

/// Log-barrier method for f_i(x, y) <= 0. The reported residual is the
/// barrier gradient norm divided by max(1, t).
BarrierResult barrier_solve(const ObjectiveOracle& oracle,
                            const std::vector<InequalityConstraint>& constraints, const Vec& x,
                            const Vec& y0, const BarrierOptions& bopts = {},
                            const SolveOptions& opts = {});

}  // namespace diffopt
