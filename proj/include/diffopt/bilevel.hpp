#pragma once

#include <functional>
#include <variant>
#include <vector>

#include "diffopt/argdiff.hpp"
#include "diffopt/inner_solvers.hpp"

namespace diffopt {

struct UnconstrainedLower {
  ObjectiveOracle objective;
};

struct EqualityLower {
  ObjectiveOracle objective;
  EqualityConstraint constraint;
};

struct BarrierLower {
  ObjectiveOracle objective;
  std::vector<InequalityConstraint> constraints;
  BarrierOptions barrier;
};

// One lower-level problem. y0 is the cold start: feasible for equality
// problems and strictly feasible for barrier problems.
struct LowerProblem {
  std::variant<UnconstrainedLower, EqualityLower, BarrierLower> kind;
  Vec y0;
};

struct LowerSolution {
  StationaryPoint point;
  double t = 0.0;  // barrier parameter at which point was computed (barrier only)
};

LowerSolution solve_lower(const LowerProblem& lower, const Vec& x, const Vec& y_start,
                          const SolveOptions& opts = {});

/// Jacobian via the kernel matching the lower problem's kind (the KKT form
/// for equality constraints).
SolutionJacobian differentiate_lower(const LowerProblem& lower, const Vec& x,
                                     const LowerSolution& solution);

// Upper objective f^U(x, y) where y stacks the solutions of every lower
// problem in order.
struct BilevelProblem {
  std::function<double(const Vec& x, const Vec& y)> upper_eval;
  std::function<Vec(const Vec& x, const Vec& y)> upper_grad_x;
  std::function<Vec(const Vec& x, const Vec& y)> upper_grad_y;
  std::vector<LowerProblem> lower;

  Eigen::Index stacked_size() const;
};

/// upper_grad_x + dy_dx^T upper_grad_y at (x, y*).
Vec chain_rule_grad(const BilevelProblem& prob, const Vec& x, const Vec& y_star,
                    const Mat& dy_dx);
Vec chain_rule_grad(const BilevelProblem& prob, const Vec& x, const StationaryPoint& sp,
                    const SolutionJacobian& jac);

struct DescendOptions {
  double eta = 1.0;
  int max_iters = 500;
  double obj_tol = 1e-6;
  // Step halvings tried when a step raises the upper objective; 0 takes every
  // step as is.
  int max_halvings = 20;
  double divergence_factor = 1e6;
  bool parallel = false;
  SolveOptions solve;
};

struct TraceRecord {
  int iter = 0;
  Vec x;
  Vec y;
  double objective = 0.0;
  double grad_norm = 0.0;  // Euclidean norm of the hypergradient at x
  double step = 0.0;       // accepted step size that produced this record
};

enum class StopReason { kObjectiveTolerance, kMaxIters, kStalled };

std::string_view to_string(StopReason reason);

// Record 0 is the starting point; record k follows the k-th accepted update.
struct BilevelTrace {
  std::vector<TraceRecord> iterations;
  StopReason reason = StopReason::kMaxIters;
};

/// Gradient descent on x through the lower solution map. Lower problems are
/// warm-started from the previous solution on every outer iteration.
///
/// Throws kLowerSolveFailed (message carries the iteration index) and
/// kDivergenceDetected when the objective exceeds divergence_factor times its
/// initial value.
BilevelTrace descend(const BilevelProblem& prob, const Vec& x0, const DescendOptions& opts = {});

// Solution and stacked Jacobian of every lower problem at x.
struct LowerState {
  std::vector<LowerSolution> solutions;
  Vec y;
  Mat dy_dx;
};

LowerState solve_all_lower(const BilevelProblem& prob, const Vec& x, const std::vector<Vec>& starts,
                           const SolveOptions& opts, bool parallel, bool with_jacobian);

}  // namespace diffopt
