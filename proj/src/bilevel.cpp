#include "diffopt/bilevel.hpp"

#include <cmath>
#include <future>
#include <string>
#include <type_traits>

namespace diffopt {

std::string_view to_string(StopReason reason) {
  switch (reason) {
    case StopReason::kObjectiveTolerance: return "objective_tolerance";
    case StopReason::kMaxIters: return "max_iters";
    case StopReason::kStalled: return "stalled";
  }
  return "unknown";
}

LowerSolution solve_lower(const LowerProblem& lower, const Vec& x, const Vec& y_start,
                          const SolveOptions& opts) {
  return std::visit(
      [&](const auto& kind) -> LowerSolution {
        using Kind = std::decay_t<decltype(kind)>;
        if constexpr (std::is_same_v<Kind, UnconstrainedLower>) {
          return {newton_stationary(kind.objective, x, y_start, opts), 0.0};
        } else if constexpr (std::is_same_v<Kind, EqualityLower>) {
          return {newton_equality(kind.objective, kind.constraint, x, y_start, opts), 0.0};
        } else {
          BarrierResult r =
              barrier_solve(kind.objective, kind.constraints, x, y_start, kind.barrier, opts);
          return {std::move(r.point), r.t};
        }
      },
      lower.kind);
}

SolutionJacobian differentiate_lower(const LowerProblem& lower, const Vec& x,
                                     const LowerSolution& solution) {
  return std::visit(
      [&](const auto& kind) -> SolutionJacobian {
        using Kind = std::decay_t<decltype(kind)>;
        if constexpr (std::is_same_v<Kind, UnconstrainedLower>) {
          return grad_unconstrained(kind.objective, x, solution.point);
        } else if constexpr (std::is_same_v<Kind, EqualityLower>) {
          return grad_equality_kkt(kind.objective, kind.constraint, x, solution.point);
        } else {
          return grad_barrier(kind.objective, kind.constraints, x, solution.point, solution.t);
        }
      },
      lower.kind);
}

Eigen::Index BilevelProblem::stacked_size() const {
  Eigen::Index n = 0;
  for (const auto& l : lower) n += l.y0.size();
  return n;
}

Vec chain_rule_grad(const BilevelProblem& prob, const Vec& x, const Vec& y_star,
                    const Mat& dy_dx) {
  const Vec gx = prob.upper_grad_x(x, y_star);
  const Vec gy = prob.upper_grad_y(x, y_star);
  if (gx.size() != x.size() || gy.size() != y_star.size() || dy_dx.rows() != y_star.size() ||
      dy_dx.cols() != x.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "chain rule operand shapes");
  }
  return gx + dy_dx.transpose() * gy;
}

Vec chain_rule_grad(const BilevelProblem& prob, const Vec& x, const StationaryPoint& sp,
                    const SolutionJacobian& jac) {
  return chain_rule_grad(prob, x, sp.y, jac.dy_dx);
}

LowerState solve_all_lower(const BilevelProblem& prob, const Vec& x, const std::vector<Vec>& starts,
                           const SolveOptions& opts, bool parallel, bool with_jacobian) {
  const std::size_t count = prob.lower.size();
  struct Piece {
    LowerSolution solution;
    Mat jac;
  };
  auto work = [&](std::size_t i) {
    Piece piece{solve_lower(prob.lower[i], x, starts[i], opts), Mat()};
    if (with_jacobian) piece.jac = differentiate_lower(prob.lower[i], x, piece.solution).dy_dx;
    return piece;
  };

  std::vector<Piece> pieces;
  pieces.reserve(count);
  if (parallel && count > 1) {
    std::vector<std::future<Piece>> futures;
    for (std::size_t i = 0; i < count; ++i) futures.push_back(std::async(std::launch::async, work, i));
    for (auto& f : futures) pieces.push_back(f.get());
  } else {
    for (std::size_t i = 0; i < count; ++i) pieces.push_back(work(i));
  }

  LowerState state;
  state.y.resize(prob.stacked_size());
  if (with_jacobian) state.dy_dx = Mat::Zero(prob.stacked_size(), x.size());
  Eigen::Index offset = 0;
  for (auto& piece : pieces) {
    const Eigen::Index n = piece.solution.point.y.size();
    state.y.segment(offset, n) = piece.solution.point.y;
    if (with_jacobian) state.dy_dx.middleRows(offset, n) = piece.jac;
    offset += n;
    state.solutions.push_back(std::move(piece.solution));
  }
  return state;
}

namespace {

std::vector<Vec> starts_from(const LowerState& state) {
  std::vector<Vec> starts;
  for (const auto& s : state.solutions) starts.push_back(s.point.y);
  return starts;
}

}  // namespace

BilevelTrace descend(const BilevelProblem& prob, const Vec& x0, const DescendOptions& opts) {
  if (!(opts.eta >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "eta must be non-negative");
  if (opts.max_iters < 0 || opts.max_halvings < 0) {
    throw Error(ErrorCode::kInvalidArgument, "iteration limits must be non-negative");
  }
  if (prob.lower.empty()) throw Error(ErrorCode::kInvalidArgument, "no lower problem");
  require_finite(x0, "x0");

  auto solve = [&](const Vec& x, const std::vector<Vec>& starts, bool jac, int iter) {
    try {
      return solve_all_lower(prob, x, starts, opts.solve, opts.parallel, jac);
    } catch (const Error& e) {
      throw Error(ErrorCode::kLowerSolveFailed,
                  "iteration " + std::to_string(iter) + ": " + e.what());
    }
  };

  std::vector<Vec> cold;
  for (const auto& l : prob.lower) cold.push_back(l.y0);

  BilevelTrace trace;
  Vec x = x0;
  LowerState state = solve(x, cold, true, 0);
  double objective = prob.upper_eval(x, state.y);
  Vec grad = chain_rule_grad(prob, x, state.y, state.dy_dx);
  const double initial = objective;
  trace.iterations.push_back({0, x, state.y, objective, grad.norm(), 0.0});

  for (int iter = 1; iter <= opts.max_iters; ++iter) {
    if (objective <= opts.obj_tol) {
      trace.reason = StopReason::kObjectiveTolerance;
      return trace;
    }
    const std::vector<Vec> warm = starts_from(state);
    double step = opts.eta;
    bool accepted = false;
    Vec x_new;
    LowerState trial;
    double trial_objective = 0.0;
    for (int halving = 0; halving <= opts.max_halvings; ++halving, step *= 0.5) {
      x_new = x - step * grad;
      const bool last = halving == opts.max_halvings;
      try {
        trial = solve_all_lower(prob, x_new, warm, opts.solve, opts.parallel, false);
      } catch (const Error& e) {
        if (last) {
          throw Error(ErrorCode::kLowerSolveFailed,
                      "iteration " + std::to_string(iter) + ": " + e.what());
        }
        continue;
      }
      trial_objective = prob.upper_eval(x_new, trial.y);
      if (opts.max_halvings == 0 || trial_objective <= objective) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      trace.reason = StopReason::kStalled;
      return trace;
    }
    if (std::isfinite(initial) &&
        !(trial_objective <= opts.divergence_factor * std::max(initial, 1e-300))) {
      throw Error(ErrorCode::kDivergenceDetected,
                  "iteration " + std::to_string(iter) + ": objective " +
                      std::to_string(trial_objective));
    }
    x = x_new;
    state = solve(x, starts_from(trial), true, iter);
    objective = prob.upper_eval(x, state.y);
    grad = chain_rule_grad(prob, x, state.y, state.dy_dx);
    trace.iterations.push_back({iter, x, state.y, objective, grad.norm(), step});
  }
  trace.reason = objective <= opts.obj_tol ? StopReason::kObjectiveTolerance : StopReason::kMaxIters;
  return trace;
}

}  // namespace diffopt
