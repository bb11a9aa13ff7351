#include "diffopt/inner_solvers.hpp"

#include <cmath>
#include <functional>
#include <limits>
#include <string>

namespace diffopt {

void SolveOptions::validate() const {
  if (!(grad_tol > 0.0)) throw Error(ErrorCode::kInvalidArgument, "grad_tol must be positive");
  if (max_iters < 0) throw Error(ErrorCode::kInvalidArgument, "max_iters must be >= 0");
  if (!(backtrack_beta > 0.0 && backtrack_beta < 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "backtrack_beta must lie in (0, 1)");
  }
  if (!(armijo_c > 0.0 && armijo_c < 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "armijo_c must lie in (0, 1)");
  }
}

void BarrierOptions::validate() const {
  if (!(t_init > 0.0)) throw Error(ErrorCode::kInvalidArgument, "t_init must be positive");
  if (!(mu > 1.0)) throw Error(ErrorCode::kInvalidArgument, "mu must exceed 1");
  if (!(duality_gap_tol > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "duality_gap_tol must be positive");
  }
  if (t_fixed && !(*t_fixed > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "t_fixed must be positive");
  }
}

namespace {

constexpr int kMaxBacktracks = 60;
constexpr double kUlpSteps = 4.0;

// One problem instance for the shared Newton loop. `projector` is empty for
// unconstrained problems, otherwise the orthogonal projector onto null(A).
struct NewtonProblem {
  std::function<Vec(const Vec&)> grad;
  std::function<Mat(const Vec&)> hess;
  std::function<bool(const Vec&)> admissible;
  std::function<Vec(const Vec&, const Vec&)> direction;  // (y, g) -> Newton step
  std::function<Vec(const Vec&)> restore;                // re-impose constraints after a step
  Mat projector;
  double tol = 0.0;
};

Vec project(const Mat& projector, const Vec& v) {
  return projector.size() == 0 ? v : Vec(projector * v);
}

StationaryPoint run_newton(const NewtonProblem& prob, const Vec& y0, const SolveOptions& opts) {
  StationaryPoint best;
  Vec y = y0;
  Vec r = project(prob.projector, prob.grad(y));
  double res = max_abs(r);
  best.y = y;
  best.residual = res;

  for (int it = 0;; ++it) {
    if (res <= prob.tol) {
      best.y = y;
      best.residual = res;
      best.iterations = it;
      return best;
    }
    if (it >= opts.max_iters) break;

    const Mat h = prob.hess(y);
    Vec d;
    try {
      d = prob.direction(y, prob.grad(y));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kSingularMatrix) throw;
    }
    // merit = 1/2 ||r||^2, gradient of merit = H r (projected for equality problems)
    const Vec merit_grad = project(prob.projector, h * r);
    double slope = d.size() == y.size() && d.allFinite() ? merit_grad.dot(d) : 0.0;
    // A Newton step below the spacing of doubles cannot move y any further.
    if (slope < 0.0 && max_abs(d) <= kUlpSteps * std::numeric_limits<double>::epsilon() *
                                         std::max(1.0, max_abs(y))) {
      best.y = y;
      best.residual = res;
      best.iterations = it;
      return best;
    }
    if (!(slope < 0.0)) {
      d = -merit_grad;
      slope = -merit_grad.squaredNorm();
      if (!(slope < 0.0)) {
        throw SolveError(ErrorCode::kSingularMatrix, "no descent direction for the residual",
                         best);
      }
    }

    const double merit0 = 0.5 * r.squaredNorm();
    double alpha = 1.0;
    bool accepted = false;
    Vec trial;
    Vec trial_r;
    for (int k = 0; k < kMaxBacktracks; ++k, alpha *= opts.backtrack_beta) {
      trial = y + alpha * d;
      if (prob.restore) trial = prob.restore(trial);
      if (!trial.allFinite() || (prob.admissible && !prob.admissible(trial))) continue;
      trial_r = project(prob.projector, prob.grad(trial));
      if (!trial_r.allFinite()) continue;
      if (0.5 * trial_r.squaredNorm() <= merit0 + opts.armijo_c * alpha * slope) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      best.iterations = it;
      throw SolveError(ErrorCode::kMaxItersExceeded,
                       "line search stalled at residual " + std::to_string(res), best);
    }
    y = trial;
    r = trial_r;
    res = max_abs(r);
    if (res < best.residual) {
      best.y = y;
      best.residual = res;
    }
  }
  best.iterations = opts.max_iters;
  throw SolveError(ErrorCode::kMaxItersExceeded,
                   "no convergence in " + std::to_string(opts.max_iters) + " iterations", best);
}

void check_start(const Vec& x, const Vec& y0) {
  require_finite(x, "x");
  require_finite(y0, "y0");
  if (y0.size() == 0) throw Error(ErrorCode::kDimensionMismatch, "empty y0");
}

NewtonProblem unconstrained_problem(const SmoothFunction& f, const Vec& x, double tol) {
  NewtonProblem prob;
  prob.grad = [f, x](const Vec& y) { return f.grad_y(x, y); };
  prob.hess = [f, x](const Vec& y) { return f.hess_yy(x, y); };
  prob.direction = [f, x](const Vec& y, const Vec& g) -> Vec {
    return -SymFactor(f.hess_yy(x, y)).solve(g);
  };
  prob.tol = tol;
  return prob;
}

}  // namespace

StationaryPoint newton_stationary(const ObjectiveOracle& oracle, const Vec& x, const Vec& y0,
                                  const SolveOptions& opts) {
  opts.validate();
  check_start(x, y0);
  return run_newton(unconstrained_problem(minimization_form(oracle), x, opts.grad_tol), y0, opts);
}

StationaryPoint newton_equality(const ObjectiveOracle& oracle, const EqualityConstraint& eq,
                                const Vec& x, const Vec& y0, const SolveOptions& opts) {
  if (eq.rows() == 0) return newton_stationary(oracle, x, y0, opts);
  opts.validate();
  check_start(x, y0);
  eq.validate();
  if (eq.a.cols() != y0.size()) throw Error(ErrorCode::kDimensionMismatch, "A cols vs y0");
  if (eq.violation(y0) > 1e-8) {
    throw Error(ErrorCode::kInfeasible, "start violates A y = b");
  }

  const SmoothFunction f = minimization_form(oracle);
  const Eigen::Index n = eq.a.cols();
  const Eigen::Index m = eq.a.rows();
  const Mat f_basis = nullspace_basis(eq.a);
  const Mat pinv = eq.a.transpose() * sym_solve(eq.a * eq.a.transpose(), Mat::Identity(m, m));

  NewtonProblem prob;
  prob.grad = [f, x](const Vec& y) { return f.grad_y(x, y); };
  prob.hess = [f, x](const Vec& y) { return f.hess_yy(x, y); };
  // [H A^T; A 0] [d; lambda] = [-g; 0]
  prob.direction = [f, x, &eq, n, m](const Vec& y, const Vec& g) -> Vec {
    Mat kkt = Mat::Zero(n + m, n + m);
    kkt.topLeftCorner(n, n) = f.hess_yy(x, y);
    kkt.topRightCorner(n, m) = eq.a.transpose();
    kkt.bottomLeftCorner(m, n) = eq.a;
    Vec rhs = Vec::Zero(n + m);
    rhs.head(n) = -g;
    return SymFactor(kkt).solve(rhs).head(n);
  };
  prob.restore = [&eq, pinv](const Vec& y) -> Vec { return y + pinv * (eq.b - eq.a * y); };
  prob.projector = f_basis * f_basis.transpose();
  prob.tol = opts.grad_tol;

  StationaryPoint sp = run_newton(prob, prob.restore(y0), opts);
  // Least-squares multipliers: g + A^T lambda is then the projected gradient.
  const Vec g = f.grad_y(x, sp.y);
  sp.multipliers = Vec(-(pinv.transpose() * g));
  return sp;
}

BarrierResult barrier_solve(const ObjectiveOracle& oracle,
                            const std::vector<InequalityConstraint>& constraints, const Vec& x,
                            const Vec& y0, const BarrierOptions& bopts, const SolveOptions& opts) {
  opts.validate();
  bopts.validate();
  check_start(x, y0);
  if (!(max_constraint(constraints, x, y0) < 0.0)) {
    throw Error(ErrorCode::kInfeasibleStart, "y0 is not strictly feasible");
  }

  auto center = [&](double t, const Vec& start) {
    const SmoothFunction barrier = barrier_function(oracle, constraints, t);
    const double scale = std::max(1.0, t);
    NewtonProblem prob = unconstrained_problem(barrier, x, opts.grad_tol * scale);
    prob.admissible = [&constraints, x](const Vec& y) {
      return max_constraint(constraints, x, y) < 0.0;
    };
    StationaryPoint sp = run_newton(prob, start, opts);
    sp.residual /= scale;
    return sp;
  };

  if (bopts.t_fixed) return {center(*bopts.t_fixed, y0), *bopts.t_fixed};

  const double count = static_cast<double>(constraints.size());
  double t = bopts.t_init;
  BarrierResult result{center(t, y0), t};
  int total_iters = result.point.iterations;
  while (count / t > bopts.duality_gap_tol) {
    t *= bopts.mu;
    result = {center(t, result.point.y), t};
    total_iters += result.point.iterations;
  }
  result.point.iterations = total_iters;
  return result;
}

}  // namespace diffopt
