#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "diffopt/numcore.hpp"

namespace diffopt {

// A twice-differentiable scalar function f(x, y) of parameters x (length p)
// and variables y (length n), together with the derivatives the implicit
// gradient formulas consume. cross_xy returns the n x p matrix whose column j
// is d/dx_j of grad_y. grad_x is optional and only needed for monotone
// compositions.
struct SmoothFunction {
  std::function<double(const Vec& x, const Vec& y)> eval;
  std::function<Vec(const Vec& x, const Vec& y)> grad_y;
  std::function<Mat(const Vec& x, const Vec& y)> hess_yy;
  std::function<Mat(const Vec& x, const Vec& y)> cross_xy;
  std::function<Vec(const Vec& x, const Vec& y)> grad_x;
};

enum class Sense { kMinimize, kMaximize };

struct ObjectiveOracle : SmoothFunction {
  Sense sense = Sense::kMinimize;
};

// f_i(x, y) <= 0.
struct InequalityConstraint : SmoothFunction {};

struct EqualityConstraint {
  Mat a;  // m x n, full row rank
  Vec b;  // m

  Eigen::Index rows() const { return a.rows(); }
  // Throws kRankDeficient / kDimensionMismatch.
  void validate(double rank_tol = kDefaultRankTol) const;
  double violation(const Vec& y) const;
};

struct StationaryPoint {
  Vec y;
  double residual = 0.0;
  std::optional<Vec> multipliers;
  std::optional<int> branch;
  int iterations = 0;
};

/// The same objective written as a minimization: for Sense::kMaximize every
/// callback is negated, otherwise the oracle is returned unchanged.
SmoothFunction minimization_form(const ObjectiveOracle& oracle);

/// -f with the opposite sense. Stationary points and the implicit gradient
/// are unchanged.
ObjectiveOracle negated(const ObjectiveOracle& oracle);

/// exp(f(x, y)). Needs grad_x.
ObjectiveOracle compose_exp(const ObjectiveOracle& oracle);

/// log(f(x, y) + shift). Needs grad_x; callers guarantee f + shift > 0 where
/// it is evaluated.
ObjectiveOracle compose_log(const ObjectiveOracle& oracle, double shift);

// Targets h_i(x) in R^n for i = 1..m. values(x) is m x n; jacobian(x) is
// (m*n) x p with row i*n + k holding d h_ik / dx.
struct TargetMap {
  std::function<Mat(const Vec& x)> values;
  std::function<Mat(const Vec& x)> jacobian;
};

/// f(x, y) = sum_i w_i || h_i(x) - y ||^2.
ObjectiveOracle make_quadratic_oracle(const Vec& weights, TargetMap targets);

/// h_i(x) = slope_i * x + offset_i for scalar x and scalar y.
TargetMap affine_scalar_targets(const Vec& slopes, const Vec& offsets);

/// t * f0(x, y) - sum_i log(-f_i(x, y)) in minimization form. Constraints
/// without cross_xy are treated as independent of x. eval returns +inf
/// outside the strict interior.
SmoothFunction barrier_function(const ObjectiveOracle& objective,
                                const std::vector<InequalityConstraint>& constraints, double t);

/// max_i f_i(x, y); -inf when there are no constraints.
double max_constraint(const std::vector<InequalityConstraint>& constraints, const Vec& x,
                      const Vec& y);

/// f(x, y) = 1/2 y^T Q y + y^T (B x + c) with Q symmetric.
ObjectiveOracle make_quadratic_form_oracle(const Mat& q, const Mat& b, const Vec& c);

}  // namespace diffopt
