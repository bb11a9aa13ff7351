#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "diffopt/bilevel.hpp"

namespace diffopt::examples {

// ---- scalar mean --------------------------------------------------------

struct ScalarValue {
  double g = 0.0;
  double dg = 0.0;
};

/// Closed-form mean of h_i(x) and its derivative.
ScalarValue scalar_mean(const Vec& h_values, const Vec& h_derivs);

/// sum_i (h_i(x) - y)^2 with h_i(x) = slope_i x + offset_i.
ObjectiveOracle scalar_mean_oracle(const Vec& slopes, const Vec& offsets);

// ---- three stationary points --------------------------------------------

/// f(x, y) = x y^4 + 2 x^2 y^3 - 12 y^2 (scalar x and y).
ObjectiveOracle three_minima_oracle();

/// Real roots of f_Y(x, .) = 0 in branch order {0, (-3x^2 + sqrt(D)) / 4x,
/// (-3x^2 - sqrt(D)) / 4x} with D = 9x^4 + 96x. A zero discriminant yields two
/// roots, a negative one only {0}. Requires x != 0.
std::vector<double> three_minima_roots(double x);

/// -(y^3 + 3 x y^2) / (3 x y^2 + 3 x^2 y - 6); throws kDegenerateBranch on a
/// zero denominator.
double three_minima_grad(double x, double y_root);

/// x at which two of the three branches merge: -2 (4/3)^(1/3).
double three_minima_double_root_x();

// ---- soft-max maximum likelihood ----------------------------------------

struct SoftmaxParams {
  Mat a;  // m x n, row j is a_j
  Vec b;  // m
  int class_index = 0;  // zero-based

  Eigen::Index classes() const { return a.rows(); }
  Eigen::Index dims() const { return a.cols(); }
  Eigen::Index param_count() const { return a.size() + b.size(); }
  Eigen::Index a_index(Eigen::Index j, Eigen::Index k) const { return j * dims() + k; }
  Eigen::Index b_index(Eigen::Index j) const { return a.size() + j; }

  void validate() const;
};

/// Parameters flattened as (a_11, a_12, ..., a_mn, b_1, ..., b_m).
Vec pack(const SoftmaxParams& params);
SoftmaxParams unpack(const Vec& theta, Eigen::Index m, Eigen::Index n, int class_index);

/// Class probabilities l_j(y), computed with a shifted log-sum-exp.
Vec softmax_likelihoods(const Mat& a, const Vec& b, const Vec& y);

/// log l_i(y; theta) as a maximization oracle in y, parameterized by the
/// packed theta. params supplies only the shape and the class index.
ObjectiveOracle softmax_oracle(const SoftmaxParams& params);

/// ||y||^2 - 1 <= 0.
InequalityConstraint unit_ball_constraint();

/// 1^T y = 1.
EqualityConstraint sum_one_constraint(Eigen::Index n);

enum class SoftmaxVariantKind { kUnconstrained, kSumOne, kUnitBall };

struct SoftmaxVariant {
  SoftmaxVariantKind kind = SoftmaxVariantKind::kUnconstrained;
  double t = 1.0;  // barrier parameter, unit ball only
};

std::string_view to_string(SoftmaxVariantKind kind);
std::optional<SoftmaxVariantKind> parse_variant(std::string_view name);

/// The lower problem g_i(theta) for one variant, cold-started at the origin
/// (or at the centroid of the simplex for sum-one).
LowerProblem softmax_lower(const SoftmaxParams& params, SoftmaxVariant variant);

struct SoftmaxDerivs {
  Mat jacobian;  // n x p in pack() order
  Vec a_bar;
  Vec likelihoods;
  Mat h;  // Hessian of log l_i at y*
  std::optional<Mat> h_dagger;

  Vec d_a(const SoftmaxParams& params, Eigen::Index j, Eigen::Index k) const {
    return jacobian.col(params.a_index(j, k));
  }
  Vec d_b(const SoftmaxParams& params, Eigen::Index j) const {
    return jacobian.col(params.b_index(j));
  }
};

/// Closed-form derivatives of g_i with respect to every a_jk and b_j.
///
/// Unconstrained: H^{-1} with the i == j / i != j case split. Sum-one: the
/// same formulas with H-dagger = H^{-1} - H^{-1} 1 1^T H^{-1} / (1^T H^{-1} 1).
/// Unit ball: K = t H + hess phi with phi = log(1 - ||y||^2); at a barrier
/// centre a_i != a_bar, so the class-i terms keep their l_i y_k (a_i - a_bar)
/// part and d/db_i is generally nonzero for finite t.
SoftmaxDerivs softmax_param_grads(const SoftmaxParams& params, SoftmaxVariant variant,
                                  const Vec& y_star);

/// Hessian of log(1 - ||y||^2): -4 y y^T / s^2 - 2 I / s with s = 1 - ||y||^2.
Mat unit_ball_barrier_hessian(const Vec& y);

/// Random parameters: entries of a and b are scale * N(0, 1) from a seeded
/// mt19937_64.
SoftmaxParams random_softmax(Eigen::Index m, Eigen::Index n, std::uint64_t seed,
                             double scale = 1.0);

/// Whether the likelihood of `class_index` attains a finite maximum, i.e. a_i
/// lies strictly inside the hull of the other rows (n <= 2, restricted to the
/// constraint plane for sum-one). Always true for the unit ball.
bool class_bounded(const SoftmaxParams& params, int class_index, SoftmaxVariantKind kind);

/// First class whose maximizer exists for the variant (n <= 2 for the
/// unconstrained and sum-one checks); nullopt when none does.
std::optional<int> bounded_class(const SoftmaxParams& params, SoftmaxVariantKind kind);

// ---- positivity constraint ----------------------------------------------

/// Barrier solution of min_y t sum_i (h_i - y)^2 - log y and its derivative
/// 2t sum h'_i / (2tm + 1/g_t^2).
ScalarValue positivity_reference(const Vec& h_values, const Vec& h_derivs, double t);

/// h_i(x) = h'_i x; with m = 1 and h'_1 = 1 g_t approximates max(x, 0).
ScalarValue positivity_reference(double x, double t, const Vec& h_derivs);

/// max{0, mean h} and its derivative; at the kink the x > 0 side is reported.
ScalarValue positivity_truth(double x, const Vec& h_derivs);

/// The barrier lower problem for h_i(x) = h'_i x with y >= 0.
LowerProblem positivity_lower(const Vec& h_derivs, double x_start, std::optional<double> t_fixed);

/// Design starting point max(x, 0) + 0.5.
double positivity_start(double x);

// ---- bi-level target placement ------------------------------------------

struct BilevelSoftmaxFixture {
  BilevelProblem problem;
  Vec theta0;
  Mat targets;  // m x n
  Eigen::Index classes = 0;
  Eigen::Index dims = 0;
};

inline constexpr double kBilevelBarrierT = 1e4;

/// Targets t_i = (cos(2 pi i / m + pi / 2), sin(...)) for i = 0..m-1, lower
/// problems g_i = argmax_{||y|| <= 1} log l_i and upper objective
/// 1/2 sum ||g_i - t_i||^2. The lower barrier problems follow the central path
/// from t = 1 up to t_barrier (a single centering when t_barrier <= 1).
BilevelSoftmaxFixture bilevel_softmax_fixture(Eigen::Index m = 3, Eigen::Index n = 2,
                                              std::uint64_t seed = 0,
                                              double t_barrier = kBilevelBarrierT);

}  // namespace diffopt::examples
