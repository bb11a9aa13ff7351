#include <gtest/gtest.h>

#include <cmath>

#include "diffopt/bilevel.hpp"
#include "diffopt/checks.hpp"
#include "diffopt/examples.hpp"

namespace diffopt {
namespace {

// upper = 1/2 (y - 3)^2, lower y = argmin (y - x)^2
BilevelProblem shifted_target(double target = 3.0) {
  BilevelProblem prob;
  prob.upper_eval = [target](const Vec&, const Vec& y) {
    return 0.5 * (y(0) - target) * (y(0) - target);
  };
  prob.upper_grad_x = [](const Vec& x, const Vec&) -> Vec { return Vec::Zero(x.size()); };
  prob.upper_grad_y = [target](const Vec&, const Vec& y) -> Vec {
    return Vec::Constant(1, y(0) - target);
  };
  const ObjectiveOracle lower =
      make_quadratic_oracle(Vec::Ones(1), affine_scalar_targets(Vec::Ones(1), Vec::Zero(1)));
  prob.lower.push_back({UnconstrainedLower{lower}, Vec::Zero(1)});
  return prob;
}

TEST(Descend, ReachesFixedPointOfScalarProblem) {
  DescendOptions opts;
  opts.eta = 0.5;
  opts.max_iters = 50;
  opts.obj_tol = 1e-14;
  const BilevelTrace trace = descend(shifted_target(), Vec::Zero(1), opts);
  EXPECT_LE(trace.iterations.size(), 51u);
  EXPECT_NEAR(trace.iterations.back().x(0), 3.0, 1e-6);
}

TEST(Descend, ZeroStepIsNoOp) {
  DescendOptions opts;
  opts.eta = 0.0;
  opts.max_iters = 5;
  const BilevelTrace trace = descend(shifted_target(), Vec::Constant(1, 1.0), opts);
  ASSERT_EQ(trace.iterations.size(), 6u);
  for (const auto& r : trace.iterations) {
    EXPECT_EQ(r.x(0), 1.0);
    EXPECT_EQ(r.objective, trace.iterations.front().objective);
  }
  EXPECT_EQ(trace.reason, StopReason::kMaxIters);
}

TEST(Descend, StopsAtObjectiveTolerance) {
  DescendOptions opts;
  opts.eta = 1.0;
  const BilevelTrace trace = descend(shifted_target(), Vec::Zero(1), opts);
  EXPECT_EQ(trace.reason, StopReason::kObjectiveTolerance);
  EXPECT_LE(trace.iterations.back().objective, opts.obj_tol);
  EXPECT_EQ(trace.iterations.front().iter, 0);
}

TEST(Descend, DivergenceDetectedWithoutHalving) {
  DescendOptions opts;
  opts.eta = 2.5;
  opts.max_halvings = 0;
  try {
    descend(shifted_target(), Vec::Zero(1), opts);
    FAIL() << "expected DivergenceDetected";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDivergenceDetected);
  }
}

TEST(Descend, HalvingKeepsObjectiveMonotone) {
  DescendOptions opts;
  opts.eta = 2.5;
  opts.max_iters = 40;
  const BilevelTrace trace = descend(shifted_target(), Vec::Zero(1), opts);
  for (std::size_t k = 1; k < trace.iterations.size(); ++k) {
    EXPECT_LE(trace.iterations[k].objective, trace.iterations[k - 1].objective);
  }
  EXPECT_LE(trace.iterations.back().objective, opts.obj_tol);
}

TEST(Descend, LowerFailureIsReported) {
  BilevelProblem prob = shifted_target();
  ObjectiveOracle broken = std::get<UnconstrainedLower>(prob.lower[0].kind).objective;
  broken.hess_yy = [](const Vec&, const Vec&) -> Mat { return Mat::Zero(1, 1); };
  prob.lower[0].kind = UnconstrainedLower{broken};
  try {
    descend(prob, Vec::Constant(1, 1.0));
    FAIL() << "expected LowerSolveFailed";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kLowerSolveFailed);
  }
}

TEST(Descend, InvalidOptionsRejected) {
  DescendOptions opts;
  opts.eta = -1.0;
  EXPECT_THROW(descend(shifted_target(), Vec::Zero(1), opts), Error);
  EXPECT_THROW(descend(BilevelProblem{}, Vec::Zero(1)), Error);
}

TEST(ChainRule, UpperIndependentOfY) {
  BilevelProblem prob = shifted_target();
  prob.upper_grad_x = [](const Vec&, const Vec&) -> Vec { return (Vec(2) << 1.5, -2.0).finished(); };
  prob.upper_grad_y = [](const Vec&, const Vec& y) -> Vec { return Vec::Zero(y.size()); };
  const Vec g = chain_rule_grad(prob, Vec::Zero(2), Vec::Zero(1), Mat::Ones(1, 2));
  EXPECT_EQ(g, (Vec(2) << 1.5, -2.0).finished());
}

TEST(ChainRule, IdentityJacobianPassesUpperGradY) {
  BilevelProblem prob = shifted_target();
  prob.upper_grad_x = [](const Vec& x, const Vec&) -> Vec { return Vec::Zero(x.size()); };
  prob.upper_grad_y = [](const Vec&, const Vec&) -> Vec { return Vec::Constant(1, 0.25); };
  EXPECT_EQ(chain_rule_grad(prob, Vec::Zero(1), Vec::Zero(1), Mat::Identity(1, 1))(0), 0.25);
}

TEST(ChainRule, ShapeMismatchThrows) {
  const BilevelProblem prob = shifted_target();
  try {
    chain_rule_grad(prob, Vec::Zero(1), Vec::Zero(1), Mat::Identity(2, 2));
    FAIL() << "expected DimensionMismatch";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDimensionMismatch);
  }
}

TEST(ChainRule, SoftmaxHypergradientMatchesFiniteDifferences) {
  const examples::BilevelSoftmaxFixture fx = examples::bilevel_softmax_fixture(3, 2, 0);
  std::vector<Vec> starts;
  for (const auto& l : fx.problem.lower) starts.push_back(l.y0);
  const LowerState state = solve_all_lower(fx.problem, fx.theta0, starts, {}, false, true);
  const Vec analytic = chain_rule_grad(fx.problem, fx.theta0, state.y, state.dy_dx);
  const Vec numeric = checks::fd_hypergradient(fx.problem, fx.theta0, state.y);
  EXPECT_TRUE(gradcheck(analytic, numeric, 1e-4).pass);
}

TEST(SolveAllLower, ParallelMatchesSerialExactly) {
  const examples::BilevelSoftmaxFixture fx = examples::bilevel_softmax_fixture(4, 2, 3);
  std::vector<Vec> starts;
  for (const auto& l : fx.problem.lower) starts.push_back(l.y0);
  const LowerState serial = solve_all_lower(fx.problem, fx.theta0, starts, {}, false, true);
  const LowerState parallel = solve_all_lower(fx.problem, fx.theta0, starts, {}, true, true);
  EXPECT_EQ(serial.y, parallel.y);
  EXPECT_EQ(serial.dy_dx, parallel.dy_dx);
}

TEST(DescendProperty, SoftmaxObjectiveNonIncreasing) {
  const examples::BilevelSoftmaxFixture fx = examples::bilevel_softmax_fixture(3, 2, 2);
  DescendOptions opts;
  opts.max_iters = 60;
  const BilevelTrace trace = descend(fx.problem, fx.theta0, opts);
  for (std::size_t k = 1; k < trace.iterations.size(); ++k) {
    EXPECT_LE(trace.iterations[k].objective, trace.iterations[k - 1].objective);
  }
  EXPECT_LT(trace.iterations.back().objective, trace.iterations.front().objective);
}

TEST(StopReasonNames, Distinct) {
  EXPECT_NE(to_string(StopReason::kStalled), to_string(StopReason::kMaxIters));
  EXPECT_NE(to_string(StopReason::kObjectiveTolerance), to_string(StopReason::kMaxIters));
}

}  // namespace
}  // namespace diffopt
