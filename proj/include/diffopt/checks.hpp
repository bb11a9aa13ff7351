#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "diffopt/bilevel.hpp"
#include "diffopt/findiff.hpp"

namespace diffopt::checks {

/// Central differences of the lower solution map around (x, y_star). Every
/// perturbed solve is warm-started at y_star with a tightened tolerance so it
/// stays on the same branch.
Mat fd_solution_jacobian(const LowerProblem& lower, const Vec& x, const Vec& y_star,
                         double h = kFdStep);

/// Central differences of x -> f^U(x, y*(x)) with warm-started lower solves.
Vec fd_hypergradient(const BilevelProblem& prob, const Vec& x, const Vec& y_star,
                     double h = kFdStep);

struct QuadraticEqualityFixture {
  ObjectiveOracle oracle;  // 1/2 y^T Q y + y^T (B x + c), Q positive definite
  EqualityConstraint eq;
  Vec x;
};

QuadraticEqualityFixture random_quadratic_equality(std::uint64_t seed, Eigen::Index n = 5,
                                                   Eigen::Index m = 2, Eigen::Index p = 3);

struct CheckResult {
  std::string name;
  bool pass = false;
  double error = 0.0;
  double tolerance = 0.0;
};

enum class FaultInjection {
  kNone,
  kKktSign,  // flips the sign of the projection term in the KKT Jacobian
};

/// Every derivative cross-check the toolkit ships: implicit kernels against
/// finite differences, closed forms and each other.
std::vector<CheckResult> run_gradcheck_suite(std::uint64_t seed,
                                             FaultInjection fault = FaultInjection::kNone);

}  // namespace diffopt::checks
