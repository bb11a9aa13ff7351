#include <gtest/gtest.h>

#include "diffopt/checks.hpp"

namespace diffopt::checks {
namespace {

TEST(GradcheckSuite, AllChecksPassForSeveralSeeds) {
  for (std::uint64_t seed : {0u, 1u, 7u}) {
    for (const CheckResult& r : run_gradcheck_suite(seed)) {
      EXPECT_TRUE(r.pass) << "seed " << seed << ": " << r.name << " error " << r.error;
    }
  }
}

TEST(GradcheckSuite, KktSignMutationIsCaught) {
  bool any_failed = false;
  for (const CheckResult& r : run_gradcheck_suite(0, FaultInjection::kKktSign)) {
    any_failed = any_failed || !r.pass;
  }
  EXPECT_TRUE(any_failed);
}

TEST(QuadraticFixture, ShapesAndDeterminism) {
  const QuadraticEqualityFixture a = random_quadratic_equality(3);
  const QuadraticEqualityFixture b = random_quadratic_equality(3);
  EXPECT_EQ(a.eq.a.rows(), 2);
  EXPECT_EQ(a.eq.a.cols(), 5);
  EXPECT_EQ(a.x.size(), 3);
  EXPECT_EQ(a.eq.a, b.eq.a);
  EXPECT_EQ(a.x, b.x);
  const Mat q = a.oracle.hess_yy(a.x, Vec::Zero(5));
  EXPECT_GT(Eigen::SelfAdjointEigenSolver<Mat>(q).eigenvalues().minCoeff(), 0.0);
}

}  // namespace
}  // namespace diffopt::checks
