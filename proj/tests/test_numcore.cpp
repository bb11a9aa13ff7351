#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "diffopt/numcore.hpp"

namespace diffopt {
namespace {

Mat random_matrix(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Mat m(r, c);
  for (Eigen::Index j = 0; j < c; ++j) {
    for (Eigen::Index i = 0; i < r; ++i) m(i, j) = normal(rng);
  }
  return m;
}

TEST(SymSolve, IdentityReturnsRightHandSide) {
  const Mat b = (Mat(2, 1) << 3, 4).finished();
  EXPECT_EQ(sym_solve(Mat::Identity(2, 2), b), b);
}

TEST(SymSolve, DiagonalSystem) {
  const Mat h = Vec((Vec(2) << 2, 4).finished()).asDiagonal();
  const Mat x = sym_solve(h, (Mat(2, 1) << 2, 4).finished());
  EXPECT_NEAR(x(0, 0), 1.0, 1e-15);
  EXPECT_NEAR(x(1, 0), 1.0, 1e-15);
}

TEST(SymSolve, TwoByTwoHandInverse) {
  const Mat h = (Mat(2, 2) << 2, 1, 1, 2).finished();
  const Mat x = sym_solve(h, (Mat(2, 1) << 1, 0).finished());
  EXPECT_NEAR(x(0, 0), 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(x(1, 0), -1.0 / 3.0, 1e-15);
}

TEST(SymSolve, SingularMatrixThrows) {
  const Mat h = (Mat(2, 2) << 1, 2, 2, 4).finished();
  try {
    sym_solve(h, Mat::Ones(2, 1));
    FAIL() << "expected an exception";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kSingularMatrix);
  }
  EXPECT_THROW(SymFactor(Mat::Zero(3, 3)), Error);
}

TEST(SymSolve, NonFiniteInputRejected) {
  Mat h = Mat::Identity(2, 2);
  h(0, 1) = std::nan("");
  EXPECT_THROW(sym_solve(h, Mat::Ones(2, 1)), Error);
}

TEST(SymSolve, IndefiniteMatricesAreSupported) {
  const Mat h = (Mat(2, 2) << 0, 1, 1, 0).finished();
  const Mat x = sym_solve(h, (Mat(2, 1) << 3, 5).finished());
  EXPECT_NEAR(x(0, 0), 5.0, 1e-15);
  EXPECT_NEAR(x(1, 0), 3.0, 1e-15);
}

TEST(SymSolveProperty, ResidualIsSmallForRandomSymmetricSystems) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 25; ++trial) {
    const Eigen::Index n = 2 + trial % 6;
    const Mat r = random_matrix(rng, n, n);
    const Mat h = r + r.transpose() + 0.5 * Mat::Identity(n, n);
    const Mat b = random_matrix(rng, n, 3);
    const SymFactor factor(h);
    const Mat x = factor.solve(b);
    EXPECT_LE(max_abs(h * x - b), 1e-9 * (1.0 + max_abs(x)));
    EXPECT_LE(max_abs(factor.reconstruct() - h), 1e-12 * max_abs(h) * n);
  }
}

TEST(Nullspace, SingleRowSumConstraint) {
  const Mat f = nullspace_basis((Mat(1, 2) << 1, 1).finished());
  ASSERT_EQ(f.cols(), 1);
  EXPECT_NEAR(f(0, 0), 1.0 / std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(f(1, 0), -1.0 / std::sqrt(2.0), 1e-15);
}

TEST(Nullspace, CanonicalComplement) {
  const Mat f = nullspace_basis((Mat(2, 3) << 1, 0, 0, 0, 1, 0).finished());
  ASSERT_EQ(f.cols(), 1);
  EXPECT_NEAR(std::abs(f(2, 0)), 1.0, 1e-15);
  EXPECT_NEAR(f(0, 0), 0.0, 1e-15);
  EXPECT_NEAR(f(1, 0), 0.0, 1e-15);
}

TEST(Nullspace, ScaledRow) {
  const Mat f = nullspace_basis((Mat(1, 2) << 2, 4).finished());
  EXPECT_NEAR(f(0, 0), 2.0 / std::sqrt(5.0), 1e-15);
  EXPECT_NEAR(f(1, 0), -1.0 / std::sqrt(5.0), 1e-15);
}

TEST(Nullspace, EmptyConstraintGivesIdentity) {
  EXPECT_EQ(nullspace_basis(Mat(0, 4)), Mat::Identity(4, 4));
}

TEST(Nullspace, ErrorCases) {
  try {
    nullspace_basis((Mat(2, 3) << 1, 2, 3, 2, 4, 6).finished());
    FAIL() << "expected RankDeficient";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kRankDeficient);
  }
  EXPECT_THROW(nullspace_basis(Mat::Identity(2, 2)), Error);
}

TEST(NullspaceProperty, OrthonormalBasisOfKernel) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::Index n = 3 + trial % 5;
    const Eigen::Index m = 1 + trial % (n - 1);
    const Mat a = random_matrix(rng, m, n);
    const Mat f = nullspace_basis(a);
    ASSERT_EQ(f.rows(), n);
    ASSERT_EQ(f.cols(), n - m);
    EXPECT_LE(max_abs(a * f), 1e-12 * n);
    EXPECT_LE(max_abs(f.transpose() * f - Mat::Identity(n - m, n - m)), 1e-12 * n);
  }
}

TEST(ParticularSolution, MinimumNormExamples) {
  const Vec y = particular_solution((Mat(1, 2) << 1, 1).finished(), Vec::Ones(1));
  EXPECT_NEAR(y(0), 0.5, 1e-15);
  EXPECT_NEAR(y(1), 0.5, 1e-15);

  const Vec z = particular_solution(Mat::Identity(2, 2), (Vec(2) << 3, 7).finished());
  EXPECT_NEAR(z(0), 3.0, 1e-14);
  EXPECT_NEAR(z(1), 7.0, 1e-14);

  const Vec w = particular_solution((Mat(1, 2) << 2, 0).finished(), Vec::Constant(1, 4.0));
  EXPECT_NEAR(w(0), 2.0, 1e-15);
  EXPECT_NEAR(w(1), 0.0, 1e-15);
}

TEST(ParticularSolutionProperty, FeasibleAndOrthogonalToKernel) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    const Mat a = random_matrix(rng, 2, 6);
    const Vec b = random_matrix(rng, 2, 1);
    const Vec y = particular_solution(a, b);
    EXPECT_LE(max_abs(a * y - b), 1e-12);
    EXPECT_LE(max_abs(nullspace_basis(a).transpose() * y), 1e-12);
  }
}

TEST(ErrorType, MessageCarriesCodeName) {
  const Error e(ErrorCode::kSingularHessian, "f_YY");
  EXPECT_EQ(e.code(), ErrorCode::kSingularHessian);
  EXPECT_NE(std::string(e.what()).find("SingularHessian"), std::string::npos);
}

}  // namespace
}  // namespace diffopt
