#pragma once

#include <Eigen/Dense>

#include "diffopt/error.hpp"

namespace diffopt {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

inline constexpr double kDefaultRankTol = 1e-10;
inline constexpr double kPivotTol = 1e-12;

// Throws kInvalidArgument when any entry is NaN or infinite.
void require_finite(const Eigen::Ref<const Mat>& m, const char* what);

void require_symmetric(const Mat& m, double tol, const char* what);

/// Cached factorization of a symmetric (possibly indefinite) matrix.
///
/// Built once and reused for any number of right-hand sides. Construction
/// fails with kSingularMatrix when a pivot falls below kPivotTol * max|H|.
class SymFactor {
 public:
  // Pivots at or below kPivotTol * max(max|H|, scale) count as singular.
  explicit SymFactor(const Mat& h, double scale = 0.0);

  Mat solve(const Mat& rhs) const;
  Vec solve(const Vec& rhs) const;

  // P^T L U, reassembled for consistency checks.
  Mat reconstruct() const;
  Eigen::Index size() const { return lu_.rows(); }

 private:
  Eigen::PartialPivLU<Mat> lu_;
};

/// Solves H X = B for symmetric nonsingular H with one factorization.
Mat sym_solve(const Mat& h, const Mat& b);

/// Orthonormal basis F (n x (n - m)) for the null space of A (m x n).
///
/// Rank is decided by singular values above rank_tol * sigma_max. Columns
/// are sign-normalized so the first entry with magnitude above 1e-12 is
/// positive.
Mat nullspace_basis(const Mat& a, double rank_tol = kDefaultRankTol);

/// Minimum-norm y0 with A y0 = b, i.e. A^T (A A^T)^{-1} b.
Vec particular_solution(const Mat& a, const Vec& b, double rank_tol = kDefaultRankTol);

double max_abs(const Eigen::Ref<const Mat>& m);

}  // namespace diffopt
