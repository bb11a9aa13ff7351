#include "diffopt/numcore.hpp"

#include <algorithm>
#include <string>

namespace diffopt {

void require_finite(const Eigen::Ref<const Mat>& m, const char* what) {
  if (!m.allFinite()) {
    throw Error(ErrorCode::kInvalidArgument, std::string(what) + " has non-finite entries");
  }
}

void require_symmetric(const Mat& m, double tol, const char* what) {
  if (m.rows() != m.cols()) {
    throw Error(ErrorCode::kDimensionMismatch, std::string(what) + " is not square");
  }
  const double scale = std::max(1.0, max_abs(m));
  if (max_abs(m - m.transpose()) > tol * scale) {
    throw Error(ErrorCode::kInvalidArgument, std::string(what) + " is not symmetric");
  }
}

double max_abs(const Eigen::Ref<const Mat>& m) {
  return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

SymFactor::SymFactor(const Mat& h, double scale) {
  if (h.rows() != h.cols() || h.rows() == 0) {
    throw Error(ErrorCode::kDimensionMismatch, "SymFactor needs a non-empty square matrix");
  }
  require_finite(h, "H");
  lu_.compute(h);
  const double threshold = kPivotTol * std::max(max_abs(h), scale);
  const Mat& packed = lu_.matrixLU();
  for (Eigen::Index i = 0; i < packed.rows(); ++i) {
    if (!(std::abs(packed(i, i)) > threshold)) {
      throw Error(ErrorCode::kSingularMatrix,
                  "pivot " + std::to_string(i) + " below threshold");
    }
  }
}

Mat SymFactor::solve(const Mat& rhs) const {
  if (rhs.rows() != size()) {
    throw Error(ErrorCode::kDimensionMismatch, "right-hand side row count");
  }
  return lu_.solve(rhs);
}

Vec SymFactor::solve(const Vec& rhs) const {
  if (rhs.size() != size()) {
    throw Error(ErrorCode::kDimensionMismatch, "right-hand side length");
  }
  return lu_.solve(rhs);
}

Mat SymFactor::reconstruct() const { return lu_.reconstructedMatrix(); }

Mat sym_solve(const Mat& h, const Mat& b) { return SymFactor(h).solve(b); }

namespace {

struct RankedSvd {
  Eigen::JacobiSVD<Mat> svd;
  Eigen::Index rank;
};

RankedSvd ranked_svd(const Mat& a, double rank_tol, unsigned options) {
  RankedSvd out{Eigen::JacobiSVD<Mat>(a, options), 0};
  const Vec& sv = out.svd.singularValues();
  const double cutoff = sv.size() > 0 ? rank_tol * sv(0) : 0.0;
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    if (sv(i) > cutoff && sv(i) > 0.0) ++out.rank;
  }
  return out;
}

}  // namespace

Mat nullspace_basis(const Mat& a, double rank_tol) {
  const Eigen::Index n = a.cols();
  const Eigen::Index m = a.rows();
  if (m == 0) return Mat::Identity(n, n);
  if (m >= n) {
    throw Error(ErrorCode::kInvalidArgument, "nullspace_basis needs fewer rows than columns");
  }
  require_finite(a, "A");
  const RankedSvd r = ranked_svd(a, rank_tol, Eigen::ComputeFullV);
  if (r.rank < m) {
    throw Error(ErrorCode::kRankDeficient,
                "rank " + std::to_string(r.rank) + " < " + std::to_string(m));
  }
  Mat f = r.svd.matrixV().rightCols(n - r.rank);
  for (Eigen::Index j = 0; j < f.cols(); ++j) {
    for (Eigen::Index i = 0; i < n; ++i) {
      if (std::abs(f(i, j)) > 1e-12) {
        if (f(i, j) < 0.0) f.col(j) *= -1.0;
        break;
      }
    }
  }
  return f;
}

Vec particular_solution(const Mat& a, const Vec& b, double rank_tol) {
  if (a.rows() != b.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "A rows vs b length");
  }
  if (a.rows() == 0) return Vec::Zero(a.cols());
  require_finite(a, "A");
  require_finite(b, "b");
  const RankedSvd r = ranked_svd(a, rank_tol, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (r.rank < a.rows()) {
    throw Error(ErrorCode::kRankDeficient,
                "rank " + std::to_string(r.rank) + " < " + std::to_string(a.rows()));
  }
  // Full row rank: the SVD pseudo-inverse gives the minimum-norm solution.
  const auto& svd = r.svd;
  Vec coeffs = svd.matrixU().transpose() * b;
  coeffs.array() /= svd.singularValues().array();
  return svd.matrixV() * coeffs;
}

}  // namespace diffopt
