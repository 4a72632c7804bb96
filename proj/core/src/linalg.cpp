#include "epl/linalg.hpp"

#include <cmath>
#include <limits>

namespace epl {

double nonzero_share(const Eigen::SparseMatrix<double>& m) {
  const double cells = static_cast<double>(m.rows()) * static_cast<double>(m.cols());
  return cells > 0 ? static_cast<double>(m.nonZeros()) / cells : 0.0;
}

Factorization::Factorization(const Eigen::SparseMatrix<double>& m, SolverPolicy policy) : n_(m.rows()) {
  if (m.rows() != m.cols()) throw DimensionError("factorization needs a square matrix");
  bool use_sparse = policy == SolverPolicy::Sparse;
  if (policy == SolverPolicy::Auto) use_sparse = n_ >= kSparseMinSize && nonzero_share(m) < kSparseDensity;
  if (use_sparse) {
    sparse_ = std::make_unique<Eigen::SparseLU<Eigen::SparseMatrix<double>>>();
    Eigen::SparseMatrix<double> c = m;
    c.makeCompressed();
    sparse_->compute(c);
    if (sparse_->info() != Eigen::Success) throw NumericalError("sparse LU failed: matrix is singular");
    rcond_ = std::numeric_limits<double>::quiet_NaN();
    return;
  }
  dense_ = std::make_unique<Eigen::PartialPivLU<Mat>>(Mat(m));
  rcond_ = dense_->rcond();
}

Factorization::Factorization(const Mat& m) : n_(m.rows()) {
  if (m.rows() != m.cols()) throw DimensionError("factorization needs a square matrix");
  dense_ = std::make_unique<Eigen::PartialPivLU<Mat>>(m);
  rcond_ = dense_->rcond();
}

Mat Factorization::solve(const Mat& rhs) const {
  if (rhs.rows() != n_) throw DimensionError("right-hand side has wrong row count");
  Mat out = dense_ ? Mat(dense_->solve(rhs)) : Mat(sparse_->solve(rhs));
  if (!out.allFinite()) throw NumericalError("linear solve produced non-finite values (singular system)");
  return out;
}

Vec Factorization::solve(const Vec& rhs) const {
  if (rhs.size() != n_) throw DimensionError("right-hand side has wrong length");
  Vec out = dense_ ? Vec(dense_->solve(rhs)) : Vec(sparse_->solve(rhs));
  if (!out.allFinite()) throw NumericalError("linear solve produced non-finite values (singular system)");
  return out;
}

}  // namespace epl
