#pragma once

#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <memory>

#include "epl/types.hpp"

namespace epl {

enum class SolverPolicy { Auto, Dense, Sparse };

// Auto goes sparse below this nonzero share (and above a minimum size)
inline constexpr double kSparseDensity = 0.10;
inline constexpr Eigen::Index kSparseMinSize = 256;

// One LU factorization reused for many right-hand sides.
class Factorization {
 public:
  Factorization(const Eigen::SparseMatrix<double>& m, SolverPolicy policy = SolverPolicy::Auto);
  explicit Factorization(const Mat& m);

  Mat solve(const Mat& rhs) const;
  Vec solve(const Vec& rhs) const;
  bool sparse() const { return sparse_ != nullptr; }
  // reciprocal condition estimate in the 1-norm; NaN on the sparse path
  double rcond() const { return rcond_; }
  Eigen::Index size() const { return n_; }

 private:
  Eigen::Index n_ = 0;
  std::unique_ptr<Eigen::PartialPivLU<Mat>> dense_;
  std::unique_ptr<Eigen::SparseLU<Eigen::SparseMatrix<double>>> sparse_;
  double rcond_ = 0.0;
};

double nonzero_share(const Eigen::SparseMatrix<double>& m);

}  // namespace epl
