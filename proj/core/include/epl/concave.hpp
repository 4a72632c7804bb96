#pragma once

#include "epl/equilibrium.hpp"

namespace epl {

struct ConcaveOptions {
  int max_iter = 200;
  double step_tol = 1e-13;  // relative Newton step size at which to stop
  double armijo = 1e-4;
  int max_halvings = 60;
};

struct ConcaveResult {
  ThetaVec theta;
  double value = 0.0;
  Vec gradient;
  Mat hessian;
  int iterations = 0;
  bool converged = false;
};

// Q(theta) = sum_{j,x,a} n_{jxa} ln Lambda_a(v_{jx}(theta)) with v = M theta + m.
class PseudoLikelihood {
 public:
  PseudoLikelihood(const GameSpec& game, const LinearValues& model, const Vec& counts);

  double value(const ThetaVec& theta) const;
  // value, gradient and Hessian in one pass
  double evaluate(const ThetaVec& theta, Vec& grad, Mat& hess) const;
  ConcaveResult maximize(const ThetaVec& start, const ConcaveOptions& opts = {}) const;

 private:
  struct Row {
    Eigen::Index offset;  // first stacked index of the (j, x) block
  };
  const GameSpec& game_;
  const LinearValues& model_;
  const Vec& counts_;
  std::vector<Row> rows_;
};

// Q evaluated at an arbitrary stacked value vector
double loglik_at_values(const GameSpec& game, const Vec& v, const Vec& counts);

}  // namespace epl
