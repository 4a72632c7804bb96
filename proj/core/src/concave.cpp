#include "epl/concave.hpp"

#include <cmath>

namespace epl {

PseudoLikelihood::PseudoLikelihood(const GameSpec& game, const LinearValues& model, const Vec& counts)
    : game_(game), model_(model), counts_(counts) {
  const int A = game.num_actions();
  if (model.M.rows() != game.stacked_size() || model.m.size() != game.stacked_size() ||
      counts.size() != game.stacked_size())
    throw DimensionError("pseudo-likelihood inputs do not match the game");
  for (Eigen::Index r = 0; r < counts.size(); r += A)
    if (counts.segment(r, A).sum() > 0.0) rows_.push_back({r});
}

double PseudoLikelihood::value(const ThetaVec& theta) const {
  const int A = game_.num_actions();
  Vec v(A);
  double q = 0.0;
  for (const auto& row : rows_) {
    v = model_.M.middleRows(row.offset, A) * theta + model_.m.segment(row.offset, A);
    if (!v.allFinite()) return -std::numeric_limits<double>::infinity();
    for (int a = 0; a < A; ++a) {
      const double n = counts_[row.offset + a];
      if (n > 0.0) q += n * game_.shocks().log_prob_value(std::span<const double>(v.data(), A), a);
    }
  }
  return q;
}

double PseudoLikelihood::evaluate(const ThetaVec& theta, Vec& grad, Mat& hess) const {
  const int A = game_.num_actions();
  const Eigen::Index K = theta.size();
  grad = Vec::Zero(K);
  hess = Mat::Zero(K, K);
  Vec v(A), gv(A);
  Mat hv(A, A);
  double q = 0.0;
  for (const auto& row : rows_) {
    const auto Mb = model_.M.middleRows(row.offset, A);
    v = Mb * theta + model_.m.segment(row.offset, A);
    gv.setZero();
    hv.setZero();
    for (int a = 0; a < A; ++a) {
      const double n = counts_[row.offset + a];
      if (n <= 0.0) continue;
      const LogProb lp = game_.shocks().log_prob(std::span<const double>(v.data(), A), a);
      q += n * lp.value;
      gv += n * lp.grad;
      hv += n * lp.hess;
    }
    grad.noalias() += Mb.transpose() * gv;
    hess.noalias() += Mb.transpose() * hv * Mb;
  }
  return q;
}

ConcaveResult PseudoLikelihood::maximize(const ThetaVec& start, const ConcaveOptions& opts) const {
  if (start.size() != model_.M.cols()) throw DimensionError("start has wrong length");
  ConcaveResult res;
  res.theta = start;
  if (!res.theta.allFinite()) throw NumericalError("non-finite starting value for the pseudo-likelihood");
  res.value = evaluate(res.theta, res.gradient, res.hessian);
  if (!std::isfinite(res.value)) throw NumericalError("pseudo-likelihood not finite at the starting value");
  const Eigen::Index K = start.size();
  double prev_step = std::numeric_limits<double>::infinity();
  for (int it = 1; it <= opts.max_iter; ++it) {
    res.iterations = it;
    // Newton direction on -H, ridged if the curvature is not positive definite
    Mat negH = -res.hessian;
    Vec dir;
    double ridge = 0.0;
    const double scale = std::max(1.0, negH.diagonal().cwiseAbs().maxCoeff());
    for (int attempt = 0; attempt < 30; ++attempt) {
      Eigen::LLT<Mat> llt(negH + ridge * Mat::Identity(K, K));
      if (llt.info() == Eigen::Success) {
        dir = llt.solve(res.gradient);
        if (dir.allFinite()) break;
      }
      ridge = ridge == 0.0 ? 1e-10 * scale : ridge * 10.0;
      dir.resize(0);
    }
    if (dir.size() == 0) dir = res.gradient / scale;
    const double slope = res.gradient.dot(dir);
    const double step = dir.lpNorm<Eigen::Infinity>();
    const double tscale = 1.0 + res.theta.lpNorm<Eigen::Infinity>();
    // stalled pure-Newton steps at rounding level also count as converged
    const bool stalled = step < 1e-9 * tscale && step >= 0.5 * prev_step;
    prev_step = step;
    if (slope <= 0.0 || step <= opts.step_tol * tscale || stalled) {
      res.converged = true;
      return res;
    }
    double t = 1.0;
    bool moved = false;
    if (step <= 1e-5 * tscale && ridge == 0.0) {
      // inside the quadratic region the value change drowns in rounding; take the pure Newton step
      res.theta += dir;
      moved = true;
    }
    for (int h = 0; !moved && h <= opts.max_halvings; ++h, t *= 0.5) {
      const ThetaVec trial = res.theta + t * dir;
      const double q = value(trial);
      if (std::isfinite(q) && q >= res.value + opts.armijo * t * slope) {
        res.theta = trial;
        moved = true;
        break;
      }
    }
    if (!moved) {
      // no ascent possible at machine precision: we are at the maximum
      res.converged = true;
      return res;
    }
    res.value = evaluate(res.theta, res.gradient, res.hessian);
  }
  return res;
}

double loglik_at_values(const GameSpec& game, const Vec& v, const Vec& counts) {
  const int A = game.num_actions();
  double q = 0.0;
  for (Eigen::Index r = 0; r < counts.size(); r += A)
    for (int a = 0; a < A; ++a)
      if (counts[r + a] > 0.0) q += counts[r + a] * game.shocks().log_prob_value(std::span<const double>(v.data() + r, A), a);
  return q;
}

}  // namespace epl
