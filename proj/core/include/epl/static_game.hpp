#pragma once

#include <cstdint>

#include "epl/game.hpp"
#include "epl/shocks.hpp"

namespace epl {

// Two-player static entry game with scalar theta and approximately uniform shocks:
// P^j = 1 - F_alpha(-theta P^{-j}), which is 1 + theta P^{-j} in the uniform region.
class StaticGame {
 public:
  explicit StaticGame(double alpha = 0.01, double theta_true = -2.0);

  double alpha() const { return alpha_; }
  double theta_true() const { return theta_true_; }
  const ShockSpec& shocks() const { return shocks_; }

  // Pr(a = 1) when the value of entering relative to staying out is v
  double prob(double v) const;
  // d prob / d v
  double density(double v) const;
  bool in_uniform_region(double v) const;

  // symmetric equilibrium P = 1 / (1 - theta)
  double symmetric_equilibrium(double theta) const;
  // v(theta) solving G(theta, v) = 0 in the uniform region
  Eigen::Vector2d equilibrium_values(double theta) const;
  // G(theta, v) = v - theta * (prob of rival entering)
  Eigen::Vector2d residual(double theta, const Eigen::Vector2d& v) const;
  Eigen::Matrix2d jacobian(double theta, const Eigen::Vector2d& v) const;

  // same game as a GameSpec: 1 state, beta = 0, basis a_{-j} for entry
  GameSpec game() const;

 private:
  double alpha_;
  double theta_true_;
  ShockSpec shocks_;
};

struct StaticSample {
  int n = 0;
  int entries[2] = {0, 0};  // number of observations with a^j = 1

  double freq(int j) const { return static_cast<double>(entries[j]) / n; }
};

StaticSample simulate_static(const StaticGame& g, double p1, double p2, int n, std::uint64_t seed,
                             std::uint64_t stream = 0);

struct StaticEstimate {
  double theta = 0.0;
  int iterations = 0;
  bool converged = false;
  double seconds = 0.0;
  int outside_uniform = 0;  // probes whose value fell outside the uniform region
  std::vector<double> path;  // theta-hat_k
};

struct StaticOptions {
  double tol = 1e-6;
  int max_iter = 20;
  double clip = 1e-3;
};

double static_loglik(const StaticGame& g, const StaticSample& s, const Eigen::Vector2d& v);
// starting values built from frequency estimates
double static_theta0(const StaticSample& s, double clip = 1e-3);

StaticEstimate static_epl(const StaticGame& g, const StaticSample& s, const StaticOptions& opts = {});
StaticEstimate static_npl(const StaticGame& g, const StaticSample& s, const StaticOptions& opts = {});
// nested fixed point: grid over [lo, hi] with step, then golden-section refinement
StaticEstimate static_mle(const StaticGame& g, const StaticSample& s, double lo = -10.0, double hi = -1.0,
                          double step = 1e-4);

}  // namespace epl
