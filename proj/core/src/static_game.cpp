#include "epl/static_game.hpp"

#include <chrono>
#include <cmath>
#include <functional>

#include "epl/rng.hpp"

namespace epl {

namespace {

using Clock = std::chrono::steady_clock;

struct ScalarDerivs {
  double q, d1, d2;
};

// n1 ln Lambda_1(v) + n0 ln Lambda_0(v) with derivatives in v
ScalarDerivs cell(const ShockSpec& sh, double v, double n1, double n0) {
  const double row[2] = {0.0, v};
  const LogProb l1 = sh.log_prob(row, 1);
  const LogProb l0 = sh.log_prob(row, 0);
  return {n1 * l1.value + n0 * l0.value, n1 * l1.grad[1] + n0 * l0.grad[1], n1 * l1.hess(1, 1) + n0 * l0.hess(1, 1)};
}

// maximizes sum_j cell(c_j + d_j theta) over scalar theta by safeguarded Newton
double maximize_affine(const StaticGame& g, const StaticSample& s, const Eigen::Vector2d& c, const Eigen::Vector2d& d,
                       double theta) {
  auto eval = [&](double th) {
    ScalarDerivs tot{0, 0, 0};
    for (int j = 0; j < 2; ++j) {
      const auto r = cell(g.shocks(), c[j] + d[j] * th, s.entries[j], s.n - s.entries[j]);
      tot.q += r.q;
      tot.d1 += d[j] * r.d1;
      tot.d2 += d[j] * d[j] * r.d2;
    }
    return tot;
  };
  ScalarDerivs cur = eval(theta);
  for (int it = 0; it < 200; ++it) {
    double step = cur.d2 < 0 ? -cur.d1 / cur.d2 : (cur.d1 > 0 ? 1.0 : -1.0) * 0.1;
    if (std::abs(step) < 1e-14 * (1.0 + std::abs(theta))) break;
    const bool pure = cur.d2 < 0 && std::abs(step) < 1e-6;
    double t = 1.0;
    bool moved = false;
    for (int h = 0; h < 60; ++h, t *= 0.5) {
      const ScalarDerivs trial = eval(theta + t * step);
      if (std::isfinite(trial.q) && (pure || trial.q >= cur.q)) {
        theta += t * step;
        cur = trial;
        moved = true;
        break;
      }
    }
    if (!moved) break;
  }
  return theta;
}

}  // namespace

StaticGame::StaticGame(double alpha, double theta_true)
    : alpha_(alpha), theta_true_(theta_true), shocks_(ShockSpec::approx_uniform(alpha)) {}

double StaticGame::prob(double v) const {
  const double row[2] = {0.0, v};
  double p[2];
  shocks_.choice_probs(row, p);
  return p[1];
}

double StaticGame::density(double v) const {
  const double row[2] = {0.0, v};
  Mat jac(2, 2);
  shocks_.choice_prob_jacobian(row, jac);
  return jac(1, 1);
}

bool StaticGame::in_uniform_region(double v) const { return -v >= alpha_ && -v < 1.0 - alpha_; }

double StaticGame::symmetric_equilibrium(double theta) const { return 1.0 / (1.0 - theta); }

Eigen::Vector2d StaticGame::equilibrium_values(double theta) const {
  if (std::abs(1.0 - theta * theta) < 1e-12) throw NumericalError("I - theta A is singular at theta = +-1");
  Eigen::Matrix2d m;
  m << 1.0, -theta, -theta, 1.0;
  return m.partialPivLu().solve(Eigen::Vector2d::Constant(theta));
}

Eigen::Vector2d StaticGame::residual(double theta, const Eigen::Vector2d& v) const {
  return v - theta * Eigen::Vector2d(prob(v[1]), prob(v[0]));
}

Eigen::Matrix2d StaticGame::jacobian(double theta, const Eigen::Vector2d& v) const {
  Eigen::Matrix2d m;
  m << 1.0, -theta * density(v[1]), -theta * density(v[0]), 1.0;
  return m;
}

GameSpec StaticGame::game() const {
  // joint index c = a1 + 2 a2; only entry rows carry the rival's action
  std::vector<double> basis(2 * 1 * 4, 0.0);
  for (int j = 0; j < 2; ++j)
    for (int c = 0; c < 4; ++c) {
      const int own = j == 0 ? (c & 1) : (c >> 1);
      const int rival = j == 0 ? (c >> 1) : (c & 1);
      basis[j * 4 + c] = own == 1 ? rival : 0.0;
    }
  std::vector<Transition> tr;
  for (int c = 0; c < 4; ++c) tr.push_back({0, c, 0, 1.0});
  return GameSpec(GameDims{2, 2, 1, 1}, 0.0, shocks_, std::move(basis), {}, tr, {"theta"});
}

StaticSample simulate_static(const StaticGame&, double p1, double p2, int n, std::uint64_t seed, std::uint64_t stream) {
  if (n < 1) throw DimensionError("sample size must be positive");
  Rng rng(seed, stream);
  StaticSample s;
  s.n = n;
  for (int i = 0; i < n; ++i) {
    s.entries[0] += rng.uniform() < p1;
    s.entries[1] += rng.uniform() < p2;
  }
  return s;
}

double static_loglik(const StaticGame& g, const StaticSample& s, const Eigen::Vector2d& v) {
  double q = 0.0;
  for (int j = 0; j < 2; ++j) q += cell(g.shocks(), v[j], s.entries[j], s.n - s.entries[j]).q;
  return q;
}

double static_theta0(const StaticSample& s, double clip) {
  const double p1 = std::clamp(s.freq(0), clip, 1.0 - clip);
  const double p2 = std::clamp(s.freq(1), clip, 1.0 - clip);
  return ((p1 - 1.0) / p2 + (p2 - 1.0) / p1) / 2.0;
}

StaticEstimate static_epl(const StaticGame& g, const StaticSample& s, const StaticOptions& opts) {
  const auto t0 = Clock::now();
  StaticEstimate out;
  const double p1 = std::clamp(s.freq(0), opts.clip, 1.0 - opts.clip);
  const double p2 = std::clamp(s.freq(1), opts.clip, 1.0 - opts.clip);
  double theta = static_theta0(s, opts.clip);
  Eigen::Vector2d v(theta * p2, theta * p1);
  for (int k = 1; k <= opts.max_iter; ++k) {
    for (int j = 0; j < 2; ++j) out.outside_uniform += !g.in_uniform_region(v[j]);
    // G(theta, v) = H theta + z with H = -(rival entry probs), z = v
    const Eigen::Matrix2d J = g.jacobian(theta, v);
    const Eigen::Vector2d H(-g.prob(v[1]), -g.prob(v[0]));
    const auto lu = J.partialPivLu();
    const Eigen::Vector2d c = v - lu.solve(v);
    const Eigen::Vector2d d = -lu.solve(H);
    const double next = maximize_affine(g, s, c, d, theta);
    v = c + d * next;
    const double step = std::abs(next - theta);
    theta = next;
    out.path.push_back(theta);
    out.iterations = k;
    if (step < opts.tol) {
      out.converged = true;
      break;
    }
  }
  out.theta = theta;
  out.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
  return out;
}

StaticEstimate static_npl(const StaticGame& g, const StaticSample& s, const StaticOptions& opts) {
  const auto t0 = Clock::now();
  StaticEstimate out;
  Eigen::Vector2d P(std::clamp(s.freq(0), opts.clip, 1.0 - opts.clip), std::clamp(s.freq(1), opts.clip, 1.0 - opts.clip));
  double theta = static_theta0(s, opts.clip);
  for (int k = 1; k <= opts.max_iter; ++k) {
    // v^j = theta P^{-j}
    const Eigen::Vector2d d(P[1], P[0]);
    const double next = maximize_affine(g, s, Eigen::Vector2d::Zero(), d, theta);
    const Eigen::Vector2d v = d * next;
    for (int j = 0; j < 2; ++j) out.outside_uniform += !g.in_uniform_region(v[j]);
    P = Eigen::Vector2d(g.prob(v[0]), g.prob(v[1]));
    const double step = std::abs(next - theta);
    theta = next;
    out.path.push_back(theta);
    out.iterations = k;
    if (k >= 2 && step < opts.tol) {
      out.converged = true;
      break;
    }
  }
  out.theta = theta;
  out.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
  return out;
}

StaticEstimate static_mle(const StaticGame& g, const StaticSample& s, double lo, double hi, double step) {
  const auto t0 = Clock::now();
  auto q = [&](double th) {
    try {
      return static_loglik(g, s, g.equilibrium_values(th));
    } catch (const NumericalError&) {
      return -std::numeric_limits<double>::infinity();
    }
  };
  const long n = std::lround((hi - lo) / step);
  double best_th = lo, best_q = -std::numeric_limits<double>::infinity();
  for (long i = 0; i <= n; ++i) {
    const double th = lo + static_cast<double>(i) * step;
    const double v = q(th);
    if (v > best_q) {
      best_q = v;
      best_th = th;
    }
  }
  // golden-section refinement on the bracketing cell
  double a = std::max(lo, best_th - step), b = std::min(hi, best_th + step);
  const double r = (std::sqrt(5.0) - 1.0) / 2.0;
  double x1 = b - r * (b - a), x2 = a + r * (b - a);
  double f1 = q(x1), f2 = q(x2);
  while (b - a > 1e-12) {
    if (f1 < f2) {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + r * (b - a);
      f2 = q(x2);
    } else {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - r * (b - a);
      f1 = q(x1);
    }
  }
  StaticEstimate out;
  out.theta = 0.5 * (a + b);
  if (q(best_th) > q(out.theta)) out.theta = best_th;
  out.converged = true;
  out.iterations = 1;
  out.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
  return out;
}

}  // namespace epl
