#include "epl/estimation.hpp"

#include <chrono>
#include <cmath>
#include <map>

#include "epl/rng.hpp"

namespace epl {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

ValueProfile as_values(const GameSpec& game, Vec v) {
  return ValueProfile(game.num_players(), game.num_states(), game.num_actions(), std::move(v));
}

// applies the stop rule after a record was appended; returns true when the sequence should end
bool finished(const StopRule& rule, EstimationTrace& tr) {
  const auto& r = tr.records.back();
  if (rule.fixed_k) {
    if (r.k >= *rule.fixed_k) {
      tr.converged = true;
      return true;
    }
    return false;
  }
  const bool ok = r.step_norm < rule.theta_tol && (!rule.ccp_tol || r.ccp_change < *rule.ccp_tol);
  if (ok) {
    tr.converged = true;
    return true;
  }
  return r.k >= rule.max_iter;
}

double sup_diff(const Vec& a, const Vec& b) { return (a - b).lpNorm<Eigen::Infinity>(); }

// Newton with central-difference derivatives for the few-parameter exact-Newton variant
// maximizes Q(f(theta)) for a smooth map f by relinearizing f and solving the concave problem each round.
// at the limit the linear model's score equals the true score.
ThetaVec maximize_relinearized(const GameSpec& game, const Vec& counts, const std::function<Vec(const ThetaVec&)>& f,
                               ThetaVec theta, int& rounds, int max_iter = 100) {
  const Eigen::Index K = theta.size();
  Vec fv = f(theta);
  double q = loglik_at_values(game, fv, counts);
  if (!std::isfinite(q)) throw NumericalError("objective not finite at the starting value");
  for (rounds = 1; rounds <= max_iter; ++rounds) {
    const double h = 1e-6;
    LinearValues lin{Mat(fv.size(), K), Vec()};
    for (Eigen::Index i = 0; i < K; ++i) {
      ThetaVec tp = theta, tm = theta;
      tp[i] += h;
      tm[i] -= h;
      lin.M.col(i) = (f(tp) - f(tm)) / (2 * h);
    }
    lin.m = fv - lin.M * theta;
    const PseudoLikelihood pl(game, lin, counts);
    const ConcaveResult r = pl.maximize(theta);
    const ThetaVec dir = r.theta - theta;
    if (dir.lpNorm<Eigen::Infinity>() < 1e-12 * (1.0 + theta.lpNorm<Eigen::Infinity>())) break;
    double t = 1.0;
    bool moved = false;
    for (int k = 0; k < 50; ++k, t *= 0.5) {
      const ThetaVec trial = theta + t * dir;
      Vec ft;
      try {
        ft = f(trial);
      } catch (const Error&) {
        continue;
      }
      const double qt = loglik_at_values(game, ft, counts);
      if (std::isfinite(qt) && qt >= q - 1e-12 * std::abs(q)) {
        theta = trial;
        fv = std::move(ft);
        q = qt;
        moved = true;
        break;
      }
    }
    if (!moved) break;
  }
  return theta;
}

}  // namespace

const IterationRecord& EstimationTrace::last() const {
  if (records.empty()) throw NumericalError(method + ": no completed iterations" + (failure.empty() ? "" : " (" + failure + ")"));
  return records.back();
}

double EstimationTrace::total_seconds() const {
  double s = 0.0;
  for (const auto& r : records) s += r.seconds;
  return s;
}

NplStep npl_pseudo_mle(const GameSpec& game, const Vec& counts, const CcpProfile& P_prev,
                       const std::optional<ThetaVec>& start) {
  const LinearValues lin = npl_values_linear(game, P_prev);
  const PseudoLikelihood pl(game, lin, counts);
  const ConcaveResult r = pl.maximize(start.value_or(ThetaVec::Zero(game.num_params())));
  if (!r.converged) throw NumericalError("NPL pseudo-likelihood maximization did not converge");
  NplStep out;
  out.theta = r.theta;
  out.v = as_values(game, lin.at(r.theta));
  out.P = choice_probs(game, out.v);
  out.loglik = r.value;
  out.inner_iterations = r.iterations;
  return out;
}

NplStep npl_pseudo_mle(const GameSpec& game, const Dataset& data, const CcpProfile& P_prev) {
  return npl_pseudo_mle(game, cell_counts(game, data), P_prev);
}

EstimationTrace k_npl(const GameSpec& game, const Dataset& data, const CcpProfile& P0, const StopRule& rule) {
  EstimationTrace tr;
  tr.method = "npl";
  const Vec counts = cell_counts(game, data);
  CcpProfile P = P0;
  std::optional<ThetaVec> prev;
  for (int k = 1; k <= rule.max_iter; ++k) {
    const auto t0 = Clock::now();
    NplStep s;
    try {
      s = npl_pseudo_mle(game, counts, P, prev);
    } catch (const Error& e) {
      tr.failure = "iteration " + std::to_string(k) + ": " + e.what();
      return tr;
    }
    IterationRecord r;
    r.k = k;
    r.theta = s.theta;
    r.aux = s.P.flat();
    r.ccp = s.P.flat();
    r.loglik = s.loglik;
    r.step_norm = prev ? sup_diff(s.theta, *prev) : std::numeric_limits<double>::infinity();
    r.ccp_change = sup_diff(s.P.flat(), P.flat());
    r.inner_iterations = s.inner_iterations;
    r.seconds = seconds_since(t0);
    tr.records.push_back(std::move(r));
    prev = s.theta;
    P = std::move(s.P);
    if (finished(rule, tr)) break;
  }
  return tr;
}

CompoundParam initial_gamma(const GameSpec& game, const Dataset& data, const CcpProfile& P_hat) {
  const NplStep s = npl_pseudo_mle(game, data, P_hat);
  return CompoundParam{s.theta, s.v};
}

namespace {

EplSystem finish_system(const GameSpec& game, const CompoundParam& gamma, const Factorization& lu) {
  const ValueProfile& v = gamma.v();
  const GDecomposition g = g_decompose(game, v);
  Mat rhs(g.H.rows(), g.H.cols() + 1);
  rhs << g.H, g.z;
  const Mat sol = lu.solve(rhs);
  EplSystem sys;
  sys.A = -sol.leftCols(g.H.cols());
  sys.b = v.flat() - sol.col(g.H.cols());
  sys.source = gamma;
  sys.rcond = lu.rcond();
  sys.sparse = lu.sparse();
  return sys;
}

bool ill_conditioned(const Factorization& lu) { return !lu.sparse() && !(lu.rcond() > 1e-12); }

}  // namespace

EplSystem build_epl_system(const GameSpec& game, const CompoundParam& gamma_prev, SolverPolicy policy) {
  if (!gamma_prev.is_value_form()) throw DimensionError("EPL system needs a value-form auxiliary parameter");
  auto attempt = [&](const CompoundParam& g) -> std::optional<EplSystem> {
    try {
      const Factorization lu(g_jacobian_v(game, g.theta, g.v()), policy);
      if (ill_conditioned(lu)) return std::nullopt;
      return finish_system(game, g, lu);
    } catch (const NumericalError&) {
      return std::nullopt;
    }
  };
  if (auto s = attempt(gamma_prev)) return *s;
  // one retry at a slightly perturbed v
  CompoundParam jit = gamma_prev;
  Vec& v = std::get<ValueProfile>(jit.aux).flat();
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] += (i % 2 == 0 ? 1e-8 : -1e-8);
  if (auto s = attempt(jit)) {
    s->source = gamma_prev;
    s->jittered = true;
    return *s;
  }
  const Factorization lu(g_jacobian_v(game, gamma_prev.theta, gamma_prev.v()), SolverPolicy::Dense);
  throw NumericalError("Jacobian of G is singular or ill-conditioned (rcond " + std::to_string(lu.rcond()) + ")");
}

EplSystem build_epl_system_z(const GameSpec& game, const CompoundParam& gamma_prev, const Mat& Z) {
  if (Z.rows() != game.stacked_size() || Z.cols() != game.stacked_size()) throw DimensionError("Z has wrong shape");
  const Factorization lu(Z);
  if (ill_conditioned(lu)) throw NumericalError("Z is singular or ill-conditioned (rcond " + std::to_string(lu.rcond()) + ")");
  return finish_system(game, gamma_prev, lu);
}

EplStep epl_pseudo_mle(const GameSpec& game, const Vec& counts, const EplSystem& system,
                       const std::optional<ThetaVec>& start) {
  const LinearValues lin = system.as_linear();
  const PseudoLikelihood pl(game, lin, counts);
  const ConcaveResult r = pl.maximize(start.value_or(system.source.theta));
  if (!r.converged) throw NumericalError("EPL pseudo-likelihood maximization did not converge");
  return EplStep{r.theta, as_values(game, lin.at(r.theta)), r.value, r.iterations};
}

EplStep epl_pseudo_mle(const GameSpec& game, const Dataset& data, const EplSystem& system) {
  return epl_pseudo_mle(game, cell_counts(game, data), system);
}

EstimationTrace k_epl(const GameSpec& game, const Dataset& data, const CompoundParam& gamma0, const StopRule& rule,
                      const UpsilonVariant& variant, SolverPolicy policy) {
  EstimationTrace tr;
  tr.method = "epl";
  if (!gamma0.is_value_form()) throw DimensionError("k_epl needs a value-form starting point");
  if (std::holds_alternative<ExactNewton>(variant) && game.num_params() > 3)
    throw DimensionError("exact-Newton variant supports at most 3 parameters");
  const Vec counts = cell_counts(game, data);
  CompoundParam g = gamma0;
  Vec prev_ccp = choice_probs(game, g.v()).flat();
  for (int k = 1; k <= rule.max_iter; ++k) {
    const auto t0 = Clock::now();
    EplStep s;
    try {
      if (std::holds_alternative<ExactNewton>(variant)) {
        const ValueProfile vhat = g.v();
        auto upsilon = [&](const ThetaVec& th) -> Vec {
          const Factorization lu(g_jacobian_v(game, th, vhat), policy);
          return vhat.flat() - lu.solve(g_residual(game, th, vhat));
        };
        s.theta = maximize_relinearized(game, counts, upsilon, g.theta, s.inner_iterations);
        s.v = as_values(game, upsilon(s.theta));
        s.loglik = loglik_at_values(game, s.v.flat(), counts);
      } else {
        const EplSystem sys = std::holds_alternative<GeneralizedZ>(variant)
                                  ? build_epl_system_z(game, g, std::get<GeneralizedZ>(variant).supplier(game, g.theta, g.v()))
                                  : build_epl_system(game, g, policy);
        s = epl_pseudo_mle(game, counts, sys, g.theta);
      }
    } catch (const Error& e) {
      tr.failure = "iteration " + std::to_string(k) + ": " + e.what();
      return tr;
    }
    IterationRecord r;
    r.k = k;
    r.theta = s.theta;
    r.aux = s.v.flat();
    r.ccp = choice_probs(game, s.v).flat();
    r.loglik = s.loglik;
    r.step_norm = sup_diff(s.theta, g.theta);
    r.ccp_change = sup_diff(r.ccp, prev_ccp);
    r.inner_iterations = s.inner_iterations;
    r.seconds = seconds_since(t0);
    prev_ccp = r.ccp;
    g = CompoundParam{s.theta, std::move(s.v)};
    tr.records.push_back(std::move(r));
    if (finished(rule, tr)) break;
  }
  return tr;
}

EstimationTrace single_agent_epl(const GameSpec& game, const Dataset& data, const CcpProfile& P0,
                                 const StopRule& rule) {
  if (game.num_players() != 1) throw DimensionError("single_agent_epl needs a one-player game");
  EstimationTrace tr;
  tr.method = "single_agent_epl";
  const Vec counts = cell_counts(game, data);
  CcpProfile P = P0;
  std::optional<ThetaVec> prev;
  for (int k = 1; k <= rule.max_iter; ++k) {
    const auto t0 = Clock::now();
    IterationRecord r;
    try {
      // with Z = I, Upsilon(theta) = P - (P - Psi(theta, P)) = Lambda(M theta + m)
      const LinearValues lin = npl_values_linear(game, P);
      const PseudoLikelihood pl(game, lin, counts);
      const ConcaveResult c = pl.maximize(prev.value_or(ThetaVec::Zero(game.num_params())));
      if (!c.converged) throw NumericalError("pseudo-likelihood maximization did not converge");
      const CcpProfile psi = choice_probs(game, as_values(game, lin.at(c.theta)));
      CcpProfile up(P.num_players(), P.num_states(), P.num_actions(), P.flat() - (P.flat() - psi.flat()));
      r.k = k;
      r.theta = c.theta;
      r.aux = up.flat();
      r.ccp = up.flat();
      r.loglik = c.value;
      r.step_norm = prev ? sup_diff(c.theta, *prev) : std::numeric_limits<double>::infinity();
      r.ccp_change = sup_diff(up.flat(), P.flat());
      r.inner_iterations = c.iterations;
      prev = c.theta;
      P = std::move(up);
    } catch (const Error& e) {
      tr.failure = "iteration " + std::to_string(k) + ": " + e.what();
      return tr;
    }
    r.seconds = seconds_since(t0);
    tr.records.push_back(std::move(r));
    if (finished(rule, tr)) break;
  }
  return tr;
}

MultistartResult mle_multistart(const GameSpec& game, const Dataset& data, int num_starts, std::uint64_t seed,
                                const StopRule& rule) {
  if (num_starts < 1) throw DimensionError("num_starts must be at least 1");
  const Vec counts = cell_counts(game, data);
  MultistartResult out;
  double best = -std::numeric_limits<double>::infinity();
  NewtonOptions nopt;
  nopt.spectral_radius = false;
  for (int s = 0; s < num_starts; ++s) {
    Rng rng(seed, static_cast<std::uint64_t>(s));
    CcpProfile P(game.num_players(), game.num_states(), game.num_actions());
    for (int j = 0; j < game.num_players(); ++j)
      for (int x = 0; x < game.num_states(); ++x) {
        auto row = P.row(j, x);
        for (int a = 0; a < game.num_actions(); ++a) row[a] = 0.01 + rng.uniform();
        row /= row.sum();
      }
    EstimationTrace tr;
    double ll = std::numeric_limits<double>::quiet_NaN();
    ValueProfile vref;
    try {
      const NplStep first = npl_pseudo_mle(game, counts, P);
      tr = k_epl(game, data, CompoundParam{first.theta, first.v}, rule);
      tr.method = "mle_multistart";
      if (tr.converged) {
        const auto& last = tr.last();
        const EquilibriumRecord eq = solve_equilibrium_newton(game, last.theta, as_values(game, last.aux), nopt);
        ll = loglik_at_values(game, eq.v_star.flat(), counts);
        vref = eq.v_star;
      }
    } catch (const Error& e) {
      tr.method = "mle_multistart";
      if (tr.failure.empty()) tr.failure = e.what();
    }
    if (std::isfinite(ll) && ll > best) {
      best = ll;
      out.best = tr;
      out.best_index = s;
      out.v_refined = vref;
    }
    out.all.push_back(std::move(tr));
    out.refined_loglik.push_back(ll);
  }
  if (out.best_index < 0) throw NumericalError("all " + std::to_string(num_starts) + " multistart runs failed");
  return out;
}

Vec asymptotic_se(const GameSpec& game, const Dataset& data, const CompoundParam& gamma_hat) {
  validate_dataset(game, data);
  const EplSystem sys = build_epl_system(game, gamma_hat);
  const Vec v = sys.at(gamma_hat.theta);
  const int X = game.num_states(), A = game.num_actions();
  const Eigen::Index K = game.num_params();
  std::map<int, Vec> scores;
  for (size_t i = 0; i < data.size(); ++i) {
    auto [it, fresh] = scores.try_emplace(data.market[i], Vec::Zero(K));
    for (int j = 0; j < data.num_players; ++j) {
      const Eigen::Index r0 = (static_cast<Eigen::Index>(j) * X + data.state[i]) * A;
      const LogProb lp = game.shocks().log_prob(std::span<const double>(v.data() + r0, A), data.action(i, j));
      it->second.noalias() += sys.A.middleRows(r0, A).transpose() * lp.grad;
    }
  }
  const double N = static_cast<double>(scores.size());
  Mat omega = Mat::Zero(K, K);
  for (const auto& [m, s] : scores) omega.noalias() += s * s.transpose();
  omega /= N;
  Eigen::JacobiSVD<Mat> svd(omega);
  const auto& sv = svd.singularValues();
  if (!(sv[K - 1] > 1e-12 * sv[0])) throw NumericalError("information matrix is singular");
  const Mat inv = omega.inverse();
  return (inv.diagonal() / N).cwiseSqrt();
}

}  // namespace epl
