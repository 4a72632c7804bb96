#include "epl/equilibrium.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <set>
#include <thread>

#include <Eigen/Eigenvalues>

#include "epl/rng.hpp"

namespace epl {

namespace {

struct Beliefs {
  Mat basis;
  Vec offset;
  std::vector<SpMat> trans;
};

Beliefs beliefs(const GameSpec& game, int j, const CcpProfile& P) {
  return {belief_weighted_utility_basis(game, j, P), belief_weighted_utility_offset(game, j, P),
          belief_weighted_transition(game, j, P)};
}

void check_theta(const GameSpec& game, const ThetaVec& theta) {
  if (theta.size() != game.num_params())
    throw DimensionError("theta has " + std::to_string(theta.size()) + " entries, game has " +
                         std::to_string(game.num_params()) + " parameters");
  if (!theta.allFinite()) throw NumericalError("theta has non-finite entries");
}

void check_values(const GameSpec& game, const ValueProfile& v) {
  if (v.num_players() != game.num_players() || v.num_states() != game.num_states() ||
      v.num_actions() != game.num_actions())
    throw DimensionError("value profile shape does not match the game");
  validate_values(v);
}

// S(v^j(x)) for every player and state
Mat surplus_table(const GameSpec& game, const ValueProfile& v) {
  Mat S(game.num_players(), game.num_states());
  for (int j = 0; j < game.num_players(); ++j)
    for (int x = 0; x < game.num_states(); ++x) S(j, x) = game.shocks().surplus(v.row_span(j, x));
  return S;
}

double continuation(const GameSpec& game, const Mat& S, int j, int x, int c) {
  double acc = 0.0;
  for (const auto& e : game.transition(x, c)) acc += e.prob * S(j, e.next);
  return acc;
}

double flow(const GameSpec& game, const ThetaVec& theta, int j, int x, int c) {
  const auto h = game.basis(j, x, c);
  double u = game.offset(j, x, c);
  for (int k = 0; k < game.num_params(); ++k) u += h[k] * theta[k];
  return u;
}

}  // namespace

std::vector<GammaLinear> gamma_linear(const GameSpec& game, const CcpProfile& P) {
  validate_ccp(P, 1e-9);
  const int J = game.num_players(), X = game.num_states(), A = game.num_actions(), K = game.num_params();
  std::vector<GammaLinear> out;
  out.reserve(J);
  Vec e(A);
  for (int j = 0; j < J; ++j) {
    const Beliefs b = beliefs(game, j, P);
    Mat rhs = Mat::Zero(X, K + 1);
    Mat F = Mat::Zero(X, X);
    for (int x = 0; x < X; ++x) {
      game.shocks().expected_shock(P.row_span(j, x), std::span<double>(e.data(), A));
      for (int a = 0; a < A; ++a) {
        const double p = P(j, x, a);
        rhs.row(x).head(K) += p * b.basis.row(x * A + a);
        rhs(x, K) += p * (b.offset[x * A + a] + e[a]);
      }
    }
    Mat sol;
    if (game.beta() == 0.0) {
      sol = rhs;
    } else {
      for (int a = 0; a < A; ++a)
        for (int x = 0; x < X; ++x)
          for (SpMat::InnerIterator it(b.trans[a], x); it; ++it) F(x, it.col()) += P(j, x, a) * it.value();
      const Mat lhs = Mat::Identity(X, X) - game.beta() * F;
      Factorization lu(lhs);
      if (!(lu.rcond() > 1e-14)) throw NumericalError("I - beta F is singular (rcond " + std::to_string(lu.rcond()) + ")");
      sol = lu.solve(rhs);
    }
    out.push_back({sol.leftCols(K), sol.col(K)});
  }
  return out;
}

std::vector<Vec> gamma_map(const GameSpec& game, const ThetaVec& theta, const CcpProfile& P) {
  check_theta(game, theta);
  std::vector<Vec> out;
  for (const auto& g : gamma_linear(game, P)) out.push_back(g.theta_part * theta + g.const_part);
  return out;
}

LinearValues npl_values_linear(const GameSpec& game, const CcpProfile& P) {
  const int J = game.num_players(), X = game.num_states(), A = game.num_actions(), K = game.num_params();
  const auto gam = gamma_linear(game, P);
  LinearValues out{Mat::Zero(game.stacked_size(), K), Vec::Zero(game.stacked_size())};
  for (int j = 0; j < J; ++j) {
    const Beliefs b = beliefs(game, j, P);
    for (int a = 0; a < A; ++a) {
      const Mat cont_theta = b.trans[a] * gam[j].theta_part;
      const Vec cont_const = b.trans[a] * gam[j].const_part;
      for (int x = 0; x < X; ++x) {
        const Eigen::Index r = (static_cast<Eigen::Index>(j) * X + x) * A + a;
        out.M.row(r) = b.basis.row(x * A + a) + game.beta() * cont_theta.row(x);
        out.m[r] = b.offset[x * A + a] + game.beta() * cont_const[x];
      }
    }
  }
  return out;
}

ValueProfile npl_values(const GameSpec& game, const ThetaVec& theta, const CcpProfile& P) {
  check_theta(game, theta);
  const auto lin = npl_values_linear(game, P);
  return ValueProfile(game.num_players(), game.num_states(), game.num_actions(), lin.at(theta));
}

CcpProfile npl_operator(const GameSpec& game, const ThetaVec& theta, const CcpProfile& P) {
  return choice_probs(game, npl_values(game, theta, P));
}

ValueProfile phi_operator(const GameSpec& game, const ThetaVec& theta, const ValueProfile& v) {
  check_theta(game, theta);
  check_values(game, v);
  const int J = game.num_players(), X = game.num_states(), C = game.num_joint();
  const CcpProfile P = choice_probs(game, v);
  const Mat S = surplus_table(game, v);
  ValueProfile out(J, X, game.num_actions());
  std::vector<double> w(C);
  for (int j = 0; j < J; ++j)
    for (int x = 0; x < X; ++x) {
      rival_weights(game, P, j, x, w);
      for (int c = 0; c < C; ++c) {
        const double u = flow(game, theta, j, x, c) + game.beta() * continuation(game, S, j, x, c);
        out(j, x, game.action_of(c, j)) += w[c] * u;
      }
    }
  return out;
}

Vec g_residual(const GameSpec& game, const ThetaVec& theta, const ValueProfile& v) {
  return v.flat() - phi_operator(game, theta, v).flat();
}

GDecomposition g_decompose(const GameSpec& game, const ValueProfile& v) {
  check_values(game, v);
  const int J = game.num_players(), X = game.num_states(), K = game.num_params(), C = game.num_joint();
  const CcpProfile P = choice_probs(game, v);
  const Mat S = surplus_table(game, v);
  GDecomposition out{Mat::Zero(game.stacked_size(), K), v.flat()};
  std::vector<double> w(C);
  for (int j = 0; j < J; ++j)
    for (int x = 0; x < X; ++x) {
      rival_weights(game, P, j, x, w);
      for (int c = 0; c < C; ++c) {
        const Eigen::Index r = v.index(j, x, game.action_of(c, j));
        const auto h = game.basis(j, x, c);
        for (int k = 0; k < K; ++k) out.H(r, k) -= w[c] * h[k];
        out.z[r] -= w[c] * (game.offset(j, x, c) + game.beta() * continuation(game, S, j, x, c));
      }
    }
  return out;
}

Eigen::SparseMatrix<double> g_jacobian_v(const GameSpec& game, const ThetaVec& theta, const ValueProfile& v) {
  check_theta(game, theta);
  check_values(game, v);
  const int J = game.num_players(), X = game.num_states(), A = game.num_actions(), C = game.num_joint();
  const CcpProfile P = choice_probs(game, v);
  const Mat S = surplus_table(game, v);
  const double beta = game.beta();

  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<size_t>(game.stacked_size()) * 8);
  for (Eigen::Index r = 0; r < game.stacked_size(); ++r) trip.emplace_back(r, r, 1.0);

  std::vector<Mat> jl(J, Mat(A, A));
  std::vector<double> w(C), U(C), wjl(C);
  Mat D(A, A);
  for (int x = 0; x < X; ++x) {
    for (int l = 0; l < J; ++l) game.shocks().choice_prob_jacobian(v.row_span(l, x), jl[l]);
    for (int j = 0; j < J; ++j) {
      rival_weights(game, P, j, x, w);
      for (int c = 0; c < C; ++c) {
        U[c] = flow(game, theta, j, x, c) + beta * continuation(game, S, j, x, c);
        if (beta == 0.0) continue;
        // own block: d/dv^j(x') of beta * f * S(v^j(x')) is beta * f * Lambda^j(x')
        const Eigen::Index r = v.index(j, x, game.action_of(c, j));
        for (const auto& e : game.transition(x, c)) {
          const double coef = -beta * w[c] * e.prob;
          for (int b = 0; b < A; ++b) trip.emplace_back(r, v.index(j, e.next, b), coef * P(j, e.next, b));
        }
      }
      // cross blocks: beliefs about rival l at the same state
      for (int l = 0; l < J; ++l) {
        if (l == j) continue;
        for (int c = 0; c < C; ++c) {
          double p = 1.0;
          for (int m = 0; m < J; ++m)
            if (m != j && m != l) p *= P(m, x, game.action_of(c, m));
          wjl[c] = p;
        }
        D.setZero();
        for (int c = 0; c < C; ++c) D(game.action_of(c, j), game.action_of(c, l)) += wjl[c] * U[c];
        const Mat E = D * jl[l];
        for (int a = 0; a < A; ++a)
          for (int b = 0; b < A; ++b) trip.emplace_back(v.index(j, x, a), v.index(l, x, b), -E(a, b));
      }
    }
  }
  Eigen::SparseMatrix<double> out(game.stacked_size(), game.stacked_size());
  out.setFromTriplets(trip.begin(), trip.end());
  out.prune(0.0);
  return out;
}

bool is_symmetric(const GameSpec& game, const CcpProfile& P, double tol) {
  const int J = game.num_players(), X = game.num_states(), A = game.num_actions();
  if (game.symmetries().empty()) {
    for (int j = 1; j < J; ++j)
      for (int x = 0; x < X; ++x)
        for (int a = 0; a < A; ++a)
          if (std::abs(P(j, x, a) - P(0, x, a)) > tol) return false;
    return true;
  }
  for (const auto& s : game.symmetries())
    for (int j = 0; j < J; ++j)
      for (int x = 0; x < X; ++x)
        for (int a = 0; a < A; ++a)
          if (std::abs(P(s.player_perm[j], s.state_perm[x], a) - P(j, x, a)) > tol) return false;
  return true;
}

EquilibriumRecord solve_equilibrium_newton(const GameSpec& game, const ThetaVec& theta, const ValueProfile& v_init,
                                           const NewtonOptions& opts) {
  check_theta(game, theta);
  check_values(game, v_init);
  ValueProfile v = v_init;
  Vec G = g_residual(game, theta, v);
  double norm = G.lpNorm<Eigen::Infinity>();
  int iter = 1;
  while (!(norm <= opts.tol)) {
    if (iter > opts.max_iter)
      throw NumericalError("Newton solver did not converge in " + std::to_string(opts.max_iter) +
                           " iterations (residual " + std::to_string(norm) + ")");
    const Factorization lu(g_jacobian_v(game, theta, v), opts.policy);
    const Vec step = lu.solve(G);
    double t = 1.0;
    bool accepted = false;
    for (int h = 0; h <= opts.max_halvings; ++h, t *= 0.5) {
      ValueProfile trial(v.num_players(), v.num_states(), v.num_actions(), v.flat() - t * step);
      if (!trial.flat().allFinite()) continue;
      Vec Gt = g_residual(game, theta, trial);
      const double nt = Gt.lpNorm<Eigen::Infinity>();
      if (nt < norm) {
        v = std::move(trial);
        G = std::move(Gt);
        norm = nt;
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      throw NumericalError("Newton line search failed after " + std::to_string(opts.max_halvings) +
                           " halvings (residual " + std::to_string(norm) + ")");
    }
    ++iter;
  }
  EquilibriumRecord rec;
  rec.theta = theta;
  rec.p_star = choice_probs(game, v);
  rec.v_star = std::move(v);
  rec.residual_norm = norm;
  rec.iterations = iter;
  rec.symmetric = is_symmetric(game, rec.p_star);
  if (opts.spectral_radius) {
    try {
      rec.npl_spectral_radius = npl_spectral_radius(game, theta, rec.p_star);
    } catch (const Error&) {
    }
  }
  return rec;
}

BestResponseResult solve_equilibrium_bestresponse(const GameSpec& game, const ThetaVec& theta, const CcpProfile& P_init,
                                                  double damping, double tol, int max_iter) {
  if (!(damping >= 0.0 && damping <= 1.0)) throw DimensionError("damping must lie in [0, 1]");
  BestResponseResult out;
  out.P = P_init;
  for (int it = 1; it <= max_iter; ++it) {
    CcpProfile next;
    try {
      next = npl_operator(game, theta, out.P);
    } catch (const Error&) {
      // iterate left the interior: divergence
      out.iterations = it;
      return out;
    }
    out.residual = (next.flat() - out.P.flat()).lpNorm<Eigen::Infinity>();
    out.iterations = it;
    if (out.residual <= tol) {
      out.converged = true;
      break;
    }
    out.P.flat() = (1.0 - damping) * out.P.flat() + damping * next.flat();
    if (damping == 0.0) break;
  }
  if (out.converged) {
    EquilibriumRecord rec;
    rec.theta = theta;
    rec.v_star = npl_values(game, theta, out.P);
    rec.p_star = choice_probs(game, rec.v_star);
    rec.residual_norm = g_residual(game, theta, rec.v_star).lpNorm<Eigen::Infinity>();
    rec.symmetric = is_symmetric(game, rec.p_star);
    rec.iterations = out.iterations;
    out.record = std::move(rec);
  }
  return out;
}

std::vector<EquilibriumRecord> find_equilibria(const GameSpec& game, const ThetaVec& theta, int num_starts,
                                               std::uint64_t seed, const SearchOptions& opts) {
  if (num_starts < 1) throw DimensionError("num_starts must be at least 1");
  NewtonOptions nopt = opts.newton;
  nopt.spectral_radius = false;
  std::vector<std::optional<EquilibriumRecord>> found(num_starts);
  auto run = [&](int s) {
    Rng rng(seed, static_cast<std::uint64_t>(s));
    ValueProfile v0(game.num_players(), game.num_states(), game.num_actions());
    for (Eigen::Index i = 0; i < v0.size(); ++i) v0.flat()[i] = rng.uniform(-opts.start_radius, opts.start_radius);
    try {
      found[s] = solve_equilibrium_newton(game, theta, v0, nopt);
    } catch (const NumericalError&) {
    }
  };
  const int threads = std::max(1, std::min(opts.threads, num_starts));
  if (threads == 1) {
    for (int s = 0; s < num_starts; ++s) run(s);
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t)
      pool.emplace_back([&, t] {
        for (int s = t; s < num_starts; s += threads) run(s);
      });
    for (auto& th : pool) th.join();
  }

  std::vector<EquilibriumRecord> uniq;
  for (auto& f : found) {
    if (!f) continue;
    const bool dup = std::any_of(uniq.begin(), uniq.end(), [&](const EquilibriumRecord& u) {
      return (u.v_star.flat() - f->v_star.flat()).lpNorm<Eigen::Infinity>() < opts.dedup_tol;
    });
    if (!dup) uniq.push_back(std::move(*f));
  }
  std::sort(uniq.begin(), uniq.end(), [](const EquilibriumRecord& l, const EquilibriumRecord& r) {
    if (l.symmetric != r.symmetric) return !l.symmetric;
    const Vec& a = l.p_star.flat();
    const Vec& b = r.p_star.flat();
    return std::lexicographical_compare(a.data(), a.data() + a.size(), b.data(), b.data() + b.size());
  });
  for (size_t i = 0; i < uniq.size(); ++i) {
    uniq[i].label = "eq" + std::to_string(i + 1);
    if (!opts.newton.spectral_radius) continue;
    // degenerate rows (a probability rounding to 0 or 1) leave the radius undefined
    try {
      uniq[i].npl_spectral_radius = npl_spectral_radius(game, theta, uniq[i].p_star);
    } catch (const Error&) {
    }
  }
  return uniq;
}

Mat npl_jacobian(const GameSpec& game, const ThetaVec& theta, const CcpProfile& P) {
  const int J = game.num_players(), X = game.num_states(), A = game.num_actions();
  const int free = A - 1;
  const Eigen::Index n = static_cast<Eigen::Index>(J) * X * free;
  auto free_index = [&](int j, int x, int a) { return (static_cast<Eigen::Index>(j) * X + x) * free + (a - 1); };
  Mat out(n, n);
  CcpProfile Pp = P, Pm = P;
  for (int j = 0; j < J; ++j)
    for (int x = 0; x < X; ++x)
      for (int a = 1; a < A; ++a) {
        const double h = std::min(1e-6, 0.25 * std::min(P(j, x, a), P(j, x, 0)));
        Pp(j, x, a) += h;
        Pp(j, x, 0) -= h;
        Pm(j, x, a) -= h;
        Pm(j, x, 0) += h;
        const CcpProfile up = npl_operator(game, theta, Pp);
        const CcpProfile dn = npl_operator(game, theta, Pm);
        const Eigen::Index col = free_index(j, x, a);
        for (int jj = 0; jj < J; ++jj)
          for (int xx = 0; xx < X; ++xx)
            for (int aa = 1; aa < A; ++aa)
              out(free_index(jj, xx, aa), col) = (up(jj, xx, aa) - dn(jj, xx, aa)) / (2.0 * h);
        Pp(j, x, a) = Pm(j, x, a) = P(j, x, a);
        Pp(j, x, 0) = Pm(j, x, 0) = P(j, x, 0);
      }
  return out;
}

double spectral_radius(const Mat& m) {
  if (m.rows() == 0) return 0.0;
  // power iteration; accepted only if it settles on a real dominant eigenpair
  Vec x = Vec::Ones(m.rows()) / std::sqrt(static_cast<double>(m.rows()));
  for (Eigen::Index i = 0; i < x.size(); ++i) x[i] += 1e-3 * std::sin(1.0 + static_cast<double>(i));
  x.normalize();
  for (int it = 0; it < 2000; ++it) {
    Vec y = m * x;
    const double lam = x.dot(y);
    const double ny = y.norm();
    if (ny == 0.0) break;
    if ((y - lam * x).norm() <= 1e-12 * std::max(1.0, std::abs(lam))) return std::abs(lam);
    x = y / ny;
  }
  Eigen::EigenSolver<Mat> es(m, false);
  if (es.info() != Eigen::Success) throw NumericalError("eigenvalue solver failed");
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

double npl_spectral_radius(const GameSpec& game, const ThetaVec& theta, const CcpProfile& P) {
  return spectral_radius(npl_jacobian(game, theta, P));
}

Mat state_transition(const GameSpec& game, const CcpProfile& P) {
  const int J = game.num_players(), X = game.num_states(), C = game.num_joint();
  Mat M = Mat::Zero(X, X);
  for (int x = 0; x < X; ++x)
    for (int c = 0; c < C; ++c) {
      double p = 1.0;
      for (int j = 0; j < J; ++j) p *= P(j, x, game.action_of(c, j));
      for (const auto& e : game.transition(x, c)) M(x, e.next) += p * e.prob;
    }
  return M;
}

namespace {

// strongly connected components without outgoing edges
std::vector<std::vector<int>> closed_classes(const Mat& M) {
  const int n = static_cast<int>(M.rows());
  std::vector<int> index(n, -1), low(n, 0), comp(n, -1);
  std::vector<bool> on(n, false);
  std::vector<int> stack;
  int counter = 0, ncomp = 0;
  std::function<void(int)> visit = [&](int u) {
    index[u] = low[u] = counter++;
    stack.push_back(u);
    on[u] = true;
    for (int w = 0; w < n; ++w) {
      if (M(u, w) <= 0.0) continue;
      if (index[w] < 0) {
        visit(w);
        low[u] = std::min(low[u], low[w]);
      } else if (on[w]) {
        low[u] = std::min(low[u], index[w]);
      }
    }
    if (low[u] == index[u]) {
      int w;
      do {
        w = stack.back();
        stack.pop_back();
        on[w] = false;
        comp[w] = ncomp;
      } while (w != u);
      ++ncomp;
    }
  };
  for (int u = 0; u < n; ++u)
    if (index[u] < 0) visit(u);
  std::vector<bool> leaks(ncomp, false);
  for (int u = 0; u < n; ++u)
    for (int w = 0; w < n; ++w)
      if (M(u, w) > 0.0 && comp[u] != comp[w]) leaks[comp[u]] = true;
  std::vector<std::vector<int>> out;
  for (int c = 0; c < ncomp; ++c) {
    if (leaks[c]) continue;
    std::vector<int> members;
    for (int u = 0; u < n; ++u)
      if (comp[u] == c) members.push_back(u);
    out.push_back(std::move(members));
  }
  return out;
}

}  // namespace

Vec stationary_distribution(const GameSpec& game, const CcpProfile& P) {
  const Mat M = state_transition(game, P);
  const int X = static_cast<int>(M.rows());
  const auto classes = closed_classes(M);
  if (classes.size() != 1) {
    std::string msg = "induced chain has " + std::to_string(classes.size()) + " closed classes:";
    for (const auto& c : classes) {
      msg += " {";
      for (size_t i = 0; i < c.size(); ++i) msg += (i ? "," : "") + std::to_string(c[i]);
      msg += "}";
    }
    throw NumericalError(msg);
  }
  Mat lhs = M.transpose() - Mat::Identity(X, X);
  lhs.row(X - 1).setOnes();
  Vec rhs = Vec::Zero(X);
  rhs[X - 1] = 1.0;
  Factorization lu(lhs);
  Vec pi = lu.solve(rhs);
  for (int it = 0; it < 2; ++it) {
    // iterative refinement
    const Vec r = rhs - lhs * pi;
    pi += lu.solve(r);
  }
  pi = pi.cwiseMax(0.0);
  pi /= pi.sum();
  const double err = (M.transpose() * pi - pi).lpNorm<Eigen::Infinity>();
  if (err > 1e-12) throw NumericalError("stationary distribution residual " + std::to_string(err));
  return pi;
}

}  // namespace epl
