#pragma once

#include <cmath>
#include <random>
#include <vector>

#include "epl/dataset.hpp"
#include "epl/equilibrium.hpp"
#include "epl/game.hpp"

namespace epl::test {

// bus-engine style renewal model: two mileage states, action 1 replaces.
// u(x, keep) = -theta_1 x, u(x, replace) = -theta_2
inline GameSpec renewal_game(double beta = 0.9, double wear = 0.6) {
  std::vector<double> basis(2 * 2 * 2, 0.0);
  auto at = [&](int x, int a, int k) -> double& { return basis[(x * 2 + a) * 2 + k]; };
  at(1, 0, 0) = -1.0;
  at(0, 1, 1) = -1.0;
  at(1, 1, 1) = -1.0;
  std::vector<Transition> tr = {
      {0, 0, 0, 1.0 - wear}, {0, 0, 1, wear}, {1, 0, 1, 1.0}, {0, 1, 0, 1.0}, {1, 1, 0, 1.0},
  };
  return GameSpec(GameDims{1, 2, 2, 2}, beta, ShockSpec::logit(1.0), std::move(basis), {}, tr, {"cost", "rc"});
}

inline ThetaVec renewal_theta() {
  ThetaVec t(2);
  t << 1.5, 2.0;
  return t;
}

// one state, one player: u(0) = theta, u(1) = 0
inline GameSpec one_state_game(double beta, ShockSpec shocks = ShockSpec::logit(1.0)) {
  return GameSpec(GameDims{1, 2, 1, 1}, beta, shocks, {1.0, 0.0}, {}, {{0, 0, 0, 1.0}, {0, 1, 0, 1.0}});
}

// dense random game for derivative checks
inline GameSpec random_game(unsigned seed, int J, int X, int A, int K, ShockSpec shocks, double beta = 0.9) {
  std::mt19937_64 g(seed);
  std::normal_distribution<double> n01;
  std::uniform_real_distribution<double> u01;
  int C = 1;
  for (int j = 0; j < J; ++j) C *= A;
  std::vector<double> basis(static_cast<size_t>(J) * X * C * K), offset(static_cast<size_t>(J) * X * C);
  for (double& b : basis) b = n01(g);
  for (double& o : offset) o = 0.5 * n01(g);
  std::vector<Transition> tr;
  for (int x = 0; x < X; ++x)
    for (int c = 0; c < C; ++c) {
      const int x1 = static_cast<int>(u01(g) * X) % X;
      const int x2 = (x1 + 1 + static_cast<int>(u01(g) * (X - 1))) % X;
      const double p = 0.2 + 0.6 * u01(g);
      tr.push_back({x, c, x1, p});
      if (x2 != x1) tr.push_back({x, c, x2, 1.0 - p});
      else tr.back().prob = 1.0;
    }
  return GameSpec(GameDims{J, A, X, K}, beta, shocks, std::move(basis), std::move(offset), tr);
}

inline ThetaVec random_theta(unsigned seed, int K, double scale = 1.0) {
  std::mt19937_64 g(seed);
  std::normal_distribution<double> n01;
  ThetaVec t(K);
  for (int k = 0; k < K; ++k) t[k] = scale * n01(g);
  return t;
}

inline ValueProfile random_values(const GameSpec& game, unsigned seed, double scale = 1.0) {
  std::mt19937_64 g(seed);
  std::normal_distribution<double> n01;
  ValueProfile v(game.num_players(), game.num_states(), game.num_actions());
  for (Eigen::Index i = 0; i < v.size(); ++i) v.flat()[i] = scale * n01(g);
  return v;
}

// deterministic sample whose cell frequencies approximate pi(x) prod_j P^j(x, a_j)
inline Dataset population_dataset(const GameSpec& g, const CcpProfile& P, double scale) {
  const Vec pi = stationary_distribution(g, P);
  Dataset d;
  d.num_players = g.num_players();
  std::vector<int> a(g.num_players());
  int m = 0;
  for (int x = 0; x < g.num_states(); ++x)
    for (int c = 0; c < g.num_joint(); ++c) {
      double w = pi[x];
      for (int j = 0; j < g.num_players(); ++j) {
        a[j] = g.action_of(c, j);
        w *= P(j, x, a[j]);
      }
      const long n = std::lround(scale * w);
      for (long i = 0; i < n; ++i) d.push(m++, 0, x, a);
    }
  return d;
}

inline double sup(const Vec& a) { return a.lpNorm<Eigen::Infinity>(); }

}  // namespace epl::test
