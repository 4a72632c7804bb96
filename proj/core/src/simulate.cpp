#include "epl/simulate.hpp"

#include "epl/rng.hpp"

namespace epl {

Dataset simulate_dataset(const GameSpec& game, const CcpProfile& P, int N, int T, std::uint64_t seed,
                         std::uint64_t stream) {
  if (N < 1 || T < 1) throw DimensionError("N and T must be positive");
  const Vec pi = stationary_distribution(game, P);
  const int J = game.num_players();
  Rng rng(seed, stream);
  Dataset d;
  d.num_players = J;
  std::vector<int> a(J);
  std::vector<double> probs;
  for (int i = 0; i < N; ++i) {
    int x = rng.categorical(std::span<const double>(pi.data(), pi.size()));
    for (int t = 0; t < T; ++t) {
      int joint = 0;
      for (int j = 0; j < J; ++j) {
        a[j] = rng.categorical(P.row_span(j, x));
        joint += a[j] * game.radix(j);
      }
      d.push(i, t, x, a);
      if (t + 1 < T) {
        const auto row = game.transition(x, joint);
        probs.clear();
        for (const auto& e : row) probs.push_back(e.prob);
        x = row[rng.categorical(probs)].next;
      }
    }
  }
  return d;
}

Dataset simulate_dataset(const GameSpec& game, const EquilibriumRecord& eq, int N, int T, std::uint64_t seed,
                         std::uint64_t stream) {
  if (!(eq.residual_norm <= 1e-10)) throw NumericalError("equilibrium residual above 1e-10; refusing to simulate");
  return simulate_dataset(game, eq.p_star, N, T, seed, stream);
}

}  // namespace epl
