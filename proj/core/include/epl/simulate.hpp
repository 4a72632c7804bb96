#pragma once

#include <cstdint>

#include "epl/dataset.hpp"
#include "epl/equilibrium.hpp"

namespace epl {

// T = 1: states drawn from the stationary distribution of the equilibrium chain.
// T > 1: first state from the stationary distribution, later states follow the transition kernel.
Dataset simulate_dataset(const GameSpec& game, const CcpProfile& P, int N, int T, std::uint64_t seed,
                         std::uint64_t stream = 0);
Dataset simulate_dataset(const GameSpec& game, const EquilibriumRecord& eq, int N, int T, std::uint64_t seed,
                         std::uint64_t stream = 0);

}  // namespace epl
