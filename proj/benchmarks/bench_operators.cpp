#include <benchmark/benchmark.h>

#include "epl/estimation.hpp"
#include "epl/presets.hpp"
#include "epl/simulate.hpp"

using namespace epl;

namespace {

const Preset& am2007() {
  static const Preset p = preset_am2007(1, {}, false);
  return p;
}

const Preset& psd2008() {
  static const Preset p = preset_psd2008("ii");
  return p;
}

void BM_EplSystem(benchmark::State& st, SolverPolicy policy) {
  const Preset& p = am2007();
  const CompoundParam g{p.theta, p.equilibrium.v_star};
  for (auto _ : st) benchmark::DoNotOptimize(build_epl_system(p.game, g, policy));
}
BENCHMARK_CAPTURE(BM_EplSystem, am2007_dense, SolverPolicy::Dense)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_EplSystem, am2007_sparse, SolverPolicy::Sparse)->Unit(benchmark::kMillisecond);

void BM_Psi(benchmark::State& st, const Preset& (*preset)()) {
  const Preset& p = preset();
  for (auto _ : st) benchmark::DoNotOptimize(npl_operator(p.game, p.theta, p.equilibrium.p_star));
}
BENCHMARK_CAPTURE(BM_Psi, psd2008, psd2008)->Unit(benchmark::kMicrosecond);
BENCHMARK_CAPTURE(BM_Psi, am2007, am2007)->Unit(benchmark::kMillisecond);

void BM_Phi(benchmark::State& st, const Preset& (*preset)()) {
  const Preset& p = preset();
  for (auto _ : st) benchmark::DoNotOptimize(phi_operator(p.game, p.theta, p.equilibrium.v_star));
}
BENCHMARK_CAPTURE(BM_Phi, psd2008, psd2008)->Unit(benchmark::kMicrosecond);
BENCHMARK_CAPTURE(BM_Phi, am2007, am2007)->Unit(benchmark::kMillisecond);

void BM_GJacobian(benchmark::State& st) {
  const Preset& p = am2007();
  for (auto _ : st) benchmark::DoNotOptimize(g_jacobian_v(p.game, p.theta, p.equilibrium.v_star));
}
BENCHMARK(BM_GJacobian)->Unit(benchmark::kMillisecond);

// one replication's worth of estimation on the two-firm game
void BM_InfEpl(benchmark::State& st) {
  const Preset& p = psd2008();
  const Dataset d = simulate_dataset(p.game, p.equilibrium, 1000, 1, 1);
  for (auto _ : st) {
    const CompoundParam g0 = initial_gamma(p.game, d, frequency_ccp(p.game, d));
    benchmark::DoNotOptimize(k_epl(p.game, d, g0, StopRule::to_convergence()));
  }
}
BENCHMARK(BM_InfEpl)->Unit(benchmark::kMicrosecond);

void BM_InfNpl(benchmark::State& st) {
  const Preset& p = psd2008();
  const Dataset d = simulate_dataset(p.game, p.equilibrium, 1000, 1, 1);
  for (auto _ : st) benchmark::DoNotOptimize(k_npl(p.game, d, frequency_ccp(p.game, d), StopRule::to_convergence()));
}
BENCHMARK(BM_InfNpl)->Unit(benchmark::kMicrosecond);

}  // namespace
BENCHMARK_MAIN();
