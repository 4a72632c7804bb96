#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "epl/concave.hpp"
#include "epl/dataset.hpp"
#include "epl/equilibrium.hpp"

namespace epl {

struct StopRule {
  int max_iter = 100;
  double theta_tol = 1e-6;
  std::optional<double> ccp_tol;  // also require the sup change in CCPs below this
  std::optional<int> fixed_k;     // run exactly k steps, no convergence test

  static StopRule fixed(int k) {
    StopRule r;
    r.fixed_k = k;
    r.max_iter = k;
    return r;
  }
  static StopRule to_convergence(double tol = 1e-6, int max_iter = 100) {
    StopRule r;
    r.theta_tol = tol;
    r.max_iter = max_iter;
    return r;
  }
};

struct IterationRecord {
  int k = 0;
  ThetaVec theta;
  Vec aux;  // v-hat (EPL) or P-hat (NPL, single agent), stacked
  Vec ccp;  // CCPs implied by the auxiliary estimate
  double loglik = 0.0;
  double step_norm = 0.0;   // sup change in theta from the previous iterate
  double ccp_change = 0.0;  // sup change in CCPs from the previous iterate
  double seconds = 0.0;     // wall time of this iteration
  int inner_iterations = 0;
};

struct EstimationTrace {
  std::string method;
  std::vector<IterationRecord> records;
  bool converged = false;
  std::string failure;  // empty unless the sequence aborted

  int iterations() const { return static_cast<int>(records.size()); }
  const IterationRecord& last() const;
  const ThetaVec& theta() const { return last().theta; }
  double total_seconds() const;
};

struct NplStep {
  ThetaVec theta;
  ValueProfile v;  // v~(theta, P_prev)
  CcpProfile P;    // Psi(theta, P_prev)
  double loglik = 0.0;
  int inner_iterations = 0;
};

NplStep npl_pseudo_mle(const GameSpec& game, const Vec& counts, const CcpProfile& P_prev,
                       const std::optional<ThetaVec>& start = std::nullopt);
NplStep npl_pseudo_mle(const GameSpec& game, const Dataset& data, const CcpProfile& P_prev);

EstimationTrace k_npl(const GameSpec& game, const Dataset& data, const CcpProfile& P0, const StopRule& rule = {});

// theta-hat_0 from 1-NPL at P_hat, v-hat_0 = v~(theta-hat_0, P_hat)
CompoundParam initial_gamma(const GameSpec& game, const Dataset& data, const CcpProfile& P_hat);

// Upsilon(theta) = A theta + b
struct EplSystem {
  Mat A;
  Vec b;
  CompoundParam source;
  double rcond = 0.0;
  bool sparse = false;
  bool jittered = false;

  LinearValues as_linear() const { return {A, b}; }
  Vec at(const ThetaVec& theta) const { return A * theta + b; }
};

EplSystem build_epl_system(const GameSpec& game, const CompoundParam& gamma_prev,
                           SolverPolicy policy = SolverPolicy::Auto);
// same construction with an arbitrary nonsingular Z in place of the Jacobian
EplSystem build_epl_system_z(const GameSpec& game, const CompoundParam& gamma_prev, const Mat& Z);

struct EplStep {
  ThetaVec theta;
  ValueProfile v;
  double loglik = 0.0;
  int inner_iterations = 0;
};

EplStep epl_pseudo_mle(const GameSpec& game, const Vec& counts, const EplSystem& system,
                       const std::optional<ThetaVec>& start = std::nullopt);
EplStep epl_pseudo_mle(const GameSpec& game, const Dataset& data, const EplSystem& system);

using ZSupplier = std::function<Mat(const GameSpec&, const ThetaVec&, const ValueProfile&)>;
struct FrozenJacobian {};
struct GeneralizedZ {
  ZSupplier supplier;
};
// re-solves the Newton step at every trial theta; small games only
struct ExactNewton {};
using UpsilonVariant = std::variant<FrozenJacobian, GeneralizedZ, ExactNewton>;

EstimationTrace k_epl(const GameSpec& game, const Dataset& data, const CompoundParam& gamma0,
                      const StopRule& rule = {}, const UpsilonVariant& variant = FrozenJacobian{},
                      SolverPolicy policy = SolverPolicy::Auto);

// P-space EPL with Z = I for one-player models
EstimationTrace single_agent_epl(const GameSpec& game, const Dataset& data, const CcpProfile& P0,
                                 const StopRule& rule = {});

struct MultistartResult {
  EstimationTrace best;
  int best_index = -1;
  ValueProfile v_refined;  // equilibrium values at the winning theta
  std::vector<EstimationTrace> all;
  std::vector<double> refined_loglik;  // NaN for failed starts
};

MultistartResult mle_multistart(const GameSpec& game, const Dataset& data, int num_starts, std::uint64_t seed,
                                const StopRule& rule = StopRule::to_convergence(1e-10, 100));

// outer product of per-market scores of ln Lambda(Upsilon(theta, gamma-hat))
Vec asymptotic_se(const GameSpec& game, const Dataset& data, const CompoundParam& gamma_hat);

}  // namespace epl
