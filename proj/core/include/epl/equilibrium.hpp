#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "epl/game.hpp"
#include "epl/linalg.hpp"

namespace epl {

// Gamma^j = theta_part * theta + const_part, per player
struct GammaLinear {
  Mat theta_part;  // X x K
  Vec const_part;  // X
};

// stacked NPL values v~(theta, P) = M theta + m
struct LinearValues {
  Mat M;  // |J||X||A| x K
  Vec m;
  Vec at(const ThetaVec& theta) const { return M * theta + m; }
};

// G(theta, v) = H theta + z
struct GDecomposition {
  Mat H;
  Vec z;
};

struct EquilibriumRecord {
  ThetaVec theta;
  ValueProfile v_star;
  CcpProfile p_star;
  double npl_spectral_radius = std::numeric_limits<double>::quiet_NaN();
  double residual_norm = 0.0;
  std::string label;
  bool symmetric = false;
  int iterations = 0;  // residual evaluations, 1 when started at the solution
};

struct NewtonOptions {
  double tol = 1e-12;
  int max_iter = 100;
  int max_halvings = 40;
  bool spectral_radius = true;
  SolverPolicy policy = SolverPolicy::Auto;
};

std::vector<Vec> gamma_map(const GameSpec& game, const ThetaVec& theta, const CcpProfile& P);
std::vector<GammaLinear> gamma_linear(const GameSpec& game, const CcpProfile& P);

LinearValues npl_values_linear(const GameSpec& game, const CcpProfile& P);
ValueProfile npl_values(const GameSpec& game, const ThetaVec& theta, const CcpProfile& P);
CcpProfile npl_operator(const GameSpec& game, const ThetaVec& theta, const CcpProfile& P);

ValueProfile phi_operator(const GameSpec& game, const ThetaVec& theta, const ValueProfile& v);
Vec g_residual(const GameSpec& game, const ThetaVec& theta, const ValueProfile& v);
GDecomposition g_decompose(const GameSpec& game, const ValueProfile& v);
Eigen::SparseMatrix<double> g_jacobian_v(const GameSpec& game, const ThetaVec& theta, const ValueProfile& v);

EquilibriumRecord solve_equilibrium_newton(const GameSpec& game, const ThetaVec& theta, const ValueProfile& v_init,
                                           const NewtonOptions& opts = {});

struct BestResponseResult {
  bool converged = false;
  int iterations = 0;
  CcpProfile P;
  double residual = 0.0;  // sup norm of Psi(P) - P at the last iterate
  std::optional<EquilibriumRecord> record;
};

BestResponseResult solve_equilibrium_bestresponse(const GameSpec& game, const ThetaVec& theta, const CcpProfile& P_init,
                                                  double damping = 1.0, double tol = 1e-12, int max_iter = 1000);

struct SearchOptions {
  NewtonOptions newton;
  double start_radius = 5.0;
  double dedup_tol = 1e-6;
  int threads = 1;
};

// multi-start Newton from uniform v draws, deduplicated and sorted by (symmetric, P)
std::vector<EquilibriumRecord> find_equilibria(const GameSpec& game, const ThetaVec& theta, int num_starts,
                                               std::uint64_t seed, const SearchOptions& opts = {});

// d Psi / d P over free coordinates (actions 1..A-1 per row, action 0 absorbs the change)
Mat npl_jacobian(const GameSpec& game, const ThetaVec& theta, const CcpProfile& P);
double spectral_radius(const Mat& m);
double npl_spectral_radius(const GameSpec& game, const ThetaVec& theta, const CcpProfile& P);

// induced chain over states under P
Mat state_transition(const GameSpec& game, const CcpProfile& P);
Vec stationary_distribution(const GameSpec& game, const CcpProfile& P);

bool is_symmetric(const GameSpec& game, const CcpProfile& P, double tol = 1e-8);

}  // namespace epl
