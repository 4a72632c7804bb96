#pragma once

#include <Eigen/Sparse>
#include <span>
#include <string>
#include <vector>

#include "epl/shocks.hpp"
#include "epl/types.hpp"

namespace epl {

using SpMat = Eigen::SparseMatrix<double, Eigen::RowMajor>;

struct Transition {
  int x = 0;      // current state
  int joint = 0;  // joint action index, player 1 least significant
  int next = 0;   // next state
  double prob = 0.0;
};

// A relabeling of players and states under which the game is invariant.
// Used only to classify equilibria as symmetric.
struct GameSymmetry {
  std::vector<int> player_perm;
  std::vector<int> state_perm;
};

struct GameDims {
  int players = 0;
  int actions = 0;
  int states = 0;
  int params = 0;
};

class GameSpec {
 public:
  struct Entry {
    int next;
    double prob;
  };

  // basis is indexed (j, x, joint, k) flat; offset (j, x, joint) flat, empty means zero
  GameSpec(GameDims dims, double beta, ShockSpec shocks, std::vector<double> basis, std::vector<double> offset,
           const std::vector<Transition>& transitions, std::vector<std::string> param_names = {});

  int num_players() const { return dims_.players; }
  int num_actions() const { return dims_.actions; }
  int num_states() const { return dims_.states; }
  int num_params() const { return dims_.params; }
  int num_joint() const { return joint_; }
  // |J||X||A|
  int stacked_size() const { return dims_.players * dims_.states * dims_.actions; }
  const GameDims& dims() const { return dims_; }
  double beta() const { return beta_; }
  const ShockSpec& shocks() const { return shocks_; }
  const std::vector<std::string>& param_names() const { return names_; }

  int action_of(int joint, int j) const { return (joint / radix_[j]) % dims_.actions; }
  int radix(int j) const { return radix_[j]; }

  std::span<const double> basis(int j, int x, int joint) const {
    return {basis_.data() + (static_cast<size_t>(j * dims_.states + x) * joint_ + joint) * dims_.params,
            static_cast<size_t>(dims_.params)};
  }
  double offset(int j, int x, int joint) const {
    return offset_.empty() ? 0.0 : offset_[static_cast<size_t>(j * dims_.states + x) * joint_ + joint];
  }
  bool has_offset() const { return !offset_.empty(); }
  std::span<const Entry> transition(int x, int joint) const {
    const auto r = static_cast<size_t>(x) * joint_ + joint;
    return {entries_.data() + row_start_[r], row_start_[r + 1] - row_start_[r]};
  }

  const std::vector<double>& raw_basis() const { return basis_; }
  const std::vector<double>& raw_offset() const { return offset_; }
  std::vector<Transition> transitions() const;
  // share of nonzero entries in the (x, joint) x x' transition array
  double transition_density() const;

  const std::vector<GameSymmetry>& symmetries() const { return symmetries_; }
  void add_symmetry(GameSymmetry s);

 private:
  GameDims dims_;
  int joint_ = 0;
  double beta_ = 0.0;
  ShockSpec shocks_;
  std::vector<double> basis_;
  std::vector<double> offset_;
  std::vector<Entry> entries_;
  std::vector<size_t> row_start_;
  std::vector<int> radix_;
  std::vector<std::string> names_;
  std::vector<GameSymmetry> symmetries_;
};

CcpProfile choice_probs(const GameSpec& game, const ValueProfile& v);
CcpProfile uniform_ccp(const GameSpec& game);

// Product of rival marginals at state x: w[joint] = prod_{l != j} P^l(x, a_l).
// The own digit is ignored, so w sums to |A| over all joint actions.
void rival_weights(const GameSpec& game, const CcpProfile& P, int j, int x, std::span<double> w);

// Row (x, a_j) = sum over rival profiles of P^{-j} * basis. Own-player rows of P are ignored.
Mat belief_weighted_utility_basis(const GameSpec& game, int j, const CcpProfile& P);
Vec belief_weighted_utility_offset(const GameSpec& game, int j, const CcpProfile& P);
// One X x X matrix per own action a_j.
std::vector<SpMat> belief_weighted_transition(const GameSpec& game, int j, const CcpProfile& P);

}  // namespace epl
