#include "epl/game.hpp"

#include <algorithm>
#include <cmath>

namespace epl {

void validate_ccp(const CcpProfile& P, double tol) {
  for (int j = 0; j < P.num_players(); ++j)
    for (int x = 0; x < P.num_states(); ++x) {
      double s = 0.0;
      for (int a = 0; a < P.num_actions(); ++a) {
        const double p = P(j, x, a);
        if (!(p > 0.0 && p < 1.0))
          throw DimensionError("CCP entry (" + std::to_string(j) + "," + std::to_string(x) + "," +
                               std::to_string(a) + ") outside the open unit interval");
        s += p;
      }
      if (std::abs(s - 1.0) > tol)
        throw DimensionError("CCP row (" + std::to_string(j) + "," + std::to_string(x) + ") does not sum to one");
    }
}

void validate_values(const ValueProfile& v) {
  if (!v.flat().allFinite()) throw NumericalError("value profile has non-finite entries");
}

CcpProfile uniform_ccp(int players, int states, int actions) {
  CcpProfile P(players, states, actions);
  P.flat().setConstant(1.0 / actions);
  return P;
}

CcpProfile uniform_ccp(const GameSpec& game) {
  return uniform_ccp(game.num_players(), game.num_states(), game.num_actions());
}

GameSpec::GameSpec(GameDims dims, double beta, ShockSpec shocks, std::vector<double> basis,
                   std::vector<double> offset, const std::vector<Transition>& transitions,
                   std::vector<std::string> param_names)
    : dims_(dims), beta_(beta), shocks_(shocks), basis_(std::move(basis)), offset_(std::move(offset)),
      names_(std::move(param_names)) {
  if (dims_.players < 1 || dims_.states < 1 || dims_.params < 1)
    throw DimensionError("game needs at least one player, state and parameter");
  shocks_.check_actions(dims_.actions);
  if (!(beta_ >= 0.0 && beta_ < 1.0)) throw DimensionError("beta must lie in [0, 1)");
  joint_ = 1;
  radix_.resize(dims_.players);
  for (int j = 0; j < dims_.players; ++j) {
    radix_[j] = joint_;
    if (joint_ > (1 << 24) / dims_.actions) throw DimensionError("joint action space too large");
    joint_ *= dims_.actions;
  }
  const size_t cells = static_cast<size_t>(dims_.players) * dims_.states * joint_;
  if (basis_.size() != cells * dims_.params)
    throw DimensionError("utility_basis has " + std::to_string(basis_.size()) + " entries, expected " +
                         std::to_string(cells * dims_.params));
  for (double b : basis_)
    if (!std::isfinite(b)) throw DimensionError("utility_basis has non-finite entries");
  if (!offset_.empty()) {
    if (offset_.size() != cells)
      throw DimensionError("utility_offset has " + std::to_string(offset_.size()) + " entries, expected " +
                           std::to_string(cells));
    for (double b : offset_)
      if (!std::isfinite(b)) throw DimensionError("utility_offset has non-finite entries");
  }
  if (names_.empty())
    for (int k = 0; k < dims_.params; ++k) names_.push_back("theta_" + std::to_string(k + 1));
  if (static_cast<int>(names_.size()) != dims_.params) throw DimensionError("param_names length mismatch");

  // bucket transitions into CSR rows keyed by (x, joint); duplicates are summed
  const size_t rows = static_cast<size_t>(dims_.states) * joint_;
  std::vector<std::vector<Entry>> buckets(rows);
  for (const auto& t : transitions) {
    if (t.x < 0 || t.x >= dims_.states || t.next < 0 || t.next >= dims_.states || t.joint < 0 || t.joint >= joint_)
      throw DimensionError("transition triplet index out of range");
    if (!(t.prob >= 0.0) || !std::isfinite(t.prob)) throw DimensionError("transition probability negative or non-finite");
    if (t.prob == 0.0) continue;
    auto& b = buckets[static_cast<size_t>(t.x) * joint_ + t.joint];
    auto it = std::find_if(b.begin(), b.end(), [&](const Entry& e) { return e.next == t.next; });
    if (it == b.end())
      b.push_back({t.next, t.prob});
    else
      it->prob += t.prob;
  }
  row_start_.assign(rows + 1, 0);
  for (size_t r = 0; r < rows; ++r) {
    auto& b = buckets[r];
    std::sort(b.begin(), b.end(), [](const Entry& l, const Entry& q) { return l.next < q.next; });
    double s = 0.0;
    for (const auto& e : b) s += e.prob;
    if (std::abs(s - 1.0) > 1e-12)
      throw DimensionError("transitions: row (x=" + std::to_string(r / joint_) + ", joint=" + std::to_string(r % joint_) +
                           ") sums to " + std::to_string(s));
    entries_.insert(entries_.end(), b.begin(), b.end());
    row_start_[r + 1] = entries_.size();
  }
}

std::vector<Transition> GameSpec::transitions() const {
  std::vector<Transition> out;
  out.reserve(entries_.size());
  for (int x = 0; x < dims_.states; ++x)
    for (int c = 0; c < joint_; ++c)
      for (const auto& e : transition(x, c)) out.push_back({x, c, e.next, e.prob});
  return out;
}

double GameSpec::transition_density() const {
  return static_cast<double>(entries_.size()) / (static_cast<double>(dims_.states) * joint_ * dims_.states);
}

void GameSpec::add_symmetry(GameSymmetry s) {
  if (static_cast<int>(s.player_perm.size()) != dims_.players || static_cast<int>(s.state_perm.size()) != dims_.states)
    throw DimensionError("symmetry permutation has wrong length");
  auto is_perm = [](std::vector<int> p) {
    std::sort(p.begin(), p.end());
    for (size_t i = 0; i < p.size(); ++i)
      if (p[i] != static_cast<int>(i)) return false;
    return true;
  };
  if (!is_perm(s.player_perm) || !is_perm(s.state_perm)) throw DimensionError("symmetry is not a permutation");
  symmetries_.push_back(std::move(s));
}

CcpProfile choice_probs(const GameSpec& game, const ValueProfile& v) {
  CcpProfile P(v.num_players(), v.num_states(), v.num_actions());
  for (int j = 0; j < v.num_players(); ++j)
    for (int x = 0; x < v.num_states(); ++x) game.shocks().choice_probs(v.row_span(j, x), P.row_span(j, x));
  return P;
}

namespace {

void check_profile(const GameSpec& game, const CcpProfile& P) {
  if (P.num_players() != game.num_players() || P.num_states() != game.num_states() ||
      P.num_actions() != game.num_actions())
    throw DimensionError("CCP profile shape does not match the game");
}

}  // namespace

void rival_weights(const GameSpec& game, const CcpProfile& P, int j, int x, std::span<double> w) {
  const int J = game.num_players();
  w[0] = 1.0;
  int filled = 1;
  // build the product one player at a time, player 0 least significant
  for (int l = 0; l < J; ++l) {
    const int A = game.num_actions();
    for (int a = A - 1; a >= 0; --a) {
      const double p = (l == j) ? 1.0 : P(l, x, a);
      for (int c = 0; c < filled; ++c) w[a * filled + c] = w[c] * p;
    }
    filled *= A;
  }
}

Mat belief_weighted_utility_basis(const GameSpec& game, int j, const CcpProfile& P) {
  check_profile(game, P);
  const int X = game.num_states(), A = game.num_actions(), K = game.num_params(), C = game.num_joint();
  Mat out = Mat::Zero(static_cast<Eigen::Index>(X) * A, K);
  std::vector<double> w(C);
  for (int x = 0; x < X; ++x) {
    rival_weights(game, P, j, x, w);
    for (int c = 0; c < C; ++c) {
      const auto h = game.basis(j, x, c);
      auto row = out.row(x * A + game.action_of(c, j));
      for (int k = 0; k < K; ++k) row[k] += w[c] * h[k];
    }
  }
  return out;
}

Vec belief_weighted_utility_offset(const GameSpec& game, int j, const CcpProfile& P) {
  check_profile(game, P);
  const int X = game.num_states(), A = game.num_actions(), C = game.num_joint();
  Vec out = Vec::Zero(static_cast<Eigen::Index>(X) * A);
  if (!game.has_offset()) return out;
  std::vector<double> w(C);
  for (int x = 0; x < X; ++x) {
    rival_weights(game, P, j, x, w);
    for (int c = 0; c < C; ++c) out[x * A + game.action_of(c, j)] += w[c] * game.offset(j, x, c);
  }
  return out;
}

std::vector<SpMat> belief_weighted_transition(const GameSpec& game, int j, const CcpProfile& P) {
  check_profile(game, P);
  const int X = game.num_states(), A = game.num_actions(), C = game.num_joint();
  std::vector<std::vector<Eigen::Triplet<double>>> trip(A);
  std::vector<double> w(C);
  for (int x = 0; x < X; ++x) {
    rival_weights(game, P, j, x, w);
    for (int c = 0; c < C; ++c)
      for (const auto& e : game.transition(x, c)) trip[game.action_of(c, j)].emplace_back(x, e.next, w[c] * e.prob);
  }
  std::vector<SpMat> out;
  for (int a = 0; a < A; ++a) {
    SpMat m(X, X);
    m.setFromTriplets(trip[a].begin(), trip[a].end());
    out.push_back(std::move(m));
  }
  return out;
}

}  // namespace epl
