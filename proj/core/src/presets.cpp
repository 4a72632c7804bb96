#include "epl/presets.hpp"

#include <cmath>

namespace epl {

namespace {

constexpr int kAmPlayers = 5;
constexpr int kAmSizes = 5;
constexpr int kAmLagStates = 1 << kAmPlayers;

}  // namespace

GameSpec psd2008_game(double scrap_value, double beta, double variance) {
  const int J = 2, X = 4, C = 4, K = 3;
  std::vector<double> basis(static_cast<size_t>(J) * X * C * K, 0.0);
  std::vector<double> offset(static_cast<size_t>(J) * X * C, 0.0);
  std::vector<Transition> tr;
  for (int x = 0; x < X; ++x) {
    const int inc[2] = {x >> 1, x & 1};
    for (int c = 0; c < C; ++c) {
      const int a[2] = {c & 1, c >> 1};
      for (int j = 0; j < J; ++j) {
        const size_t cell = (static_cast<size_t>(j) * X + x) * C + c;
        if (a[j] == 1) {
          basis[cell * K + 0] = 1.0;
          basis[cell * K + 1] = a[1 - j];
          basis[cell * K + 2] = 1.0 - inc[j];
        } else {
          offset[cell] = scrap_value * inc[j];
        }
      }
      tr.push_back({x, c, 2 * a[0] + a[1], 1.0});
    }
  }
  GameSpec g(GameDims{J, 2, X, K}, beta, ShockSpec::probit(variance), std::move(basis), std::move(offset), tr,
             {"theta_M", "theta_C", "theta_EC"});
  // swapping the firms swaps the incumbency flags
  g.add_symmetry({{1, 0}, {0, 2, 1, 3}});
  return g;
}

ThetaVec psd2008_theta() {
  ThetaVec t(3);
  t << 1.2, -2.4, -0.2;
  return t;
}

Preset preset_psd2008(const std::string& label, int num_starts, std::uint64_t seed) {
  if (label != "i" && label != "ii" && label != "iii")
    throw DimensionError("psd2008 equilibrium label must be i, ii or iii, got '" + label + "'");
  GameSpec game = psd2008_game();
  const ThetaVec theta = psd2008_theta();
  const auto eqs = find_equilibria(game, theta, num_starts, seed);
  std::vector<EquilibriumRecord> cands;
  for (const auto& e : eqs) {
    const bool stable = e.npl_spectral_radius < 1.0;
    const bool match = (label == "i" && !e.symmetric && stable) || (label == "ii" && !e.symmetric && !stable) ||
                       (label == "iii" && e.symmetric && !stable);
    if (match) cands.push_back(e);
  }
  if (cands.empty()) throw NumericalError("no equilibrium matches the fingerprint of psd2008 (" + label + ")");
  Preset p{"psd2008-" + label, std::move(game), theta, cands.front(), StopRule::to_convergence(1e-6, 100),
           FirstStage::Frequency, cands};
  p.equilibrium.label = label;
  return p;
}

Mat Am2007Config::default_size_transition() {
  Mat m(5, 5);
  m << 0.8, 0.2, 0.0, 0.0, 0.0,  //
      0.2, 0.6, 0.2, 0.0, 0.0,   //
      0.0, 0.2, 0.6, 0.2, 0.0,   //
      0.0, 0.0, 0.2, 0.6, 0.2,   //
      0.0, 0.0, 0.0, 0.2, 0.8;
  return m;
}

int am2007_state(int size_index, unsigned lag_bits) { return size_index * kAmLagStates + static_cast<int>(lag_bits); }

GameSpec am2007_game(const Am2007Config& cfg) {
  const Mat T = cfg.size_transition.size() ? cfg.size_transition : Am2007Config::default_size_transition();
  if (T.rows() != kAmSizes || T.cols() != kAmSizes) throw DimensionError("market-size transition must be 5 x 5");
  const int J = kAmPlayers, X = kAmSizes * kAmLagStates, C = kAmLagStates, K = 8;
  std::vector<double> basis(static_cast<size_t>(J) * X * C * K, 0.0);
  std::vector<Transition> tr;
  for (int s = 0; s < kAmSizes; ++s)
    for (unsigned lag = 0; lag < static_cast<unsigned>(kAmLagStates); ++lag) {
      const int x = am2007_state(s, lag);
      for (int c = 0; c < C; ++c) {
        const int active = __builtin_popcount(static_cast<unsigned>(c));
        for (int j = 0; j < J; ++j) {
          if (((c >> j) & 1) == 0) continue;
          double* h = basis.data() + ((static_cast<size_t>(j) * X + x) * C + c) * K;
          h[j] = 1.0;
          h[5] = s + 1.0;
          h[6] = -std::log(1.0 + (active - 1));
          h[7] = -(1.0 - ((lag >> j) & 1u));
        }
        for (int s2 = 0; s2 < kAmSizes; ++s2)
          if (T(s, s2) > 0.0) tr.push_back({x, c, am2007_state(s2, static_cast<unsigned>(c)), T(s, s2)});
      }
    }
  return GameSpec(GameDims{J, 2, X, K}, cfg.beta, ShockSpec::logit(1.0), std::move(basis), {}, tr,
                  {"theta_FC1", "theta_FC2", "theta_FC3", "theta_FC4", "theta_FC5", "theta_RS", "theta_RN", "theta_EC"});
}

ThetaVec am2007_theta(int experiment) {
  static const double rn[] = {1.0, 2.5, 4.0};
  if (experiment < 1 || experiment > 3) throw DimensionError("am2007 experiment must be 1, 2 or 3");
  ThetaVec t(8);
  t << -1.9, -1.8, -1.7, -1.6, -1.5, 1.0, rn[experiment - 1], 1.0;
  return t;
}

Preset preset_am2007(int experiment, const Am2007Config& cfg, bool spectral_radius) {
  GameSpec game = am2007_game(cfg);
  const ThetaVec theta = am2007_theta(experiment);
  NewtonOptions opts;
  opts.spectral_radius = false;
  const ValueProfile zero(game.num_players(), game.num_states(), game.num_actions());
  EquilibriumRecord eq;
  try {
    eq = solve_equilibrium_newton(game, theta, zero, opts);
  } catch (const NumericalError&) {
    // continuation in the competition parameter from the mild case
    ThetaVec t = am2007_theta(1);
    eq = solve_equilibrium_newton(game, t, zero, opts);
    const int steps = 20;
    for (int i = 1; i <= steps; ++i) {
      t[6] = am2007_theta(1)[6] + (theta[6] - am2007_theta(1)[6]) * i / steps;
      eq = solve_equilibrium_newton(game, t, eq.v_star, opts);
    }
  }
  if (spectral_radius) eq.npl_spectral_radius = npl_spectral_radius(game, theta, eq.p_star);
  eq.label = "exp" + std::to_string(experiment);
  StopRule stop = StopRule::to_convergence(1e-2 / 8.0, 100);
  stop.ccp_tol = 1e-2 / 8.0;
  Preset p{"am2007-" + std::to_string(experiment), std::move(game), theta, eq, stop, FirstStage::LogitAm2007, {eq}};
  return p;
}

CcpProfile am2007_first_stage(const GameSpec& game, const Dataset& data, double clip) {
  const int J = game.num_players(), X = game.num_states(), A = game.num_actions();
  if (J != kAmPlayers || X != kAmSizes * kAmLagStates || A != 2)
    throw DimensionError("am2007 first stage needs the five-firm game");
  constexpr int F = 10;
  LinearValues model{Mat::Zero(game.stacked_size(), F * J), Vec::Zero(game.stacked_size())};
  for (int j = 0; j < J; ++j)
    for (int x = 0; x < X; ++x) {
      const int s = x / kAmLagStates;
      const unsigned lag = static_cast<unsigned>(x % kAmLagStates);
      const double own = (lag >> j) & 1u;
      const double rivals = __builtin_popcount(lag) - own;
      const double size = s + 1.0;
      auto row = model.M.row((static_cast<Eigen::Index>(j) * X + x) * A + 1).segment(F * j, F);
      row[s] = 1.0;
      row[5] = own;
      row[6] = rivals;
      row[7] = own * rivals;
      row[8] = size * own;
      row[9] = size * rivals;
    }
  const Vec counts = cell_counts(game, data);
  try {
    const PseudoLikelihood pl(game, model, counts);
    const ConcaveResult r = pl.maximize(ThetaVec::Zero(F * J));
    if (!r.converged) return frequency_ccp(game, data, clip);
    const ValueProfile v(J, X, A, model.at(r.theta));
    CcpProfile P = choice_probs(game, v);
    for (int j = 0; j < J; ++j)
      for (int x = 0; x < X; ++x) {
        auto row = P.row(j, x);
        row = row.cwiseMax(clip).cwiseMin(1.0 - clip);
        row /= row.sum();
      }
    return P;
  } catch (const Error&) {
    return frequency_ccp(game, data, clip);
  }
}

Preset preset_psd2010(double alpha) {
  const StaticGame sg(alpha, -2.0);
  GameSpec game = sg.game();
  ThetaVec theta(1);
  theta << sg.theta_true();
  const auto eqs = find_equilibria(game, theta, 200, 2010);
  const double target = sg.symmetric_equilibrium(sg.theta_true());
  for (const auto& e : eqs)
    if (e.symmetric && std::abs(e.p_star(0, 0, 1) - target) < 1e-8) {
      StopRule stop = StopRule::to_convergence(1e-6, 20);
      return Preset{"psd2010", std::move(game), theta, e, stop, FirstStage::Frequency, eqs};
    }
  throw NumericalError("static game: symmetric equilibrium P = 1/3 not found");
}

CcpProfile first_stage_ccp(const Preset& p, const Dataset& data) {
  return p.first_stage == FirstStage::LogitAm2007 ? am2007_first_stage(p.game, data) : frequency_ccp(p.game, data);
}

std::vector<std::string> preset_ids() {
  return {"psd2008-i", "psd2008-ii", "psd2008-iii", "am2007-1", "am2007-2", "am2007-3", "psd2010"};
}

Preset make_preset(const std::string& id) {
  if (id.rfind("psd2008-", 0) == 0) return preset_psd2008(id.substr(8));
  if (id.rfind("am2007-", 0) == 0) {
    const std::string e = id.substr(7);
    if (e == "1" || e == "2" || e == "3") return preset_am2007(std::stoi(e));
  }
  if (id == "psd2010") return preset_psd2010();
  throw DimensionError("unknown preset '" + id + "'");
}

}  // namespace epl
