#pragma once

#include <optional>
#include <string>
#include <vector>

#include "epl/dataset.hpp"
#include "epl/equilibrium.hpp"
#include "epl/estimation.hpp"
#include "epl/static_game.hpp"

namespace epl {

enum class FirstStage { Frequency, LogitAm2007 };

struct Preset {
  std::string id;
  GameSpec game;
  ThetaVec theta;
  EquilibriumRecord equilibrium;
  StopRule stop;
  FirstStage first_stage = FirstStage::Frequency;
  // every equilibrium that matched the requested fingerprint
  std::vector<EquilibriumRecord> candidates;
};

// two-firm entry game, states (x1, x2) indexed 2 x1 + x2, estimating (theta_M, theta_C, theta_EC)
GameSpec psd2008_game(double scrap_value = 0.1, double beta = 0.9, double variance = 0.5);
ThetaVec psd2008_theta();
// all equilibria at theta*, classified; label is "i", "ii" or "iii"
Preset preset_psd2008(const std::string& label, int num_starts = 400, std::uint64_t seed = 2008);

struct Am2007Config {
  double beta = 0.95;
  Mat size_transition;  // 5 x 5, row-stochastic; empty means the shipped default
  static Mat default_size_transition();
};

// five-firm entry game with 160 states, estimating 8 parameters
GameSpec am2007_game(const Am2007Config& cfg = {});
ThetaVec am2007_theta(int experiment);
Preset preset_am2007(int experiment, const Am2007Config& cfg = {}, bool spectral_radius = true);
// per-player logit on market-size dummies, own lag, rival lag count and their interactions
CcpProfile am2007_first_stage(const GameSpec& game, const Dataset& data, double clip = 1e-3);
int am2007_state(int size_index, unsigned lag_bits);

// GameSpec form of the static game at theta* = -2: equilibria via find_equilibria
Preset preset_psd2010(double alpha = 0.01);

CcpProfile first_stage_ccp(const Preset& p, const Dataset& data);

// ids: psd2008-i, psd2008-ii, psd2008-iii, am2007-1, am2007-2, am2007-3, psd2010
Preset make_preset(const std::string& id);
std::vector<std::string> preset_ids();

}  // namespace epl
