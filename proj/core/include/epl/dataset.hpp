#pragma once

#include <filesystem>
#include <vector>

#include "epl/game.hpp"

namespace epl {

struct Dataset {
  int num_players = 0;
  std::vector<int> market;
  std::vector<int> period;
  std::vector<int> state;
  std::vector<int> actions;  // row-major, num_players per observation

  size_t size() const { return state.size(); }
  int action(size_t i, int j) const { return actions[i * num_players + j]; }
  int num_markets() const;
  int num_periods() const;
  void push(int m, int t, int x, std::span<const int> a);
};

// throws DimensionError naming the first offending row
void validate_dataset(const GameSpec& game, const Dataset& data);

// n[j][x][a], same stacking as profiles
Vec cell_counts(const GameSpec& game, const Dataset& data);

CcpProfile frequency_ccp(const GameSpec& game, const Dataset& data, double clip = 1e-3);

// header: market,period,state,a_1..a_J; states and actions are 0-based
Dataset read_dataset_csv(const std::filesystem::path& path);
void write_dataset_csv(const std::filesystem::path& path, const Dataset& data);
void write_dataset_csv(std::ostream& out, const Dataset& data);

}  // namespace epl
