#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "epl/game.hpp"

namespace epl {

struct GameDocument {
  GameSpec game;
  std::optional<ThetaVec> theta;  // optional true/default parameter vector
};

// JSON document, format tag "epl-game/1"
GameDocument parse_game_json(const std::string& text);
std::string game_to_json(const GameSpec& game, const std::optional<ThetaVec>& theta = std::nullopt);

GameDocument load_game(const std::filesystem::path& path);
void save_game(const std::filesystem::path& path, const GameSpec& game,
               const std::optional<ThetaVec>& theta = std::nullopt);

}  // namespace epl
