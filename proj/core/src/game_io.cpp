#include "epl/game_io.hpp"

#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

namespace epl {

using nlohmann::json;

namespace {

constexpr const char* kFormat = "epl-game/1";

const json& field(const json& doc, const char* name) {
  if (!doc.contains(name)) throw ParseError(std::string("game file: missing field '") + name + "'");
  return doc.at(name);
}

template <class T>
T get_as(const json& doc, const char* name) {
  try {
    return field(doc, name).get<T>();
  } catch (const json::exception& e) {
    throw ParseError(std::string("game file: field '") + name + "' has the wrong type (" + e.what() + ")");
  }
}

ShockSpec parse_shocks(const json& s) {
  if (!s.is_object()) throw ParseError("game file: field 'shocks' must be an object");
  const auto fam = get_as<std::string>(s, "family");
  try {
    if (fam == "logit") return ShockSpec::logit(s.value("scale", 1.0));
    if (fam == "probit") return ShockSpec::probit(s.value("variance", 0.5));
    if (fam == "approx_uniform") return ShockSpec::approx_uniform(s.value("alpha", 0.01));
  } catch (const DimensionError& e) {
    throw ParseError(std::string("game file: field 'shocks': ") + e.what());
  }
  throw ParseError("game file: field 'shocks.family' must be logit, probit or approx_uniform, got '" + fam + "'");
}

json shocks_json(const ShockSpec& s) {
  json out;
  out["family"] = s.name();
  if (auto* l = std::get_if<Logit>(&s.family())) out["scale"] = l->scale;
  if (auto* p = std::get_if<BinaryProbit>(&s.family())) out["variance"] = p->variance;
  if (auto* u = std::get_if<ApproxUniform>(&s.family())) out["alpha"] = u->alpha;
  return out;
}

}  // namespace

GameDocument parse_game_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("game file: ") + e.what());
  }
  if (!doc.is_object()) throw ParseError("game file: top level must be an object");
  if (doc.contains("format") && doc["format"] != kFormat)
    throw ParseError(std::string("game file: field 'format' must be '") + kFormat + "'");

  GameDims dims;
  dims.players = get_as<int>(doc, "num_players");
  dims.actions = get_as<int>(doc, "num_actions");
  dims.states = get_as<int>(doc, "num_states");
  dims.params = get_as<int>(doc, "num_params");
  const double beta = get_as<double>(doc, "beta");
  const ShockSpec shocks = parse_shocks(field(doc, "shocks"));
  auto basis = get_as<std::vector<double>>(doc, "utility_basis");
  std::vector<double> offset;
  if (doc.contains("utility_offset")) offset = get_as<std::vector<double>>(doc, "utility_offset");
  std::vector<std::string> names;
  if (doc.contains("param_names")) names = get_as<std::vector<std::string>>(doc, "param_names");

  std::vector<Transition> trans;
  const auto& tj = field(doc, "transitions");
  if (!tj.is_array()) throw ParseError("game file: field 'transitions' must be an array");
  for (size_t i = 0; i < tj.size(); ++i) {
    const auto& t = tj[i];
    if (!t.is_array() || t.size() != 4)
      throw ParseError("game file: field 'transitions[" + std::to_string(i) + "]' must be [x, joint, next, prob]");
    try {
      trans.push_back({t[0].get<int>(), t[1].get<int>(), t[2].get<int>(), t[3].get<double>()});
    } catch (const json::exception&) {
      throw ParseError("game file: field 'transitions[" + std::to_string(i) + "]' has non-numeric entries");
    }
  }

  std::optional<ThetaVec> theta;
  if (doc.contains("theta")) {
    auto t = get_as<std::vector<double>>(doc, "theta");
    if (static_cast<int>(t.size()) != dims.params) throw ParseError("game file: field 'theta' length != num_params");
    theta = Eigen::Map<const Vec>(t.data(), static_cast<Eigen::Index>(t.size()));
  }

  try {
    GameSpec game(dims, beta, shocks, std::move(basis), std::move(offset), trans, std::move(names));
    if (doc.contains("symmetries")) {
      for (const auto& s : doc["symmetries"])
        game.add_symmetry({s.at("players").get<std::vector<int>>(), s.at("states").get<std::vector<int>>()});
    }
    return GameDocument{std::move(game), theta};
  } catch (const DimensionError& e) {
    throw ParseError(std::string("game file: ") + e.what());
  } catch (const json::exception& e) {
    throw ParseError(std::string("game file: field 'symmetries': ") + e.what());
  }
}

std::string game_to_json(const GameSpec& game, const std::optional<ThetaVec>& theta) {
  json doc;
  doc["format"] = kFormat;
  doc["num_players"] = game.num_players();
  doc["num_actions"] = game.num_actions();
  doc["num_states"] = game.num_states();
  doc["num_params"] = game.num_params();
  doc["beta"] = game.beta();
  doc["param_names"] = game.param_names();
  doc["shocks"] = shocks_json(game.shocks());
  doc["utility_basis"] = game.raw_basis();
  if (game.has_offset()) doc["utility_offset"] = game.raw_offset();
  json tr = json::array();
  for (const auto& t : game.transitions()) tr.push_back({t.x, t.joint, t.next, t.prob});
  doc["transitions"] = std::move(tr);
  if (!game.symmetries().empty()) {
    json sy = json::array();
    for (const auto& s : game.symmetries()) sy.push_back({{"players", s.player_perm}, {"states", s.state_perm}});
    doc["symmetries"] = std::move(sy);
  }
  if (theta) doc["theta"] = std::vector<double>(theta->data(), theta->data() + theta->size());
  return doc.dump(1);
}

GameDocument load_game(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open game file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_game_json(ss.str());
}

void save_game(const std::filesystem::path& path, const GameSpec& game, const std::optional<ThetaVec>& theta) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write game file " + path.string());
  out << game_to_json(game, theta) << '\n';
}

}  // namespace epl
