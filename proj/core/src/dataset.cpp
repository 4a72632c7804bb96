#include "epl/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

namespace epl {

int Dataset::num_markets() const { return static_cast<int>(std::set<int>(market.begin(), market.end()).size()); }

int Dataset::num_periods() const { return static_cast<int>(std::set<int>(period.begin(), period.end()).size()); }

void Dataset::push(int m, int t, int x, std::span<const int> a) {
  if (static_cast<int>(a.size()) != num_players) throw DimensionError("action vector length != num_players");
  market.push_back(m);
  period.push_back(t);
  state.push_back(x);
  actions.insert(actions.end(), a.begin(), a.end());
}

void validate_dataset(const GameSpec& game, const Dataset& data) {
  if (data.num_players != game.num_players())
    throw DimensionError("dataset has " + std::to_string(data.num_players) + " players, game has " +
                         std::to_string(game.num_players()));
  if (data.size() == 0) throw DimensionError("dataset is empty");
  if (data.actions.size() != data.size() * data.num_players || data.market.size() != data.size() ||
      data.period.size() != data.size())
    throw DimensionError("dataset columns have inconsistent lengths");
  for (size_t i = 0; i < data.size(); ++i) {
    if (data.state[i] < 0 || data.state[i] >= game.num_states())
      throw DimensionError("dataset row " + std::to_string(i + 1) + ": state out of range");
    for (int j = 0; j < data.num_players; ++j)
      if (data.action(i, j) < 0 || data.action(i, j) >= game.num_actions())
        throw DimensionError("dataset row " + std::to_string(i + 1) + ": action out of range");
  }
}

Vec cell_counts(const GameSpec& game, const Dataset& data) {
  validate_dataset(game, data);
  const int X = game.num_states(), A = game.num_actions();
  Vec n = Vec::Zero(game.stacked_size());
  for (size_t i = 0; i < data.size(); ++i)
    for (int j = 0; j < data.num_players; ++j) n[(static_cast<Eigen::Index>(j) * X + data.state[i]) * A + data.action(i, j)] += 1.0;
  return n;
}

CcpProfile frequency_ccp(const GameSpec& game, const Dataset& data, double clip) {
  const int J = game.num_players(), X = game.num_states(), A = game.num_actions();
  if (!(clip > 0.0 && clip * A < 1.0)) throw DimensionError("clip must lie in (0, 1/|A|)");
  const Vec n = cell_counts(game, data);
  CcpProfile P(J, X, A);
  for (int j = 0; j < J; ++j)
    for (int x = 0; x < X; ++x) {
      const double tot = n.segment(P.index(j, x, 0), A).sum();
      auto row = P.row(j, x);
      if (tot == 0.0)
        row.setConstant(1.0 / A);
      else
        row = n.segment(P.index(j, x, 0), A) / tot;
      row = row.cwiseMax(clip).cwiseMin(1.0 - clip * (A - 1));
      row /= row.sum();
    }
  return P;
}

namespace {

int parse_int(const std::string& s, size_t line, const std::string& col) {
  int v = 0;
  const auto* b = s.data();
  const auto* e = s.data() + s.size();
  while (b < e && *b == ' ') ++b;
  while (e > b && (e[-1] == ' ' || e[-1] == '\r')) --e;
  auto [p, ec] = std::from_chars(b, e, v);
  if (ec != std::errc() || p != e)
    throw ParseError("dataset line " + std::to_string(line) + ", column '" + col + "': not an integer: '" + s + "'");
  return v;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

Dataset read_dataset_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open dataset " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw ParseError("dataset is empty: " + path.string());
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split(line);
  if (header.size() < 4 || header[0] != "market" || header[1] != "period" || header[2] != "state")
    throw ParseError("dataset line 1: header must be market,period,state,a_1..a_J");
  Dataset d;
  d.num_players = static_cast<int>(header.size()) - 3;
  for (int j = 0; j < d.num_players; ++j)
    if (header[3 + j] != "a_" + std::to_string(j + 1))
      throw ParseError("dataset line 1: expected column 'a_" + std::to_string(j + 1) + "', got '" + header[3 + j] + "'");
  std::vector<int> a(d.num_players);
  size_t ln = 1;
  while (std::getline(in, line)) {
    ++ln;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split(line);
    if (cells.size() != header.size())
      throw ParseError("dataset line " + std::to_string(ln) + ": expected " + std::to_string(header.size()) +
                       " fields, got " + std::to_string(cells.size()));
    for (int j = 0; j < d.num_players; ++j) a[j] = parse_int(cells[3 + j], ln, header[3 + j]);
    d.push(parse_int(cells[0], ln, "market"), parse_int(cells[1], ln, "period"), parse_int(cells[2], ln, "state"), a);
  }
  return d;
}

void write_dataset_csv(std::ostream& out, const Dataset& data) {
  out << "market,period,state";
  for (int j = 0; j < data.num_players; ++j) out << ",a_" << (j + 1);
  out << '\n';
  for (size_t i = 0; i < data.size(); ++i) {
    out << data.market[i] << ',' << data.period[i] << ',' << data.state[i];
    for (int j = 0; j < data.num_players; ++j) out << ',' << data.action(i, j);
    out << '\n';
  }
}

void write_dataset_csv(const std::filesystem::path& path, const Dataset& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write dataset " + path.string());
  write_dataset_csv(out, data);
}

}  // namespace epl
