#include "cli.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "epl/dataset.hpp"
#include "epl/equilibrium.hpp"
#include "epl/error.hpp"
#include "epl/estimation.hpp"
#include "epl/game_io.hpp"
#include "epl/montecarlo.hpp"
#include "epl/presets.hpp"
#include "epl/simulate.hpp"

namespace epl::cli {

namespace {

std::string num(double x) {
  std::ostringstream o;
  o << std::setprecision(17) << x;
  return o.str();
}

std::string hex64(std::uint64_t h) {
  std::ostringstream o;
  o << std::hex << std::setw(16) << std::setfill('0') << h;
  return o.str();
}

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

// writes to the file when a path is given, otherwise to out
template <class F>
void with_output(const std::string& path, std::ostream& out, F&& body) {
  if (path.empty() || path == "-") {
    body(out);
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write " + path);
  body(f);
  if (!f) throw IoError("write failed for " + path);
}

ThetaVec resolve_theta(const GameDocument& doc, const std::vector<double>& flag) {
  if (!flag.empty()) {
    if (static_cast<int>(flag.size()) != doc.game.num_params())
      throw DimensionError("--theta has " + std::to_string(flag.size()) + " values, game has " +
                           std::to_string(doc.game.num_params()) + " parameters");
    return Eigen::Map<const Vec>(flag.data(), static_cast<Eigen::Index>(flag.size()));
  }
  if (!doc.theta) throw DimensionError("no theta: pass --theta or add \"theta\" to the game file");
  return *doc.theta;
}

void write_equilibria_csv(std::ostream& o, const GameSpec& g, const std::vector<EquilibriumRecord>& eqs) {
  o << "label";
  for (int j = 0; j < g.num_players(); ++j)
    for (int x = 0; x < g.num_states(); ++x)
      for (int a = 0; a < g.num_actions(); ++a) o << ",p_" << j << '_' << x << '_' << a;
  o << ",residual,spectral_radius,symmetric\n";
  for (const auto& e : eqs) {
    o << e.label;
    for (Eigen::Index i = 0; i < e.p_star.size(); ++i) o << ',' << num(e.p_star.flat()[i]);
    o << ',' << num(e.residual_norm) << ',' << num(e.npl_spectral_radius) << ',' << (e.symmetric ? 1 : 0) << '\n';
  }
}

struct SolveOpts {
  std::string game, out;
  std::vector<double> theta, init_ccp;
  int starts = 50;
  std::uint64_t seed = 1;
  int threads = 1;
};

std::vector<EquilibriumRecord> solve_for(const GameDocument& doc, const ThetaVec& theta, const SolveOpts& o) {
  if (!o.init_ccp.empty()) {
    const GameSpec& g = doc.game;
    if (static_cast<Eigen::Index>(o.init_ccp.size()) != g.stacked_size())
      throw DimensionError("--init-ccp needs " + std::to_string(g.stacked_size()) + " values");
    CcpProfile P(g.num_players(), g.num_states(), g.num_actions(),
                 Eigen::Map<const Vec>(o.init_ccp.data(), static_cast<Eigen::Index>(o.init_ccp.size())));
    validate_ccp(P);
    ValueProfile v(g.num_players(), g.num_states(), g.num_actions());
    for (int j = 0; j < g.num_players(); ++j)
      for (int x = 0; x < g.num_states(); ++x) g.shocks().invert(P.row_span(j, x), v.row_span(j, x));
    EquilibriumRecord e = solve_equilibrium_newton(g, theta, v);
    e.label = "eq1";
    return {e};
  }
  SearchOptions so;
  so.threads = o.threads;
  return find_equilibria(doc.game, theta, o.starts, o.seed, so);
}

int cmd_solve(const SolveOpts& o, std::ostream& out) {
  const GameDocument doc = load_game(o.game);
  const ThetaVec theta = resolve_theta(doc, o.theta);
  const auto eqs = solve_for(doc, theta, o);
  with_output(o.out, out, [&](std::ostream& f) { write_equilibria_csv(f, doc.game, eqs); });
  return eqs.empty() ? kNumerical : kOk;
}

struct SimulateOpts {
  SolveOpts solve;
  int equilibrium = 1;
  int N = 1000;
  int T = 1;
  std::uint64_t data_seed = 1;
};

int cmd_simulate(const SimulateOpts& o, std::ostream& out) {
  const GameDocument doc = load_game(o.solve.game);
  const ThetaVec theta = resolve_theta(doc, o.solve.theta);
  const auto eqs = solve_for(doc, theta, o.solve);
  if (o.equilibrium < 1 || o.equilibrium > static_cast<int>(eqs.size()))
    throw DimensionError("--equilibrium " + std::to_string(o.equilibrium) + " is out of range; found " +
                         std::to_string(eqs.size()) + " equilibria");
  const Dataset d = simulate_dataset(doc.game, eqs[o.equilibrium - 1], o.N, o.T, o.data_seed);
  with_output(o.solve.out, out, [&](std::ostream& f) { write_dataset_csv(f, d); });
  return kOk;
}

struct EstimateOpts {
  std::string game, data, out;
  std::vector<double> theta;  // unused by the estimators; kept out of the config
  std::string estimator = "epl";
  std::string k = "inf";
  double tol = 1e-6;
  int max_iter = 100;
  std::uint64_t seed = 1;
  std::string variant = "frozen";
  int starts = 10;
  double clip = 1e-3;
  bool no_se = false;
};

void write_trace_csv(std::ostream& f, const EstimationTrace& tr, const std::vector<std::string>& names, int K) {
  f << "k";
  for (int i = 0; i < K; ++i) f << ',' << (i < static_cast<int>(names.size()) ? names[i] : "theta" + std::to_string(i + 1));
  f << ",loglik,step_norm,ccp_change,seconds,inner_iterations\n";
  for (const auto& r : tr.records) {
    f << r.k;
    for (int i = 0; i < K; ++i) f << ',' << num(r.theta[i]);
    f << ',' << num(r.loglik) << ',' << num(r.step_norm) << ',' << num(r.ccp_change) << ',' << num(r.seconds) << ','
      << r.inner_iterations << '\n';
  }
}

int cmd_estimate(const EstimateOpts& o, std::ostream& out) {
  if (o.estimator != "npl" && o.estimator != "epl" && o.estimator != "single-agent" && o.estimator != "mle")
    throw DimensionError("unknown estimator '" + o.estimator + "'");
  if (o.variant != "frozen" && o.variant != "exact") throw DimensionError("unknown variant '" + o.variant + "'");
  StopRule rule = StopRule::to_convergence(o.tol, o.max_iter);
  if (o.k != "inf") {
    int k = 0;
    try {
      k = std::stoi(o.k);
    } catch (const std::exception&) {
      throw DimensionError("--k must be a positive integer or inf");
    }
    if (k < 1) throw DimensionError("--k must be a positive integer or inf");
    rule = StopRule::fixed(k);
  }
  const std::string game_text = read_file(o.game);
  const GameDocument doc = parse_game_json(game_text);
  const GameSpec& g = doc.game;
  const Dataset data = read_dataset_csv(o.data);
  validate_dataset(g, data);
  const CcpProfile P0 = frequency_ccp(g, data, o.clip);

  std::ostringstream cfg;
  cfg << "estimator=" << o.estimator << ";k=" << o.k << ";tol=" << num(o.tol) << ";max_iter=" << o.max_iter
      << ";seed=" << o.seed << ";variant=" << o.variant << ";starts=" << o.starts << ";clip=" << num(o.clip)
      << ";game=" << hex64(fnv1a64(game_text)) << ";data=" << hex64(fnv1a64(read_file(o.data)));
  const std::uint64_t hash = fnv1a64(cfg.str());

  EstimationTrace tr;
  std::optional<ValueProfile> v_hat;
  if (o.estimator == "npl") {
    tr = k_npl(g, data, P0, rule);
  } else if (o.estimator == "single-agent") {
    tr = single_agent_epl(g, data, P0, rule);
  } else if (o.estimator == "epl") {
    const CompoundParam g0 = initial_gamma(g, data, P0);
    tr = o.variant == "exact" ? k_epl(g, data, g0, rule, ExactNewton{}) : k_epl(g, data, g0, rule);
    if (!tr.records.empty()) v_hat = ValueProfile(g.num_players(), g.num_states(), g.num_actions(), tr.last().aux);
  } else {
    MultistartResult m = mle_multistart(g, data, o.starts, o.seed);
    if (m.best_index < 0) throw NumericalError("no multistart sequence converged");
    tr = m.best;
    v_hat = m.v_refined;
  }
  const int K = g.num_params();
  Vec se = Vec::Constant(K, std::numeric_limits<double>::quiet_NaN());
  std::string se_note;
  if (!tr.records.empty() && !o.no_se) {
    try {
      if (!v_hat) {
        const CcpProfile P(g.num_players(), g.num_states(), g.num_actions(), tr.last().aux);
        v_hat = npl_values(g, tr.theta(), P);
      }
      se = asymptotic_se(g, data, CompoundParam{tr.theta(), *v_hat});
    } catch (const Error& e) {
      se_note = e.what();
    }
  }
  nlohmann::ordered_json j;
  j["format"] = "epl-estimate/1";
  j["estimator"] = o.estimator;
  j["k"] = o.k;
  j["config_hash"] = hex64(hash);
  j["param_names"] = g.param_names();
  auto arr = [](const Vec& x) {
    nlohmann::json a = nlohmann::json::array();
    for (Eigen::Index i = 0; i < x.size(); ++i) a.push_back(std::isfinite(x[i]) ? nlohmann::json(x[i]) : nlohmann::json());
    return a;
  };
  j["theta"] = tr.records.empty() ? nlohmann::json() : arr(tr.theta());
  j["se"] = arr(se);
  if (!se_note.empty()) j["se_error"] = se_note;
  j["loglik"] = tr.records.empty() ? nlohmann::json() : nlohmann::json(tr.last().loglik);
  j["iterations"] = tr.iterations();
  j["converged"] = tr.converged;
  j["seconds"] = tr.total_seconds();
  if (!tr.failure.empty()) j["failure"] = tr.failure;

  if (!o.out.empty()) {
    std::error_code ec;
    std::filesystem::create_directories(o.out, ec);
    if (ec) throw IoError("cannot create " + o.out + ": " + ec.message());
    with_output((std::filesystem::path(o.out) / "trace.csv").string(), out,
                [&](std::ostream& f) { write_trace_csv(f, tr, g.param_names(), K); });
    with_output((std::filesystem::path(o.out) / "estimate.json").string(), out,
                [&](std::ostream& f) { f << std::setprecision(17) << j.dump(2) << '\n'; });
  }
  out << j.dump(2) << '\n';
  if (!tr.failure.empty() || tr.records.empty()) return kNumerical;
  return kOk;
}

struct McOpts {
  std::string preset = "psd2008-i", out;
  int N = 1000, T = 1, reps = 200, threads = 1, mle_starts = 10;
  std::uint64_t seed = 20240601;
  std::vector<std::string> estimators = {"1-npl", "inf-npl", "1-epl", "inf-epl"};
  std::optional<int> max_iter;
  std::optional<double> tol;
};

int cmd_mc(const McOpts& o, std::ostream& out) {
  ExperimentConfig cfg;
  cfg.preset = o.preset;
  cfg.N = o.N;
  cfg.T = o.T;
  cfg.replications = o.reps;
  cfg.seed = o.seed;
  cfg.estimators = o.estimators;
  cfg.threads = o.threads;
  cfg.mle_starts = o.mle_starts;
  if (o.max_iter || o.tol) {
    StopRule r = o.preset.rfind("am2007", 0) == 0 ? StopRule::to_convergence(1e-2 / 8, 100) : StopRule::to_convergence();
    if (o.preset.rfind("am2007", 0) == 0) r.ccp_tol = 1e-2 / 8;
    if (o.max_iter) r.max_iter = *o.max_iter;
    if (o.tol) r.theta_tol = *o.tol;
    cfg.stop = r;
  }
  const ExperimentResult res = run_replications(cfg);
  if (!o.out.empty()) emit_tables(res, o.out);
  out << format_table(res);
  return kOk;
}

int cmd_preset(const std::string& id, const std::string& path, bool list, std::ostream& out) {
  if (list) {
    for (const auto& p : preset_ids()) out << p << '\n';
    return kOk;
  }
  if (id.empty()) throw DimensionError("preset needs --id or --list");
  if (id == "psd2010") {
    const StaticGame sg;
    const GameSpec g = sg.game();
    with_output(path, out, [&](std::ostream& f) { f << game_to_json(g, ThetaVec::Constant(1, sg.theta_true())) << '\n'; });
    return kOk;
  }
  GameSpec g = id.rfind("psd2008", 0) == 0 ? psd2008_game() : am2007_game();
  ThetaVec t;
  if (id.rfind("psd2008-", 0) == 0)
    t = psd2008_theta();
  else if (id == "am2007-1" || id == "am2007-2" || id == "am2007-3")
    t = am2007_theta(id.back() - '0');
  else
    throw DimensionError("unknown preset '" + id + "'");
  with_output(path, out, [&](std::ostream& f) { f << game_to_json(g, t) << '\n'; });
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"estimation of dynamic discrete games by k-step pseudo-likelihood"};
  app.require_subcommand(1);
  app.set_config("--config", "", "TOML config file; flags given on the command line take precedence");
  const int hw = std::max(1u, std::thread::hardware_concurrency());

  SolveOpts solve;
  solve.threads = hw;
  auto add_solve = [](CLI::App* c, SolveOpts& s) {
    c->add_option("--game", s.game, "game file")->required()->check(CLI::ExistingFile);
    c->add_option("--theta", s.theta, "parameter vector, comma separated")->delimiter(',');
    c->add_option("--starts", s.starts, "random Newton starts")->check(CLI::PositiveNumber);
    c->add_option("--seed", s.seed, "seed for the starts");
    c->add_option("--threads", s.threads, "worker threads")->check(CLI::PositiveNumber);
    c->add_option("--init-ccp", s.init_ccp, "solve once from these stacked CCPs instead of random starts")
        ->delimiter(',');
  };
  auto* solve_cmd = app.add_subcommand("solve", "find equilibria and write them as CSV");
  solve_cmd->alias("equilibria");
  add_solve(solve_cmd, solve);
  solve_cmd->add_option("--out", solve.out, "output CSV (default stdout)");

  SimulateOpts sim;
  sim.solve.threads = hw;
  auto* sim_cmd = app.add_subcommand("simulate", "simulate a dataset from an equilibrium");
  add_solve(sim_cmd, sim.solve);
  sim_cmd->add_option("--equilibrium", sim.equilibrium, "1-based index into the solve output");
  sim_cmd->add_option("--n", sim.N, "markets")->check(CLI::PositiveNumber);
  sim_cmd->add_option("--t", sim.T, "periods per market")->check(CLI::PositiveNumber);
  sim_cmd->add_option("--data-seed", sim.data_seed, "seed for the simulated data");
  sim_cmd->add_option("--out", sim.solve.out, "output CSV (default stdout)");

  EstimateOpts est;
  auto* est_cmd = app.add_subcommand("estimate", "estimate theta from a dataset");
  est_cmd->add_option("--game", est.game, "game file")->required()->check(CLI::ExistingFile);
  est_cmd->add_option("--data", est.data, "dataset CSV")->required()->check(CLI::ExistingFile);
  est_cmd->add_option("--estimator", est.estimator, "npl, epl, single-agent or mle");
  est_cmd->add_option("--k", est.k, "number of steps or inf");
  est_cmd->add_option("--tol", est.tol, "sup-norm tolerance on theta");
  est_cmd->add_option("--max-iter", est.max_iter, "iteration cap")->check(CLI::PositiveNumber);
  est_cmd->add_option("--seed", est.seed, "seed for multistart");
  est_cmd->add_option("--variant", est.variant, "frozen or exact");
  est_cmd->add_option("--starts", est.starts, "multistart count for mle")->check(CLI::PositiveNumber);
  est_cmd->add_option("--clip", est.clip, "frequency CCP clip");
  est_cmd->add_flag("--no-se", est.no_se, "skip standard errors");
  est_cmd->add_option("--out", est.out, "directory for trace.csv and estimate.json");

  McOpts mc;
  mc.threads = hw;
  std::optional<int> mc_max_iter;
  std::optional<double> mc_tol;
  auto* mc_cmd = app.add_subcommand("mc", "run a Monte Carlo study on a preset");
  mc_cmd->add_option("--preset", mc.preset, "preset id")->check(CLI::IsMember(preset_ids()));
  mc_cmd->add_option("--n", mc.N, "markets per dataset")->check(CLI::PositiveNumber);
  mc_cmd->add_option("--t", mc.T, "periods per market")->check(CLI::PositiveNumber);
  mc_cmd->add_option("--reps", mc.reps, "replications")->check(CLI::PositiveNumber);
  mc_cmd->add_option("--seed", mc.seed, "master seed");
  mc_cmd->add_option("--estimators", mc.estimators, "e.g. 1-npl,inf-npl,1-epl,inf-epl,mle")->delimiter(',');
  mc_cmd->add_option("--threads", mc.threads, "worker threads")->check(CLI::PositiveNumber);
  mc_cmd->add_option("--mle-starts", mc.mle_starts, "multistart count for mle")->check(CLI::PositiveNumber);
  mc_cmd->add_option("--max-iter", mc_max_iter, "override the preset iteration cap");
  mc_cmd->add_option("--tol", mc_tol, "override the preset theta tolerance");
  mc_cmd->add_option("--out", mc.out, "directory for tables, traces and manifest");

  std::string preset_id, preset_out;
  bool preset_list = false;
  auto* preset_cmd = app.add_subcommand("preset", "write a preset game file");
  preset_cmd->add_option("--id", preset_id, "preset id");
  preset_cmd->add_option("--out", preset_out, "output game file (default stdout)");
  preset_cmd->add_flag("--list", preset_list, "list preset ids");

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    // a missing or unreadable config file is an input problem, not a usage one
    const bool io = dynamic_cast<const CLI::FileError*>(&e) != nullptr ||
                    (e.get_name() == "ValidationError" && std::string(e.what()).find("File does not exist") != std::string::npos);
    err << "error: " << e.what() << '\n';
    return io ? kIo : kUsage;
  }
  try {
    if (solve_cmd->parsed()) return cmd_solve(solve, out);
    if (sim_cmd->parsed()) return cmd_simulate(sim, out);
    if (est_cmd->parsed()) return cmd_estimate(est, out);
    if (mc_cmd->parsed()) {
      mc.max_iter = mc_max_iter;
      mc.tol = mc_tol;
      return cmd_mc(mc, out);
    }
    if (preset_cmd->parsed()) return cmd_preset(preset_id, preset_out, preset_list, out);
  } catch (const ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kIo;
  } catch (const IoError& e) {
    err << "error: " << e.what() << '\n';
    return kIo;
  } catch (const DimensionError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kNumerical;
  }
  return kUsage;
}

}  // namespace epl::cli
