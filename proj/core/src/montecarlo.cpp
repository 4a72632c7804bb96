#include "epl/montecarlo.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "epl/error.hpp"
#include "epl/game_io.hpp"
#include "epl/rng.hpp"
#include "epl/simulate.hpp"
#include "epl/static_game.hpp"

namespace epl {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

double quantile(std::vector<double> xs, double q) {
  if (xs.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(xs.begin(), xs.end());
  const double pos = q * (xs.size() - 1);
  const auto lo = static_cast<size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, xs.size() - 1);
  return xs[lo] + (pos - lo) * (xs[hi] - xs[lo]);
}

// pairwise summation keeps the means independent of accumulation grouping
double pairwise_sum(const double* x, size_t n) {
  if (n <= 8) {
    double s = 0.0;
    for (size_t i = 0; i < n; ++i) s += x[i];
    return s;
  }
  const size_t h = n / 2;
  return pairwise_sum(x, h) + pairwise_sum(x + h, n - h);
}

double mean_of(const std::vector<double>& xs) { return xs.empty() ? 0.0 : pairwise_sum(xs.data(), xs.size()) / xs.size(); }

std::string fmt(double x, int prec = 17) {
  std::ostringstream o;
  o << std::setprecision(prec) << x;
  return o.str();
}

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
  return out + "\"";
}

bool is_static(const ExperimentConfig& cfg) { return !cfg.custom && cfg.preset == "psd2010"; }

// fixed-k estimates read from the prefix of one long run; timing is cumulative to k
ReplicationRecord from_trace(const std::string& label, const std::optional<int>& k, const EstimationTrace& tr,
                             double setup_seconds, int rep) {
  ReplicationRecord r;
  r.replication = rep;
  r.estimator = label;
  r.seconds = setup_seconds;
  const int have = tr.iterations();
  const int use = k ? std::min(*k, have) : have;
  for (int i = 0; i < use; ++i) {
    r.path.push_back(tr.records[i].theta);
    r.seconds += tr.records[i].seconds;
  }
  if (use > 0) r.theta = tr.records[use - 1].theta;
  r.iterations = k ? *k : have;
  if (k) {
    // a sequence that stopped early at convergence keeps its last iterate
    r.converged = have >= *k || (tr.converged && tr.failure.empty());
    if (!r.converged) r.failure = tr.failure.empty() ? "sequence stopped early" : tr.failure;
  } else {
    r.converged = tr.converged;
    r.failure = tr.failure;
  }
  return r;
}

StopRule rule_for(const ExperimentConfig& cfg, const StopRule& preset_rule, const std::vector<EstimatorName>& names,
                  const std::string& family) {
  bool any = false, inf = false;
  int kmax = 0;
  for (const auto& n : names)
    if (n.family == family) {
      any = true;
      if (n.k)
        kmax = std::max(kmax, *n.k);
      else
        inf = true;
    }
  if (!any) return StopRule::fixed(0);
  StopRule base = cfg.stop ? *cfg.stop : preset_rule;
  if (inf) {
    base.max_iter = std::max(base.max_iter, kmax);
    return base;
  }
  return StopRule::fixed(kmax);
}

std::vector<ReplicationRecord> run_static_replication(const ExperimentConfig& cfg, const std::vector<EstimatorName>& names,
                                                      int rep) {
  const StaticGame g;
  const double p = g.symmetric_equilibrium(g.theta_true());
  const StaticSample s = simulate_static(g, p, p, cfg.N, cfg.seed, static_cast<std::uint64_t>(rep));
  StaticOptions opts;
  if (cfg.stop) {
    opts.tol = cfg.stop->theta_tol;
    opts.max_iter = cfg.stop->max_iter;
  }
  for (const auto& n : names)
    if (n.k) opts.max_iter = std::max(opts.max_iter, *n.k);
  std::optional<StaticEstimate> npl, epl, mle;
  std::vector<ReplicationRecord> out;
  for (const auto& n : names) {
    std::optional<StaticEstimate>* slot = n.family == "npl" ? &npl : n.family == "epl" ? &epl : &mle;
    if (!*slot) {
      if (n.family == "npl") *slot = static_npl(g, s, opts);
      else if (n.family == "epl") *slot = static_epl(g, s, opts);
      else *slot = static_mle(g, s);
    }
    const StaticEstimate& e = **slot;
    ReplicationRecord r;
    r.replication = rep;
    r.estimator = n.label();
    const int have = static_cast<int>(e.path.size());
    const int use = n.k ? std::min(*n.k, have) : have;
    for (int i = 0; i < use; ++i) r.path.push_back(ThetaVec::Constant(1, e.path[i]));
    r.theta = ThetaVec::Constant(1, use > 0 ? e.path[use - 1] : e.theta);
    r.iterations = n.k ? *n.k : e.iterations;
    r.converged = n.k ? true : e.converged;
    // static estimators do not record per-iteration times
    r.seconds = e.seconds * (have > 0 ? static_cast<double>(use) / have : 1.0);
    if (n.family == "mle") {
      r.iterations = 1;
      r.converged = true;
    }
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace

std::string EstimatorName::label() const {
  if (family == "mle") return "mle";
  return (k ? std::to_string(*k) : std::string("inf")) + "-" + family;
}

EstimatorName EstimatorName::parse(const std::string& s) {
  if (s == "mle") return {"mle", std::nullopt};
  const auto dash = s.find('-');
  if (dash == std::string::npos) throw DimensionError("estimator '" + s + "': expected <k>-npl, <k>-epl or mle");
  const std::string k = s.substr(0, dash), fam = s.substr(dash + 1);
  if (fam != "npl" && fam != "epl") throw DimensionError("estimator '" + s + "': unknown family '" + fam + "'");
  if (k == "inf") return {fam, std::nullopt};
  int kk = 0;
  try {
    size_t used = 0;
    kk = std::stoi(k, &used);
    if (used != k.size()) throw std::invalid_argument(k);
  } catch (const std::exception&) {
    throw DimensionError("estimator '" + s + "': k must be a positive integer or inf");
  }
  if (kk < 1) throw DimensionError("estimator '" + s + "': k must be at least 1");
  return {fam, kk};
}

void ExperimentConfig::validate() const {
  if (N < 1) throw DimensionError("N must be at least 1");
  if (T < 1) throw DimensionError("T must be at least 1");
  if (replications < 1) throw DimensionError("replications must be at least 1");
  if (threads < 1) throw DimensionError("threads must be at least 1");
  if (mle_starts < 1) throw DimensionError("mle_starts must be at least 1");
  if (estimators.empty()) throw DimensionError("no estimators configured");
  std::set<std::string> seen;
  for (const auto& e : estimators) {
    const auto n = EstimatorName::parse(e);
    if (!seen.insert(n.label()).second) throw DimensionError("estimator '" + e + "' listed twice");
  }
  if (!custom) {
    const auto ids = preset_ids();
    if (std::find(ids.begin(), ids.end(), preset) == ids.end()) throw DimensionError("unknown preset '" + preset + "'");
  }
  if (is_static(*this) && T != 1) throw DimensionError("the static preset has no time dimension; use T = 1");
}

std::string ExperimentConfig::canonical() const {
  nlohmann::ordered_json j;
  j["preset"] = custom ? custom->id : preset;
  if (custom) j["game"] = game_to_json(custom->game, custom->theta);
  j["N"] = N;
  j["T"] = T;
  j["replications"] = replications;
  j["seed"] = seed;
  j["estimators"] = estimators;
  j["mle_starts"] = mle_starts;
  if (stop) {
    j["stop"]["max_iter"] = stop->max_iter;
    j["stop"]["theta_tol"] = stop->theta_tol;
    if (stop->ccp_tol) j["stop"]["ccp_tol"] = *stop->ccp_tol;
  }
  // thread count does not change results and is left out of the hash
  return j.dump();
}

std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t ExperimentConfig::hash() const { return fnv1a64(canonical()); }

const EstimatorStats& ExperimentResult::find(const std::string& estimator) const {
  for (const auto& s : stats)
    if (s.estimator == estimator) return s;
  throw DimensionError("no statistics for estimator '" + estimator + "'");
}

std::vector<ReplicationRecord> run_one_replication(const Preset& preset, const ExperimentConfig& cfg, int rep) {
  std::vector<EstimatorName> names;
  for (const auto& e : cfg.estimators) names.push_back(EstimatorName::parse(e));
  std::vector<ReplicationRecord> out;
  auto fail_all = [&](const std::string& why) {
    out.clear();
    for (const auto& n : names) {
      ReplicationRecord r;
      r.replication = rep;
      r.estimator = n.label();
      r.failure = why;
      out.push_back(std::move(r));
    }
    return out;
  };
  const GameSpec& game = preset.game;
  Dataset data;
  CcpProfile P_hat;
  double first_stage_seconds = 0.0;
  try {
    data = simulate_dataset(game, preset.equilibrium, cfg.N, cfg.T, cfg.seed, static_cast<std::uint64_t>(rep));
    const auto t0 = Clock::now();
    P_hat = first_stage_ccp(preset, data);
    first_stage_seconds = seconds_since(t0);
  } catch (const std::exception& e) {
    return fail_all(std::string("data: ") + e.what());
  }
  const StopRule npl_rule = rule_for(cfg, preset.stop, names, "npl");
  const StopRule epl_rule = rule_for(cfg, preset.stop, names, "epl");
  std::optional<EstimationTrace> npl, epl;
  double epl_setup = first_stage_seconds;
  std::string epl_setup_failure;
  std::optional<MultistartResult> mle;
  double mle_seconds = 0.0;
  for (const auto& n : names) {
    try {
      if (n.family == "npl") {
        if (!npl) npl = k_npl(game, data, P_hat, npl_rule);
        out.push_back(from_trace(n.label(), n.k, *npl, first_stage_seconds, rep));
      } else if (n.family == "epl") {
        if (!epl && epl_setup_failure.empty()) {
          try {
            const auto t0 = Clock::now();
            const CompoundParam g0 = initial_gamma(game, data, P_hat);
            epl_setup += seconds_since(t0);
            epl = k_epl(game, data, g0, epl_rule);
          } catch (const std::exception& e) {
            epl_setup_failure = std::string("initial estimate: ") + e.what();
          }
        }
        if (!epl) throw NumericalError(epl_setup_failure);
        out.push_back(from_trace(n.label(), n.k, *epl, epl_setup, rep));
      } else {
        if (!mle) {
          const auto t0 = Clock::now();
          mle = mle_multistart(game, data, cfg.mle_starts, stream_seed(cfg.seed, static_cast<std::uint64_t>(rep)));
          mle_seconds = seconds_since(t0);
        }
        ReplicationRecord r;
        r.replication = rep;
        r.estimator = "mle";
        r.seconds = mle_seconds;
        if (mle->best_index < 0) {
          r.failure = "no multistart sequence converged";
        } else {
          r.theta = mle->best.theta();
          r.converged = true;
          r.iterations = mle->best.iterations();
        }
        out.push_back(std::move(r));
      }
    } catch (const std::exception& e) {
      ReplicationRecord r;
      r.replication = rep;
      r.estimator = n.label();
      r.failure = e.what();
      out.push_back(std::move(r));
    }
  }
  return out;
}

EstimatorStats summarize(const std::string& estimator, const std::vector<ReplicationRecord>& records,
                         const ThetaVec& theta_true, const std::vector<std::string>& param_names) {
  EstimatorStats s;
  s.estimator = estimator;
  s.param_names = param_names;
  const auto K = theta_true.size();
  s.mean = s.bias = s.mse = Vec::Constant(K, std::numeric_limits<double>::quiet_NaN());
  std::vector<const ReplicationRecord*> mine;
  for (const auto& r : records)
    if (r.estimator == estimator) mine.push_back(&r);
  s.replications = static_cast<int>(mine.size());
  if (mine.empty()) {
    s.error = "no replications";
    return s;
  }
  std::vector<std::vector<double>> est(K), sq(K);
  std::vector<double> iters, times;
  int converged = 0;
  for (const auto* r : mine) {
    converged += r->converged;
    iters.push_back(r->iterations);
    times.push_back(r->seconds);
    s.iter_max = std::max(s.iter_max, r->iterations);
    if (r->theta.size() != K || !r->theta.allFinite()) continue;
    ++s.used;
    for (Eigen::Index k = 0; k < K; ++k) {
      est[k].push_back(r->theta[k]);
      sq[k].push_back((r->theta[k] - theta_true[k]) * (r->theta[k] - theta_true[k]));
    }
  }
  s.non_converged = s.replications - converged;
  s.convergence_rate = static_cast<double>(converged) / s.replications;
  s.iter_median = quantile(iters, 0.5);
  s.iter_iqr = quantile(iters, 0.75) - quantile(iters, 0.25);
  s.time_total = pairwise_sum(times.data(), times.size());
  s.time_mean = s.time_total / s.replications;
  s.time_median = quantile(times, 0.5);
  const double total_iters = pairwise_sum(iters.data(), iters.size());
  s.time_per_iteration = total_iters > 0 ? s.time_total / total_iters : 0.0;
  if (s.used == 0) {
    s.error = "no replication produced an estimate";
    return s;
  }
  for (Eigen::Index k = 0; k < K; ++k) {
    s.mean[k] = mean_of(est[k]);
    s.bias[k] = s.mean[k] - theta_true[k];
    s.mse[k] = mean_of(sq[k]);
  }
  return s;
}

ExperimentResult run_replications(const ExperimentConfig& cfg) {
  cfg.validate();
  std::vector<EstimatorName> names;
  for (const auto& e : cfg.estimators) names.push_back(EstimatorName::parse(e));
  ExperimentResult res;
  res.config_text = cfg.canonical();
  res.config_hash = fnv1a64(res.config_text);
  const auto t_start = Clock::now();
  const bool stat = is_static(cfg);
  std::optional<Preset> preset;
  if (stat) {
    res.preset = "psd2010";
    res.theta_true = ThetaVec::Constant(1, StaticGame().theta_true());
    res.param_names = {"theta"};
  } else {
    preset = cfg.custom ? *cfg.custom : make_preset(cfg.preset);
    res.preset = preset->id;
    res.theta_true = preset->theta;
    res.param_names = preset->game.param_names();
  }
  // untimed warm-up pass over replication 0; its records are discarded and its time counts as setup
  try {
    if (stat)
      run_static_replication(cfg, names, 0);
    else
      run_one_replication(*preset, cfg, 0);
  } catch (const std::exception&) {
  }
  res.setup_seconds = seconds_since(t_start);
  std::vector<std::vector<ReplicationRecord>> per_rep(cfg.replications);
  std::vector<double> rep_seconds(cfg.replications, 0.0);
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int rep = next++; rep < cfg.replications; rep = next++) {
      const auto t0 = Clock::now();
      try {
        per_rep[rep] = stat ? run_static_replication(cfg, names, rep) : run_one_replication(*preset, cfg, rep);
      } catch (const std::exception& e) {
        for (const auto& n : names) {
          ReplicationRecord r;
          r.replication = rep;
          r.estimator = n.label();
          r.failure = e.what();
          per_rep[rep].push_back(std::move(r));
        }
      }
      rep_seconds[rep] = seconds_since(t0);
    }
  };
  const int nthreads = std::min(cfg.threads, cfg.replications);
  if (nthreads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < nthreads; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (auto& v : per_rep)
    for (auto& r : v) res.records.push_back(std::move(r));
  for (const auto& n : names) res.stats.push_back(summarize(n.label(), res.records, res.theta_true, res.param_names));
  res.replication_seconds = pairwise_sum(rep_seconds.data(), rep_seconds.size());
  res.wall_seconds = seconds_since(t_start);
  return res;
}

std::string format_table(const ExperimentResult& r) {
  std::ostringstream o;
  o << "preset " << r.preset << "  replications " << (r.stats.empty() ? 0 : r.stats.front().replications)
    << "  config " << std::hex << std::setw(16) << std::setfill('0') << r.config_hash << std::dec << std::setfill(' ')
    << "\n\n";
  o << std::left << std::setw(10) << "estimator" << std::setw(12) << "param" << std::right << std::setw(12) << "true"
    << std::setw(12) << "mean" << std::setw(12) << "bias" << std::setw(12) << "mse" << "\n";
  o << std::fixed << std::setprecision(4);
  for (const auto& s : r.stats) {
    if (!s.error.empty()) {
      o << std::left << std::setw(10) << s.estimator << "error: " << s.error << "\n";
      continue;
    }
    for (Eigen::Index k = 0; k < r.theta_true.size(); ++k) {
      const std::string pn = k < static_cast<Eigen::Index>(r.param_names.size()) ? r.param_names[k] : "theta" + std::to_string(k + 1);
      o << std::left << std::setw(10) << (k == 0 ? s.estimator : "") << std::setw(12) << pn << std::right << std::setw(12)
        << r.theta_true[k] << std::setw(12) << s.mean[k] << std::setw(12) << s.bias[k] << std::setw(12) << s.mse[k]
        << "\n";
    }
  }
  o << "\n"
    << std::left << std::setw(10) << "estimator" << std::right << std::setw(8) << "conv%" << std::setw(8) << "median"
    << std::setw(8) << "iqr" << std::setw(6) << "max" << std::setw(10) << "non-conv" << std::setw(12) << "total s"
    << std::setw(12) << "mean s" << std::setw(12) << "median s" << std::setw(12) << "s/iter" << "\n";
  for (const auto& s : r.stats) {
    o << std::left << std::setw(10) << s.estimator << std::right << std::setprecision(1) << std::setw(8)
      << 100.0 * s.convergence_rate << std::setw(8) << s.iter_median << std::setw(8) << s.iter_iqr << std::setw(6)
      << s.iter_max << std::setw(10) << s.non_converged << std::setprecision(4) << std::setw(12) << s.time_total
      << std::setw(12) << s.time_mean << std::setw(12) << s.time_median << std::setw(12) << s.time_per_iteration
      << "\n";
  }
  return o.str();
}

void emit_tables(const ExperimentResult& r, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  auto open = [&](const char* name) {
    std::ofstream f(dir / name);
    if (!f) throw IoError("cannot write " + (dir / name).string());
    return f;
  };
  {
    auto f = open("stats.csv");
    f << "estimator,param,true,mean,bias,mse,replications,used,convergence_rate,iter_median,iter_iqr,iter_max,"
         "non_converged,time_total,time_mean,time_median,time_per_iteration,error\n";
    for (const auto& s : r.stats)
      for (Eigen::Index k = 0; k < r.theta_true.size(); ++k) {
        const std::string pn = k < static_cast<Eigen::Index>(r.param_names.size()) ? r.param_names[k] : "theta" + std::to_string(k + 1);
        f << s.estimator << ',' << pn << ',' << fmt(r.theta_true[k]) << ',' << fmt(s.mean[k]) << ',' << fmt(s.bias[k])
          << ',' << fmt(s.mse[k]) << ',' << s.replications << ',' << s.used << ',' << fmt(s.convergence_rate) << ','
          << fmt(s.iter_median) << ',' << fmt(s.iter_iqr) << ',' << s.iter_max << ',' << s.non_converged << ','
          << fmt(s.time_total) << ',' << fmt(s.time_mean) << ',' << fmt(s.time_median) << ','
          << fmt(s.time_per_iteration) << ',' << csv_escape(s.error) << '\n';
      }
  }
  {
    auto f = open("stats.txt");
    f << format_table(r);
  }
  {
    auto f = open("replications.csv");
    f << "replication,estimator,converged,iterations,seconds,failure";
    for (Eigen::Index k = 0; k < r.theta_true.size(); ++k)
      f << ',' << (k < static_cast<Eigen::Index>(r.param_names.size()) ? r.param_names[k] : "theta" + std::to_string(k + 1));
    f << '\n';
    for (const auto& rec : r.records) {
      f << rec.replication << ',' << rec.estimator << ',' << rec.converged << ',' << rec.iterations << ','
        << fmt(rec.seconds) << ',' << csv_escape(rec.failure);
      for (Eigen::Index k = 0; k < r.theta_true.size(); ++k)
        f << ',' << (rec.theta.size() == r.theta_true.size() ? fmt(rec.theta[k]) : std::string("nan"));
      f << '\n';
    }
  }
  {
    auto f = open("paths.csv");
    f << "replication,estimator,k";
    for (Eigen::Index k = 0; k < r.theta_true.size(); ++k) f << ",theta" << k + 1;
    f << '\n';
    for (const auto& rec : r.records)
      for (size_t i = 0; i < rec.path.size(); ++i) {
        f << rec.replication << ',' << rec.estimator << ',' << i + 1;
        for (Eigen::Index k = 0; k < rec.path[i].size(); ++k) f << ',' << fmt(rec.path[i][k]);
        f << '\n';
      }
  }
  {
    auto f = open("manifest.json");
    std::ostringstream hex;
    hex << std::hex << std::setw(16) << std::setfill('0') << r.config_hash;
    nlohmann::ordered_json m;
    m["format"] = "epl-mc/1";
    m["preset"] = r.preset;
    m["config_hash"] = hex.str();
    m["config"] = nlohmann::json::parse(r.config_text);
    m["wall_seconds"] = r.wall_seconds;
    m["setup_seconds"] = r.setup_seconds;
    m["replication_seconds"] = r.replication_seconds;
    m["files"] = {"stats.csv", "stats.txt", "replications.csv", "paths.csv"};
    f << m.dump(2) << '\n';
  }
}

}  // namespace epl
