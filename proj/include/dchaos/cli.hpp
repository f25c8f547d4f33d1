#pragma once

// Run configuration, subcommands and result files for the dchaos tool.
//
// Precedence: built-in defaults < JSON config file < command-line flags.
// Every run writes manifest.json (config echo, seed, version) next to its
// result files. Files are written only after all computation succeeded, so an
// invalid config or a numerical failure leaves no partial output (the oracle
// report is the exception: it is written and the run exits with status 3).

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "dchaos/chaos.hpp"
#include "dchaos/cs_functional.hpp"
#include "dchaos/errors.hpp"
#include "dchaos/guerra_oracle.hpp"
#include "dchaos/mixture.hpp"
#include "dchaos/simulator.hpp"

#ifndef DCHAOS_VERSION
#define DCHAOS_VERSION "1.0.0"
#endif

namespace dchaos::cli {

using json = nlohmann::ordered_json;

enum ExitCode : int { kOk = 0, kInvalidConfig = 2, kNumericalFailure = 3 };

struct SolveBlock {
  int k_max = 6;
  double tol_k = 1e-9;
  double grad_tol = 1e-6;
  int random_starts = 4;
};

struct ChaosBlock {
  double u_step = 0.05;
  int grid_points = 201;
};

struct OracleBlock {
  int cases = 100;
  double tolerance = 1e-5;
  std::vector<long long> tau_N{100, 1000, 10000};
  double tau_b = 2.0;
};

struct SimulateBlock {
  std::vector<int> N{8, 16, 24, 32};
  int replicas = 50;
  int sweeps = 1000;
  std::vector<double> eps{0.1, 0.2, 0.3};
  std::optional<double> u_star;
};

struct RunConfig {
  MixtureSpec model{{{1, 1.0}}, 0.0};
  double t = 0.5;
  std::uint64_t seed = 20140613;
  std::string output;  // empty: $DCHAOS_OUTPUT_ROOT/<command> or ./dchaos_out/<command>
  SolveBlock solve;
  ChaosBlock chaos;
  OracleBlock oracle;
  SimulateBlock simulate;
};

// ---------------------------------------------------------------------------
// JSON <-> RunConfig

namespace detail {

template <class T>
T take(const json& j, const char* key, T fallback, const std::string& where) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

inline void reject_unknown(const json& j, std::initializer_list<const char*> keys, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& item : j.items()) {
    bool known = false;
    for (const char* k : keys) known = known || item.key() == k;
    if (!known) throw ConfigError(where + ": unknown key '" + item.key() + "'");
  }
}

}  // namespace detail

inline RunConfig config_from_json(const json& j) {
  using detail::take;
  detail::reject_unknown(j, {"model", "t", "seed", "output", "solve", "chaos", "oracle", "simulate"}, "config");
  RunConfig c;
  if (j.contains("model")) {
    const auto& m = j.at("model");
    detail::reject_unknown(m, {"terms", "h"}, "model");
    c.model.h = take<double>(m, "h", 0.0, "model");
    if (m.contains("terms")) {
      if (!m.at("terms").is_array()) throw ConfigError("model.terms: expected an array");
      c.model.terms.clear();
      for (const auto& term : m.at("terms")) {
        detail::reject_unknown(term, {"p", "beta_sq"}, "model.terms[]");
        if (!term.contains("p") || !term.contains("beta_sq")) throw ConfigError("model.terms[]: need p and beta_sq");
        c.model.terms.push_back({take<int>(term, "p", 1, "model.terms[]"), take<double>(term, "beta_sq", 0.0, "model.terms[]")});
      }
    }
  }
  c.t = take<double>(j, "t", c.t, "config");
  c.seed = take<std::uint64_t>(j, "seed", c.seed, "config");
  c.output = take<std::string>(j, "output", c.output, "config");
  if (j.contains("solve")) {
    const auto& s = j.at("solve");
    detail::reject_unknown(s, {"k_max", "tol_k", "grad_tol", "random_starts"}, "solve");
    c.solve.k_max = take(s, "k_max", c.solve.k_max, "solve");
    c.solve.tol_k = take(s, "tol_k", c.solve.tol_k, "solve");
    c.solve.grad_tol = take(s, "grad_tol", c.solve.grad_tol, "solve");
    c.solve.random_starts = take(s, "random_starts", c.solve.random_starts, "solve");
  }
  if (j.contains("chaos")) {
    const auto& s = j.at("chaos");
    detail::reject_unknown(s, {"u_step", "grid_points"}, "chaos");
    c.chaos.u_step = take(s, "u_step", c.chaos.u_step, "chaos");
    c.chaos.grid_points = take(s, "grid_points", c.chaos.grid_points, "chaos");
  }
  if (j.contains("oracle")) {
    const auto& s = j.at("oracle");
    detail::reject_unknown(s, {"cases", "tolerance", "tau_N", "tau_b"}, "oracle");
    c.oracle.cases = take(s, "cases", c.oracle.cases, "oracle");
    c.oracle.tolerance = take(s, "tolerance", c.oracle.tolerance, "oracle");
    c.oracle.tau_N = take(s, "tau_N", c.oracle.tau_N, "oracle");
    c.oracle.tau_b = take(s, "tau_b", c.oracle.tau_b, "oracle");
  }
  if (j.contains("simulate")) {
    const auto& s = j.at("simulate");
    detail::reject_unknown(s, {"N", "replicas", "sweeps", "eps", "u_star"}, "simulate");
    c.simulate.N = take(s, "N", c.simulate.N, "simulate");
    c.simulate.replicas = take(s, "replicas", c.simulate.replicas, "simulate");
    c.simulate.sweeps = take(s, "sweeps", c.simulate.sweeps, "simulate");
    c.simulate.eps = take(s, "eps", c.simulate.eps, "simulate");
    if (s.contains("u_star") && !s.at("u_star").is_null()) c.simulate.u_star = take<double>(s, "u_star", 0.0, "simulate");
  }
  return c;
}

inline json config_to_json(const RunConfig& c) {
  json terms = json::array();
  for (const auto& t : c.model.terms) terms.push_back({{"p", t.p}, {"beta_sq", t.beta_sq}});
  json j;
  j["model"] = {{"terms", terms}, {"h", c.model.h}};
  j["t"] = c.t;
  j["seed"] = c.seed;
  j["output"] = c.output;
  j["solve"] = {{"k_max", c.solve.k_max},
                {"tol_k", c.solve.tol_k},
                {"grad_tol", c.solve.grad_tol},
                {"random_starts", c.solve.random_starts}};
  j["chaos"] = {{"u_step", c.chaos.u_step}, {"grid_points", c.chaos.grid_points}};
  j["oracle"] = {{"cases", c.oracle.cases},
                 {"tolerance", c.oracle.tolerance},
                 {"tau_N", c.oracle.tau_N},
                 {"tau_b", c.oracle.tau_b}};
  j["simulate"] = {{"N", c.simulate.N},
                   {"replicas", c.simulate.replicas},
                   {"sweeps", c.simulate.sweeps},
                   {"eps", c.simulate.eps},
                   {"u_star", c.simulate.u_star ? json(*c.simulate.u_star) : json(nullptr)}};
  return j;
}

inline RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("malformed config " + path.string() + ": " + e.what());
  }
  return config_from_json(j);
}

/// Checks everything a subcommand needs before any computation starts.
inline void validate_config(const RunConfig& c, const std::string& command) {
  const auto report = validate(c.model);
  if (!report.valid) throw ConfigError("model: " + report.issues.front());
  if (!(c.t > 0.0 && c.t <= 1.0)) throw ConfigError("t must lie in (0,1]");
  if (command == "solve" || command == "chaos" || (command == "simulate" && !c.simulate.u_star)) {
    if (c.solve.k_max < 0 || c.solve.random_starts < 0 || !(c.solve.tol_k > 0.0) || !(c.solve.grad_tol > 0.0)) {
      throw ConfigError("solve: k_max, random_starts >= 0 and tol_k, grad_tol > 0 required");
    }
  }
  if (command == "chaos") {
    if (!(c.t < 1.0)) throw ConfigError("chaos: t must lie strictly inside (0,1)");
    if (!(c.chaos.u_step > 0.0 && c.chaos.u_step <= 2.0)) throw ConfigError("chaos.u_step must lie in (0,2]");
    if (c.chaos.grid_points < 3) throw ConfigError("chaos.grid_points must be >= 3");
  }
  if (command == "oracle") {
    if (c.oracle.cases < 1) throw ConfigError("oracle.cases must be >= 1");
    if (!(c.oracle.tolerance > 0.0)) throw ConfigError("oracle.tolerance must be positive");
    if (!(c.oracle.tau_b > 0.0)) throw ConfigError("oracle.tau_b must be positive");
    for (auto n : c.oracle.tau_N) {
      if (n < 1) throw ConfigError("oracle.tau_N entries must be >= 1");
    }
  }
  if (command == "simulate") {
    const auto& s = c.simulate;
    if (s.N.size() < 3) throw ConfigError("simulate.N needs at least three sizes");
    for (std::size_t i = 0; i < s.N.size(); ++i) {
      if (s.N[i] < 2) throw ConfigError("simulate.N entries must be >= 2");
      if (i > 0 && s.N[i] <= s.N[i - 1]) throw ConfigError("simulate.N must be strictly ascending");
      for (const auto& term : c.model.terms) {
        double entries = 1.0;
        for (int r = 0; r < 2 * term.p; ++r) entries *= s.N[i];
        if (term.beta_sq != 0.0 && entries > static_cast<double>(kDefaultTensorBudget)) {
          throw ConfigError("simulate: tensor for p=" + std::to_string(term.p) + " at N=" + std::to_string(s.N[i]) +
                            " exceeds the memory budget");
        }
      }
    }
    if (s.replicas < 1 || s.sweeps < 5) throw ConfigError("simulate: replicas >= 1 and sweeps >= 5 required");
    if (s.eps.empty()) throw ConfigError("simulate.eps must not be empty");
    for (double e : s.eps) {
      if (!(e > 0.0)) throw ConfigError("simulate.eps entries must be positive");
    }
    if (!s.u_star && c.model.h != 0.0 && c.t == 1.0) {
      throw ConfigError("simulate: with t = 1 and h != 0 supply simulate.u_star");
    }
  }
  if (command != "solve" && command != "chaos" && command != "oracle" && command != "simulate") {
    throw ConfigError("unknown command '" + command + "'");
  }
}

inline std::filesystem::path output_dir(const RunConfig& c, const std::string& command) {
  if (!c.output.empty()) return c.output;
  const char* root = std::getenv("DCHAOS_OUTPUT_ROOT");
  return std::filesystem::path(root && *root ? root : "dchaos_out") / command;
}

// ---------------------------------------------------------------------------
// Output assembly

inline std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// Finite doubles as numbers, others as null.
inline json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

struct RunResult {
  int exit_code = kOk;
  std::string message;
  std::map<std::string, std::string> files;  // name -> contents, written in name order
};

inline void write_result(const RunResult& res, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (const auto& [name, body] : res.files) {
    std::ofstream out(dir / name, std::ios::binary);
    out << body;
    if (!out) throw std::runtime_error("cannot write " + (dir / name).string());
  }
}

inline std::string manifest(const RunConfig& c, const std::string& command, const RunResult& res) {
  json files = json::array();
  for (const auto& kv : res.files) files.push_back(kv.first);
  files.push_back("manifest.json");
  json m;
  m["tool"] = "dchaos";
  m["version"] = DCHAOS_VERSION;
  m["command"] = command;
  m["seed"] = c.seed;
  m["model_digest"] = digest(c.model);
  m["config"] = config_to_json(c);
  m["files"] = files;
  return m.dump(2) + "\n";
}

inline OptimizerSettings optimizer_settings(const RunConfig& c) {
  OptimizerSettings s;
  s.k_max = c.solve.k_max;
  s.tol_k = c.solve.tol_k;
  s.grad_tol = c.solve.grad_tol;
  s.random_starts = c.solve.random_starts;
  s.seed = c.seed;
  return s;
}

inline json optimum_json(const CSOptimum& opt) {
  json bps = json::array();
  for (const auto& bp : opt.x_star.pieces()) bps.push_back({{"q", bp.q}, {"m", bp.m}});
  json res = json::object();
  for (std::size_t i = 0; i < opt.stationarity_residuals.size(); ++i) {
    res[opt.residual_labels[i]] = opt.stationarity_residuals[i];
  }
  json j;
  j["value"] = opt.value;
  j["b_star"] = opt.b_star;
  j["k_used"] = opt.k_used;
  j["breakpoints"] = bps;
  j["u_x"] = opt.u_x;
  j["binding_lower_bound"] = opt.binding_lower_bound;
  j["stationarity_residuals"] = res;
  j["support_residual"] = opt.support_residual;
  j["values_by_k"] = opt.values_by_k;
  return j;
}

inline RunResult cmd_solve(const RunConfig& c) {
  const auto opt = optimize_cs(c.model, optimizer_settings(c));
  RunResult r;
  r.files["cs_optimum.json"] = optimum_json(opt).dump(2) + "\n";
  std::string csv = "q,x\n";
  for (int i = 0; i < 200; ++i) {
    const double q = i / 199.0;
    csv += fmt17(q) + "," + fmt17(opt.x_star.value(q)) + "\n";
  }
  r.files["order_param.csv"] = csv;
  r.message = "value " + fmt17(opt.value) + ", b* " + fmt17(opt.b_star);
  return r;
}

inline RunResult cmd_chaos(const RunConfig& c) {
  ChaosGapSettings gs;
  gs.grid_points = c.chaos.grid_points;
  const auto curve = chaos_curve(c.model, c.t, uniform_u_grid(c.chaos.u_step), optimizer_settings(c), gs);
  RunResult r;
  std::string csv = "u,gap,lambda_star\n";
  double gap_at_star = 0.0;
  for (std::size_t i = 0; i < curve.grid.size(); ++i) {
    csv += fmt17(curve.grid[i]) + "," + fmt17(curve.gaps[i]) + "," + fmt17(curve.lambda_star[i]) + "\n";
    if (curve.grid[i] == curve.u_star) gap_at_star = curve.gaps[i];
  }
  r.files["chaos_curve.csv"] = csv;
  json s;
  s["t"] = c.t;
  s["u_star"] = curve.u_star;
  s["u_x"] = curve.u_x;
  s["two_inf_p"] = curve.two_p;
  s["gap_at_u_star"] = gap_at_star;
  s["min_gap_off_u_star"] = num(curve.min_gap_off(c.chaos.u_step));
  s["off_radius"] = c.chaos.u_step;
  std::size_t boundary = 0;
  for (bool b : curve.boundary) boundary += b ? 1 : 0;
  s["boundary_points"] = boundary;
  s["warnings"] = curve.warnings;
  s["optimum"] = optimum_json(curve.optimum);
  r.files["chaos_summary.json"] = s.dump(2) + "\n";
  r.message = "u* " + fmt17(curve.u_star) + ", min gap off u* " + fmt17(curve.min_gap_off(c.chaos.u_step));
  return r;
}

inline RunResult cmd_oracle(const RunConfig& c) {
  RunResult r;
  json rep;
  const auto suite = run_oracle_suite(c.oracle.cases, c.seed);
  json cases = json::array();
  double worst = 0.0;
  for (std::size_t i = 0; i < suite.size(); ++i) {
    const auto& [cs, res] = suite[i];
    worst = std::max(worst, res.abs_error);
    cases.push_back({{"index", i},
                     {"k", cs.schedule.k},
                     {"tau", cs.schedule.tau},
                     {"t", cs.schedule.t},
                     {"eta", cs.schedule.eta},
                     {"b", cs.b},
                     {"lambda", cs.lambda},
                     {"model", digest(cs.spec)},
                     {"closed", {res.closed[0], res.closed[1]}},
                     {"recursive", {res.recursive[0], res.recursive[1]}},
                     {"abs_error", res.abs_error}});
  }
  rep["tolerance"] = c.oracle.tolerance;
  rep["max_abs_error"] = worst;
  rep["cases"] = cases;

  // Spot checks: single-level collapse, a k=1 schedule, branch swap under lambda -> -lambda.
  json spots = json::array();
  {
    const MixtureSpec spec({{1, 1.0}}, 0.0);
    const auto s0 = RSBSchedule::make({0.0}, {0.0, 1.0}, 0, 0.5, 1);
    const double b = 3.0;
    const double rec = recursive_J(s0, spec, b, 0.0, 1);
    const double expect = gaussian_exp_identity(0.0, b, xi_d1(spec, 1.0), 0.0);
    spots.push_back({{"name", "single_level_collapse"}, {"value", rec}, {"expected", expect}, {"abs_error", std::abs(rec - expect)}});
    const auto s1 = RSBSchedule::make({0.0, 0.6}, {0.0, 0.4, 1.0}, 1, 0.5, 1);
    const double r1 = recursive_J(s1, spec, 4.0, 0.3, 1);
    const double c1 = closed_form_J(s1, spec, 4.0, 0.3, 1);
    spots.push_back({{"name", "k1_branch1"}, {"value", r1}, {"expected", c1}, {"abs_error", std::abs(r1 - c1)}});
    const auto s2 = RSBSchedule::make({0.0, 0.6}, {0.0, 0.4, 1.0}, 0, 0.5, 1);
    const double a = recursive_J(s2, spec, 4.0, 0.3, 1);
    const double bsw = recursive_J(s2, spec, 4.0, -0.3, 2);
    spots.push_back({{"name", "lambda_sign_swap"}, {"value", a}, {"expected", bsw}, {"abs_error", std::abs(a - bsw)}});
    for (const auto& sp : spots) worst = std::max(worst, sp["abs_error"].get<double>());
  }
  rep["spot_checks"] = spots;

  json taus = json::array();
  const double limit = tau_limit(c.oracle.tau_b);
  bool decreasing = true;
  double prev = std::numeric_limits<double>::infinity();
  for (auto N : c.oracle.tau_N) {
    const double v = tau_chi(N, c.oracle.tau_b);
    const double err = std::abs(v - limit);
    decreasing = decreasing && err < prev;
    prev = err;
    taus.push_back({{"N", N}, {"tau", v}, {"error", err}});
  }
  rep["tau"] = {{"b", c.oracle.tau_b}, {"limit", limit}, {"values", taus}, {"error_decreasing", decreasing}};
  const bool pass = worst <= c.oracle.tolerance;
  rep["passed"] = pass;
  r.files["oracle_report.json"] = rep.dump(2) + "\n";
  r.exit_code = pass ? kOk : kNumericalFailure;
  r.message = "max |recursive - closed| " + fmt17(worst) + (pass ? "" : " exceeds tolerance");
  return r;
}

inline RunResult cmd_simulate(const RunConfig& c) {
  double u_star = 0.0;
  if (c.simulate.u_star) {
    u_star = *c.simulate.u_star;
  } else if (c.model.h != 0.0) {
    const auto opt = optimize_cs(c.model, optimizer_settings(c));
    u_star = solve_u_star(c.model, opt.x_star, opt.b_star, c.t);
  }
  SimulationSettings cfg;
  cfg.replicas = c.simulate.replicas;
  cfg.sweeps = c.simulate.sweeps;
  cfg.base_seed = c.seed;
  cfg.eps = c.simulate.eps;
  std::vector<OverlapReport> reports;
  for (int N : c.simulate.N) reports.push_back(overlap_experiment(c.model, N, c.t, u_star, cfg));

  RunResult r;
  std::string conc = "N,eps,tail,stderr\n";
  json per_n = json::array();
  for (const auto& rep : reports) {
    std::string csv = "bin_center,mass\n";
    for (int i = 0; i < OverlapReport::kBins; ++i) {
      csv += fmt17(OverlapReport::bin_center(i)) + "," + fmt17(rep.histogram[static_cast<std::size_t>(i)]) + "\n";
    }
    r.files["overlap_N" + std::to_string(rep.N) + ".csv"] = csv;
    for (std::size_t e = 0; e < rep.eps.size(); ++e) {
      conc += std::to_string(rep.N) + "," + fmt17(rep.eps[e]) + "," + fmt17(rep.tails[e]) + "," +
              fmt17(rep.tail_stderr[e]) + "\n";
    }
    per_n.push_back({{"N", rep.N},
                     {"mean", rep.mean},
                     {"variance", rep.variance},
                     {"central_mass_0.2", rep.central_mass(0.2)},
                     {"acceptance", rep.acceptance},
                     {"replicas", rep.replicas},
                     {"effective_samples", rep.effective_samples}});
  }
  r.files["concentration.csv"] = conc;
  json slopes = json::array();
  for (double e : c.simulate.eps) {
    const auto tr = fit_trend(reports, e);
    slopes.push_back({{"eps", e}, {"slope", num(tr.slope)}, {"all_zero", tr.all_zero}, {"partial", tr.partial}});
  }
  json trend;
  trend["t"] = c.t;
  trend["u_star"] = u_star;
  trend["model_digest"] = digest(c.model);
  trend["slopes"] = slopes;
  trend["per_N"] = per_n;
  r.files["trend.json"] = trend.dump(2) + "\n";
  r.message = "simulated N in [" + std::to_string(c.simulate.N.front()) + ", " + std::to_string(c.simulate.N.back()) + "]";
  return r;
}

/// Validates, runs and writes one subcommand; maps failures to exit codes.
inline int execute(const RunConfig& c, const std::string& command, std::ostream& log = std::cerr) {
  std::filesystem::path dir;
  try {
    validate_config(c, command);
    dir = output_dir(c, command);
  } catch (const ConfigError& e) {
    log << "dchaos: invalid config: " << e.what() << "\n";
    return kInvalidConfig;
  }
  RunResult res;
  try {
    if (command == "solve") res = cmd_solve(c);
    else if (command == "chaos") res = cmd_chaos(c);
    else if (command == "oracle") res = cmd_oracle(c);
    else res = cmd_simulate(c);
  } catch (const ConfigError& e) {
    log << "dchaos: invalid config: " << e.what() << "\n";
    return kInvalidConfig;
  } catch (const ArgumentError& e) {
    log << "dchaos: invalid config: " << e.what() << "\n";
    return kInvalidConfig;
  } catch (const std::exception& e) {
    log << "dchaos: numerical failure: " << e.what() << "\n";
    return kNumericalFailure;
  }
  res.files["manifest.json"] = manifest(c, command, res);
  write_result(res, dir);
  log << "dchaos " << command << ": " << res.message << " -> " << dir.string() << "\n";
  return res.exit_code;
}

}  // namespace dchaos::cli
