// dchaos: command-line front end.
//
//   dchaos solve    --config run.json        Crisanti-Sommers optimizer
//   dchaos chaos    --config run.json        chaos gap curve over u
//   dchaos oracle   --config run.json        recursion vs closed form, tau_N
//   dchaos simulate --config run.json        Monte Carlo overlap concentration
//
// Flags override values from the config file. Exit codes: 0 ok, 2 invalid
// config, 3 numerical failure.

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dchaos/cli.hpp"

namespace {

struct Overrides {
  std::string config;
  std::optional<std::string> output;
  std::optional<std::uint64_t> seed;
  std::optional<double> t, h;
  std::optional<int> k_max, cases, replicas, sweeps;
  std::optional<double> u_step, u_star;
  std::vector<int> N;
  std::vector<double> eps;
  bool print_config = false;
};

void add_common(CLI::App* sub, Overrides& o) {
  sub->add_option("-c,--config", o.config, "JSON config file")->check(CLI::ExistingFile);
  sub->add_option("-o,--output", o.output, "output directory");
  sub->add_option("--seed", o.seed, "base seed");
  sub->add_option("--t", o.t, "disorder correlation t");
  sub->add_option("--field", o.h, "external field h");
  sub->add_flag("--print-config", o.print_config, "print the merged config and exit");
}

dchaos::cli::RunConfig merge(const Overrides& o) {
  dchaos::cli::RunConfig c;
  if (!o.config.empty()) c = dchaos::cli::load_config(o.config);
  if (o.output) c.output = *o.output;
  if (o.seed) c.seed = *o.seed;
  if (o.t) c.t = *o.t;
  if (o.h) c.model.h = *o.h;
  if (o.k_max) c.solve.k_max = *o.k_max;
  if (o.u_step) c.chaos.u_step = *o.u_step;
  if (o.cases) c.oracle.cases = *o.cases;
  if (o.replicas) c.simulate.replicas = *o.replicas;
  if (o.sweeps) c.simulate.sweeps = *o.sweeps;
  if (o.u_star) c.simulate.u_star = *o.u_star;
  if (!o.N.empty()) c.simulate.N = o.N;
  if (!o.eps.empty()) c.simulate.eps = o.eps;
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Chaos gaps and overlap simulations for spherical mixed even-spin models"};
  app.set_version_flag("--version", DCHAOS_VERSION);
  app.require_subcommand(1);
  Overrides o;

  auto* solve = app.add_subcommand("solve", "minimize the Crisanti-Sommers functional");
  add_common(solve, o);
  solve->add_option("--k-max", o.k_max, "maximal number of RSB levels");

  auto* chaos = app.add_subcommand("chaos", "chaos gap curve");
  add_common(chaos, o);
  chaos->add_option("--k-max", o.k_max, "maximal number of RSB levels");
  chaos->add_option("--u-step", o.u_step, "u grid spacing");

  auto* oracle = app.add_subcommand("oracle", "recursion oracle and tau_N convergence");
  add_common(oracle, o);
  oracle->add_option("--cases", o.cases, "number of random schedules");

  auto* simulate = app.add_subcommand("simulate", "Monte Carlo overlap concentration");
  add_common(simulate, o);
  simulate->add_option("--N", o.N, "system sizes")->delimiter(',');
  simulate->add_option("--replicas", o.replicas, "disorder replicas per N");
  simulate->add_option("--sweeps", o.sweeps, "sweeps per chain");
  simulate->add_option("--eps", o.eps, "tail radii")->delimiter(',');
  simulate->add_option("--u-star", o.u_star, "center of the tail events");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : dchaos::cli::kInvalidConfig;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  dchaos::cli::RunConfig cfg;
  try {
    cfg = merge(o);
  } catch (const dchaos::ConfigError& e) {
    std::cerr << "dchaos: invalid config: " << e.what() << "\n";
    return dchaos::cli::kInvalidConfig;
  }
  if (o.print_config) {
    std::cout << dchaos::cli::config_to_json(cfg).dump(2) << "\n";
    return 0;
  }
  return dchaos::cli::execute(cfg, command);
}
