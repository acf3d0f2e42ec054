#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "csopt/cli.hpp"
#include "csopt/harness.hpp"
#include "csopt/numfmt.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Conditional stochastic optimization: runs, constant checks and rate fits"};
  app.require_subcommand(1);

  int workers = csopt::default_workers();
  std::string config_path;
  auto* run = app.add_subcommand("run", "Run a seeded replication sweep from a config file");
  run->add_option("config", config_path, "key=value config file")->required();
  run->add_option("--workers", workers, "Worker threads (default: CSOPT_WORKERS or cores)");

  csopt::CheckOptions check_opts;
  std::vector<std::string> sets;
  double alpha = 0.0;
  long n_iters = 0;
  auto* check = app.add_subcommand("check", "Report derived constants and compliance");
  check->add_option("problem", check_opts.problem, "BT, LIN or LG(n)")->required();
  check->add_option("--gamma", check_opts.gamma)->required();
  check->add_option("--lambda", check_opts.lambda)->required();
  check->add_flag("--unit-ledger", check_opts.unit_ledger, "Use the all-ones stand-in ledger");
  check->add_flag("--estimated", check_opts.estimated, "Estimate the ledger from probes");
  check->add_option("--set", sets, "Ledger override KEY=VALUE (repeatable)");
  auto* alpha_opt = check->add_option("--alpha", alpha, "Stepsize scale for the rate bound");
  auto* n_opt = check->add_option("--n", n_iters, "Horizon N for the rate bound");
  check->add_option("--seed", check_opts.seed);

  std::string summary_path;
  auto* rate = app.add_subcommand("rate", "Fit the log-log slope of a summary.csv");
  rate->add_option("summary", summary_path)->required();

  std::string grad_problem;
  int probes = 100;
  std::uint64_t grad_seed = 0;
  auto* grad = app.add_subcommand("gradcheck", "Finite-difference check of a problem's gradients");
  grad->add_option("problem", grad_problem)->required();
  grad->add_option("--probes", probes);
  grad->add_option("--seed", grad_seed);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : csopt::kExitError;
  }

  if (*run) return csopt::cli_run(config_path, workers, std::cout, std::cerr);
  if (*check) {
    try {
      for (const std::string& s : sets) {
        const auto eq = s.find('=');
        if (eq == std::string::npos) throw csopt::ConfigError("--set expects KEY=VALUE");
        check_opts.overrides[s.substr(0, eq)] = csopt::parse_double(s.substr(eq + 1), s);
      }
    } catch (const csopt::ConfigError& e) {
      std::cerr << "configuration error: " << e.what() << "\n";
      return csopt::kExitError;
    }
    if (*alpha_opt) check_opts.alpha = alpha;
    if (*n_opt) check_opts.n_iters = n_iters;
    return csopt::cli_check(check_opts, std::cout, std::cerr);
  }
  if (*rate) return csopt::cli_rate(summary_path, std::cout, std::cerr);
  if (*grad) return csopt::cli_gradcheck(grad_problem, probes, grad_seed, std::cout, std::cerr);
  return csopt::kExitError;
}
