#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "liqport/experiments/config.hpp"
#include "liqport/experiments/runs.hpp"

namespace ex = liqport::experiments;
namespace fs = std::filesystem;

namespace {

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> jobs;
  std::string out;
  std::string chains;
  bool synthetic = false;
  std::string variable;
  std::vector<double> values;
  std::optional<int> max_outer;
};

fs::path output_root() {
  const char* env = std::getenv("LIQPORT_OUTPUT_ROOT");
  return env && *env ? fs::path(env) : fs::path("runs");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Liquidity-aware portfolio experiments"};
  app.require_subcommand(1);
  Options o;

  const auto common = [&o](CLI::App* sub) {
    sub->add_option("-c,--config", o.config, "JSON experiment config")->check(CLI::ExistingFile);
    sub->add_option("--seed", o.seed, "Master seed (overrides the config)");
    sub->add_option("--jobs", o.jobs, "Concurrent solves or simulation threads")->check(CLI::PositiveNumber);
    sub->add_option("-o,--out", o.out, "Run directory (default: $LIQPORT_OUTPUT_ROOT/<run name>)");
  };
  CLI::App* calibrate = app.add_subcommand("calibrate", "Fit every utility family per horizon bucket");
  common(calibrate);
  calibrate->add_option("--chains", o.chains, "Directory with chain CSVs and realizations.csv");
  calibrate->add_flag("--synthetic", o.synthetic, "Generate synthetic chains into the run directory");
  CLI::App* solve = app.add_subcommand("solve", "Solve the control problem once");
  common(solve);
  solve->add_option("--max-outer", o.max_outer, "Outer iteration cap")->check(CLI::PositiveNumber);
  CLI::App* merton = app.add_subcommand("validate-merton", "Compare against the constant-volatility closed form");
  common(merton);
  merton->add_option("--max-outer", o.max_outer, "Outer iteration cap")->check(CLI::PositiveNumber);
  CLI::App* sweep = app.add_subcommand("sweep", "Sensitivity sweep over one parameter");
  common(sweep);
  sweep->add_option("--variable", o.variable, "beta, kappa_TC, sigma_L or v0")
      ->check(CLI::IsMember({"beta", "kappa_TC", "sigma_L", "v0"}));
  sweep->add_option("--values", o.values, "Comma-separated sweep values")->delimiter(',');
  sweep->add_option("--max-outer", o.max_outer, "Outer iteration cap")->check(CLI::PositiveNumber);

  CLI11_PARSE(app, argc, argv);
  const std::string name = app.get_subcommands().front()->get_name();

  try {
    ex::ExperimentConfig cfg = o.config.empty() ? ex::ExperimentConfig{} : ex::load_config(o.config);
    cfg.command = ex::command_from_string(name);
    if (o.seed) cfg.seed = *o.seed;
    if (o.jobs) cfg.jobs = *o.jobs;
    if (o.max_outer) cfg.solver.max_outer = *o.max_outer;
    if (!o.chains.empty()) cfg.calibration.chains_dir = o.chains;
    if (o.synthetic) cfg.calibration.synthetic = true;
    if (!o.variable.empty()) {
      cfg.sweep.variable = o.variable;
      if (o.values.empty()) {
        if (o.variable == "beta") cfg.sweep.values = {0.1, 0.3, 0.5};
        else if (o.variable == "kappa_TC") cfg.sweep.values = {0.0, 0.004, 0.008};
        else cfg.sweep.values = {0.1, 0.2, 0.3};
      }
    }
    if (!o.values.empty()) cfg.sweep.values = o.values;
    if (cfg.command == ex::Command::calibrate && !cfg.calibration.synthetic && cfg.calibration.chains_dir.empty()) {
      std::cerr << "calibrate: pass --chains DIR or --synthetic\n";
      return ex::kExitUsage;
    }
    cfg.validate();

    const fs::path dir =
        o.out.empty() ? output_root() / (cfg.output.empty() ? ex::default_run_name(cfg) : cfg.output) : fs::path(o.out);
    const ex::RunResult r = ex::run(cfg, dir);
    std::cout << name << ": " << r.status << " (exit " << r.exit_code << ") -> " << dir.string() << '\n';
    for (const std::string& n : r.notes) std::cout << "  note: " << n << '\n';
    for (const auto& [k, v] : r.checks.items()) std::cout << "  " << k << ": " << v.dump() << '\n';
    return r.exit_code;
  } catch (const std::exception& e) {
    std::cerr << name << ": " << e.what() << '\n';
    return ex::kExitUsage;
  }
}
