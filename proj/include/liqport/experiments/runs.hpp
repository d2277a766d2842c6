#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "liqport/experiments/config.hpp"
#include "liqport/experiments/output.hpp"
#include "liqport/hjb/policy_iteration.hpp"

namespace liqport::experiments {

/// Exit codes shared by the runs and the command line.
enum ExitCode : int { kExitOk = 0, kExitCheckFailed = 1, kExitRunFailed = 2, kExitUsage = 64 };

/// Raised when a calibration input holds no option chains.
class NoChains : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Solves cfg.params with cfg.utility on cfg.domain. When cfg.cache_dir is
/// set, a stored report with the same solve hash is loaded instead of
/// re-solving, and fresh solves are stored there.
hjb::SolveReport solve_model(const ExperimentConfig& cfg, const hjb::ValueFunction& reference = {});

/// Hash of everything that determines a solve (params, utility, domain,
/// solver settings, seed).
std::uint64_t solve_hash(const ExperimentConfig& cfg);

struct MertonComparison {
  hjb::SolveReport report;
  double omega_star = 0.0;
  /// Rows at t in {0, T/2}: a fine W grid plus the monitoring nodes
  /// (monitor = 1 marks interior monitoring points).
  Table table;
  /// Maxima over the interior monitoring points at t in {0, T/2}.
  double max_policy_error = 0.0;
  double max_value_error = 0.0;
  bool pass = false;
};

/// Constant-volatility power-utility solve compared with the closed form.
MertonComparison validate_merton(const ExperimentConfig& cfg);

struct SweepResult {
  std::string variable;
  /// Sorted, baseline included.
  std::vector<double> values;
  std::vector<hjb::SolveReport> reports;
  /// Allocation and value at the slice, one per value.
  std::vector<double> omega;
  std::vector<double> value;
  /// Long-format slices: variable, W|t, value, omega.
  Table wealth;
  Table time;
  Table summary;
  /// Largest pairwise allocation gap at the slice.
  double max_gap = 0.0;
  bool non_increasing = false;
  bool failed = false;
  std::vector<std::string> notes;
};

/// Solves once per value of beta, kappa_TC or sigma_L (common seed), or once
/// at baseline for v0 with the slice read at v = v0. Runs up to cfg.jobs
/// solves at a time.
SweepResult sweep(const ExperimentConfig& cfg);

struct CalibrationTable {
  /// family, label, horizon_weeks, n, parameters, LR3, p3, adjusted_p3, LR1,
  /// p1, adjusted_p1, clamped, optimizer_failed.
  Table table;
  std::vector<std::string> notes;
};

/// Every implemented family fitted per horizon bucket from the chain CSVs
/// (every *.csv other than realizations.csv) in `chains_dir`. Throws
/// NoChains when the directory holds no quotes.
CalibrationTable calibrate_families(const ExperimentConfig& cfg, const std::filesystem::path& chains_dir);

/// Writes synthetic chains (one series per configured horizon) and their
/// realizations into `dir`.
void write_synthetic_chains(const ExperimentConfig& cfg, const std::filesystem::path& dir);

struct RunResult {
  int exit_code = kExitOk;
  std::string status = "pass";
  /// Paths relative to the run directory.
  std::vector<std::string> files;
  std::vector<std::string> notes;
  nlohmann::json checks = nlohmann::json::object();
};

/// Runs the configured command, writing CSV, SVG and manifest.json into
/// `run_dir`. Failures inside the run are reported through the exit code and
/// the manifest rather than thrown; invalid configs throw.
RunResult run(const ExperimentConfig& cfg, const std::filesystem::path& run_dir);

/// Default run directory name: the command, plus the sweep variable for sweeps.
std::string default_run_name(const ExperimentConfig& cfg);

}  // namespace liqport::experiments
