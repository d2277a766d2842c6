#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "liqport/hjb/network.hpp"
#include "liqport/hjb/policy_iteration.hpp"
#include "liqport/market/params.hpp"
#include "liqport/utility/utility.hpp"

namespace liqport::experiments {

enum class Command { calibrate, solve, validate_merton, sweep };

const char* to_string(Command c);
/// Accepts "calibrate", "solve", "validate-merton" and "sweep".
Command command_from_string(const std::string& s);

/// Point at which sweep curves are read off.
struct Slice {
  double t = 0.5;
  double W = 5.5;
  double theta = 0.2;
  double v = 0.1;
  double L = 0.3;

  market::MarketState state() const { return {W, v, theta, L, t}; }
};

struct SweepSpec {
  /// One of "beta", "kappa_TC", "sigma_L", "v0".
  std::string variable = "beta";
  std::vector<double> values{0.1, 0.3, 0.5};
};

/// Constant-volatility power-utility case.
struct MertonCase {
  double gamma = 0.5;
  double r = 0.02;
  double mu = 0.05;
  double sigma = 0.4;
  double T = 1.0;
  /// Pass thresholds for the comparison table.
  double policy_tolerance = 0.02;
  double value_tolerance = 0.01;
};

/// Training budget; the optimizer fields map onto hjb::SolverConfig.
struct SolverSettings {
  int hidden = 64;
  std::size_t n_interior = 4000;
  std::size_t n_terminal = 1000;
  int max_outer = 50;
  double tolerance = 1e-4;
  int evaluation_iterations = 200;
  int improvement_iterations = 100;
  double step = 1.0;
};

struct SyntheticChains {
  std::size_t n_expiries = 60;
  double tilt = 0.0;
  std::vector<int> days{7, 14, 21, 28};
  double atm_vol = 0.2;
};

struct CalibrationSettings {
  /// Directory holding chain CSVs and realizations.csv; ignored when
  /// `synthetic` is set, in which case the chains are generated into the run
  /// directory first.
  std::filesystem::path chains_dir;
  bool synthetic = false;
  SyntheticChains synthetic_chains;
  std::vector<int> horizons{1, 2, 3, 4};
  std::size_t n_mc = 199;
  /// Buckets with fewer usable chains are skipped.
  std::size_t min_chains = 8;
  /// Densities span forward deltas [tail_delta, 1 - tail_delta]; realizations
  /// beyond the grid would have their PIT clamped.
  double tail_delta = 1e-5;
};

struct ExperimentConfig {
  Command command = Command::solve;
  std::uint64_t seed = 0;
  std::size_t jobs = 1;
  /// Run directory name under the output root; empty picks one from the command.
  std::string output;
  /// Reuse solved networks stored here, keyed by solve hash. Empty disables.
  std::filesystem::path cache_dir;
  market::ModelParams params;
  utility::UtilitySpec utility = utility::concavify(utility::SShaped{});
  hjb::Domain domain;
  SolverSettings solver;
  Slice slice;
  SweepSpec sweep;
  MertonCase merton;
  CalibrationSettings calibration;

  /// Throws std::invalid_argument for an empty sweep list, an unknown sweep
  /// variable, a slice outside the domain or invalid parameters.
  void validate() const;
};

/// Missing keys keep their defaults; unknown top-level keys are rejected.
ExperimentConfig config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ExperimentConfig& c);
ExperimentConfig load_config(const std::filesystem::path& file);

/// 64-bit FNV-1a of the canonical JSON, with `jobs`, `output` and
/// `cache_dir` left out since they do not change results.
std::uint64_t config_hash(const ExperimentConfig& c);
std::string hex(std::uint64_t h);

hjb::SolverConfig solver_config(const SolverSettings& s, std::uint64_t seed);

}  // namespace liqport::experiments
