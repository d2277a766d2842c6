#pragma once

#include <cstddef>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "liqport/calibration/berkowitz.hpp"
#include "liqport/calibration/chain.hpp"
#include "liqport/calibration/density.hpp"
#include "liqport/numerics/optimize.hpp"
#include "liqport/utility/utility.hpp"

namespace liqport::calibration {

/// A risk-neutral density and the price realized at its expiry.
struct CalibrationSample {
  DensityEstimate q;
  double realization = 0.0;
  std::string expiry;
};

struct PipelineOptions {
  ChainFilters filters;
  DensityOptions density;
  double smoothing = 0.99;
  /// Keep only chains whose horizon_weeks equals this; 0 keeps all.
  int horizon_weeks = 0;
};

struct PipelineReport {
  std::size_t chains_seen = 0;
  std::size_t chains_used = 0;
  /// "expiry: reason" for every chain dropped on the way.
  std::vector<std::string> dropped;
  std::size_t quotes_seen = 0;
  std::size_t quotes_kept = 0;
};

/// Groups rows by expiry, ingests each chain, fits its smile and extracts the
/// risk-neutral density. Chains without a realization, outside the horizon
/// bucket, too small, or with an unusable density are dropped and reported.
std::vector<CalibrationSample> build_samples(std::span<const RawQuote> rows,
                                             const std::map<std::string, double>& realizations,
                                             const PipelineOptions& options = {}, PipelineReport* report = nullptr);

/// CSV "expiry,price".
std::map<std::string, double> read_realizations_csv(std::istream& in);
void write_realizations_csv(std::span<const std::string> expiries, std::span<const double> prices,
                            std::ostream& out);

struct UtilityEvaluation {
  BerkowitzResult tests;
  std::size_t n_clamped = 0;
};

/// Subjective densities under u, PIT of the realizations, Berkowitz tests.
UtilityEvaluation evaluate_utility(const utility::UtilitySpec& u, std::span<const CalibrationSample> samples);

struct CalibrationOptions {
  numerics::OptimizerConfig optimizer = default_optimizer();
  /// Relative step of the central-difference gradient in transformed coordinates.
  double fd_step = 1e-4;

  static numerics::OptimizerConfig default_optimizer();
};

struct CalibrationResult {
  utility::UtilitySpec fitted;
  BerkowitzResult tests;
  std::size_t n_samples = 0;
  std::size_t n_clamped = 0;
  bool failed = false;
  std::string message;
  int iterations = 0;
  int evaluations = 0;
};

/// Minimizes LR3 over the parameters of the starting utility's family
/// (positive parameters are optimized on the log scale). On optimizer failure
/// the best parameters seen are returned with failed = true. Needs at least 8
/// samples.
CalibrationResult calibrate_utility(const utility::UtilitySpec& start, std::span<const CalibrationSample> samples,
                                    const CalibrationOptions& options = {});

}  // namespace liqport::calibration
