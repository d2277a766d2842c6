#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "liqport/market/params.hpp"
#include "liqport/market/simulate.hpp"
#include "liqport/utility/utility.hpp"

namespace liqport::oracles {

struct McEstimate {
  double mean = 0.0;
  double standard_error = 0.0;
  std::size_t n = 0;
};

/// Sample mean and standard error (n - 1 denominator) of the values, summed
/// in order.
McEstimate summarize(std::span<const double> values);

/// Terminal utility of paths [first_path, first_path + count) under the
/// policy. Each path owns its random substream, so any partition of the
/// ensemble reproduces the same per-path values.
std::vector<double> terminal_utilities(const market::ModelParams& p, const market::BatchPolicy& policy,
                                       const market::MarketState& initial, const utility::UtilitySpec& u,
                                       const market::SimulationConfig& cfg, std::size_t first_path, std::size_t count);

/// Estimate of E[U(W_T)] over cfg.n_paths paths started at `initial`.
McEstimate mc_policy_value(const market::ModelParams& p, const market::BatchPolicy& policy,
                           const market::MarketState& initial, const utility::UtilitySpec& u,
                           const market::SimulationConfig& cfg);

}  // namespace liqport::oracles
