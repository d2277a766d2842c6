#include "liqport/oracles/monte_carlo.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace liqport::oracles {

McEstimate summarize(std::span<const double> values) {
  McEstimate e;
  e.n = values.size();
  if (e.n == 0) throw std::invalid_argument("no samples");
  double sum = 0.0;
  for (double x : values) sum += x;
  e.mean = sum / static_cast<double>(e.n);
  if (e.n > 1) {
    double ss = 0.0;
    for (double x : values) ss += (x - e.mean) * (x - e.mean);
    e.standard_error = std::sqrt(ss / static_cast<double>(e.n - 1) / static_cast<double>(e.n));
  }
  return e;
}

std::vector<double> terminal_utilities(const market::ModelParams& p, const market::BatchPolicy& policy,
                                       const market::MarketState& initial, const utility::UtilitySpec& u,
                                       const market::SimulationConfig& cfg, std::size_t first_path, std::size_t count) {
  const std::vector<market::MarketState> end = market::simulate_terminal(p, policy, initial, cfg, first_path, count);
  std::vector<double> out(end.size());
  std::transform(end.begin(), end.end(), out.begin(),
                 [&](const market::MarketState& s) { return utility::evaluate(u, s.W); });
  return out;
}

McEstimate mc_policy_value(const market::ModelParams& p, const market::BatchPolicy& policy,
                           const market::MarketState& initial, const utility::UtilitySpec& u,
                           const market::SimulationConfig& cfg) {
  if (cfg.n_paths == 0) throw std::invalid_argument("n_paths must be > 0");
  const std::vector<double> v = terminal_utilities(p, policy, initial, u, cfg, 0, cfg.n_paths);
  return summarize(v);
}

}  // namespace liqport::oracles
