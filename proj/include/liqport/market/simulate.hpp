#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

#include "liqport/market/correlation.hpp"
#include "liqport/market/params.hpp"

namespace liqport::market {

/// Allocation rule evaluated on a batch of states; writes one omega in [0, 1]
/// per state. Must be safe to call concurrently when jobs > 1.
using BatchPolicy = std::function<void(std::span<const MarketState>, std::span<double>)>;

BatchPolicy constant_policy(double omega);
BatchPolicy pointwise_policy(std::function<double(const MarketState&)> f);

struct SimulationConfig {
  std::size_t n_paths = 1000;
  std::size_t n_steps = 12;
  std::uint64_t seed = 0;
  /// Paths advanced together (one policy call per block and step).
  std::size_t block_size = 512;
  std::size_t jobs = 1;
  bool allow_projection = false;
};

/// Seed of the random substream owned by one path; independent of blocking
/// and scheduling.
std::uint64_t path_seed(std::uint64_t seed, std::uint64_t path_id);

/// Path-major storage of (n_steps + 1) reported states per path.
/// Reported v, theta and L are the truncated values max(x, 0).
struct PathEnsemble {
  std::size_t n_paths = 0;
  std::size_t n_steps = 0;
  std::vector<MarketState> states;
  bool projected_correlation = false;

  const MarketState& at(std::size_t path, std::size_t step) const { return states[path * (n_steps + 1) + step]; }
};

/// Full-truncation Euler scheme for (v, theta, L) with the wealth recursion
/// including the expected trading-cost drift. Runs from initial.t to p.T.
/// Wealth is absorbed at 0.
PathEnsemble simulate_paths(const ModelParams& p, const BatchPolicy& policy, const MarketState& initial,
                            const SimulationConfig& cfg);

/// Terminal states only, for paths [first_path, first_path + count). Memory
/// is bounded by the block size, so large ensembles can be streamed in
/// chunks. Identical to the last step of simulate_paths for the same ids.
std::vector<MarketState> simulate_terminal(const ModelParams& p, const BatchPolicy& policy,
                                           const MarketState& initial, const SimulationConfig& cfg,
                                           std::size_t first_path, std::size_t count);

/// CSV with header "path,step,W,v,theta,L".
void write_paths_csv(const PathEnsemble& e, std::ostream& out);

}  // namespace liqport::market
