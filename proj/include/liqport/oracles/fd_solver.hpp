#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

#include "liqport/market/params.hpp"
#include "liqport/utility/utility.hpp"

namespace liqport::oracles {

/// Wealth-time grid for the frozen-state reduction (v, theta, L held at the
/// given values; only W and t derivatives remain).
struct FdConfig {
  double v = 0.16;
  double theta = 0.16;
  double L = 0.0;
  /// W grid over [0, W_max], W_i = W_max sinh(c x_i) / sinh(c) for evenly
  /// spaced x_i in [0, 1] (uniform when c = 0); W = 0 is absorbing.
  double W_max = 24.0;
  double stretch = 3.0;
  std::size_t n_W = 401;
  /// Time nodes including t = 0 and t = T.
  std::size_t n_t = 101;
  double policy_tolerance = 1e-6;
  int max_policy_iterations = 100;

  void validate() const;
};

struct GridSolution {
  std::vector<double> W;
  std::vector<double> t;
  /// value[k][i] at (t[k], W[i]).
  std::vector<std::vector<double>> value;
  std::vector<std::vector<double>> policy;
  /// Scheme description, e.g. "implicit Euler, drift-sign upwind".
  std::string scheme;
  std::size_t steps = 0;
  /// Largest number of policy sweeps used in any time step.
  int max_policy_sweeps = 0;
  /// Time steps whose policy loop hit the iteration cap.
  std::size_t unconverged_steps = 0;

  /// Linear interpolation in W on time row k.
  double value_at(std::size_t k, double W) const;
  double policy_at(std::size_t k, double W) const;
};

/// Backward implicit Euler in time with policy iteration at every step.
/// First W-derivatives are upwinded by the sign of the drift at each node;
/// the top node uses zero curvature. Throws std::domain_error when a row of
/// the interior operator loses monotonicity (negative diffusion).
GridSolution fd_policy_iteration(const market::ModelParams& p, const utility::UtilitySpec& u, const FdConfig& cfg);

/// Per-node maximizer over [0, 1] of the upwinded discrete generator for
/// given neighbouring values; exposed for the exhaustive-search check.
double fd_node_argmax(const market::ModelParams& p, const market::MarketState& s, double h_minus, double h_plus,
                      double q_minus, double q, double q_plus);
/// Discrete generator at one node for a given allocation; h_minus and h_plus
/// are the spacings to the left and right neighbours.
double fd_node_generator(const market::ModelParams& p, const market::MarketState& s, double omega, double h_minus,
                         double h_plus, double q_minus, double q, double q_plus);

/// Wealth nodes used by fd_policy_iteration.
std::vector<double> fd_wealth_grid(const FdConfig& cfg);

/// Observed convergence order from three successively halved grids.
double observed_order(double coarse, double mid, double fine);

/// CSV with header "W,t,value,policy".
void write_grid_csv(const GridSolution& g, std::ostream& out);

}  // namespace liqport::oracles
