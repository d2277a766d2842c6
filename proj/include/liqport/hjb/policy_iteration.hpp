#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "liqport/hjb/collocation.hpp"
#include "liqport/hjb/network.hpp"
#include "liqport/hjb/residual.hpp"
#include "liqport/market/params.hpp"
#include "liqport/numerics/optimize.hpp"
#include "liqport/utility/utility.hpp"

namespace liqport::hjb {

/// Collocation points with everything that stays fixed across a solve.
struct SolverProblem {
  CollocationSet points;
  OperatorBatch ops;
  /// Terminal utility at every terminal point.
  Eigen::RowVectorXd terminal_target;
  market::ModelParams params;
  utility::UtilitySpec utility;
};

/// Throws std::invalid_argument for a raw S-shaped utility (pass its
/// concave envelope instead) or invalid model parameters.
SolverProblem make_problem(const CollocationSet& points, const market::ModelParams& p, const utility::UtilitySpec& u);

struct LossBreakdown {
  double pde = 0.0;
  double terminal = 0.0;
  double total = 0.0;
  /// Interior points dropped for a non-finite residual.
  std::size_t excluded = 0;
};

/// Mean squared PDE residual under the given allocation per interior point,
/// plus mean squared terminal mismatch, for a value network with parameter
/// vector theta. Writes the parameter gradient when `grad` is non-null.
/// Throws std::domain_error when no interior point has a finite residual.
LossBreakdown evaluation_loss(const Mlp& value, const InputScaling& sc, const Eigen::RowVectorXd& omega,
                              const SolverProblem& problem, Eigen::VectorXd* grad = nullptr,
                              std::size_t chunk = 1024);

/// The same loss with the value function and its derivatives supplied
/// directly, for closed-form checks.
using ValueFunction = std::function<double(const market::MarketState&)>;
using DerivativeFunction = std::function<ChannelVector(const market::MarketState&)>;
using PolicyFunction = std::function<double(const market::MarketState&)>;
LossBreakdown evaluation_loss(const ValueFunction& value, const DerivativeFunction& derivatives,
                              const PolicyFunction& policy, const SolverProblem& problem);

/// Batch mean of the generator applied to the value network under the
/// policy network, with its gradient in the policy parameters.
double improvement_objective(const Mlp& policy, const InputScaling& sc, const Eigen::MatrixXd& jets,
                             const SolverProblem& problem, Eigen::VectorXd* grad = nullptr,
                             std::size_t chunk = 1024);

/// Active-channel derivatives of the value network at every interior point
/// (row c holds channel c; inactive rows are zero).
Eigen::MatrixXd interior_jets(const Mlp& value, const InputScaling& sc, const SolverProblem& problem,
                              std::size_t chunk = 1024);

/// Allocation of the policy network at every interior point.
Eigen::RowVectorXd interior_policy(const Mlp& policy, const InputScaling& sc, const SolverProblem& problem);

struct StepResult {
  Eigen::VectorXd theta;
  numerics::MinimizeResult optimizer;
  /// Loss (evaluation) or generator mean (improvement) at theta.
  double objective = 0.0;
  std::size_t excluded = 0;
  /// True when the optimizer stopped on a failure; theta is the best seen.
  bool failed = false;
};

/// Fits the value network for the fixed policy in `n`, starting from n.value.
StepResult policy_evaluation_step(const NetworkParams& n, const SolverProblem& problem,
                                  const numerics::OptimizerConfig& config, std::size_t chunk = 1024);
/// Maximizes the generator mean over the policy network, value fixed,
/// starting from n.policy.
StepResult policy_improvement_step(const NetworkParams& n, const SolverProblem& problem,
                                   const numerics::OptimizerConfig& config, std::size_t chunk = 1024);
/// The same with the value derivatives supplied as a 13 x n_interior matrix.
StepResult policy_improvement_step(const NetworkParams& n, const SolverProblem& problem, const Eigen::MatrixXd& jets,
                                   const numerics::OptimizerConfig& config, std::size_t chunk = 1024);

struct IterationRecord {
  int iteration = 0;
  double evaluation_loss = 0.0;
  double pde_loss = 0.0;
  double terminal_loss = 0.0;
  double generator_mean = 0.0;
  /// max |Q_k - Q_{k-1}| / max(|Q_{k-1}|, 1) over the monitoring grid.
  double max_relative_change = 0.0;
  /// Sup-norm distance to the reference value over the monitoring grid;
  /// NaN without a reference.
  double reference_distance = 0.0;
  int evaluation_iterations = 0;
  int improvement_iterations = 0;
  std::size_t excluded = 0;
  bool evaluation_failed = false;
  bool improvement_failed = false;
};

struct SolverConfig {
  int hidden = 64;
  std::size_t n_interior = 4000;
  std::size_t n_terminal = 1000;
  std::uint64_t seed = 0;
  int max_outer = 50;
  double tolerance = 1e-4;
  /// Consecutive outer-loss increases that abort the solve.
  int divergence_window = 3;
  std::size_t chunk = 1024;
  std::size_t monitor_nodes = 5;
  double init_amplitude = 0.1;
  numerics::OptimizerConfig evaluation = default_evaluation_optimizer();
  numerics::OptimizerConfig improvement = default_improvement_optimizer();
  /// Optional closed-form value for the distance trace.
  ValueFunction reference;
  /// Called after every outer iteration.
  std::function<void(const IterationRecord&, const NetworkParams&)> on_iteration;

  static numerics::OptimizerConfig default_evaluation_optimizer();
  static numerics::OptimizerConfig default_improvement_optimizer();
  void validate() const;
};

struct SolveReport {
  NetworkParams networks;
  std::vector<IterationRecord> iterations;
  bool converged = false;
  bool diverged = false;
  std::string message;
  double wall_seconds = 0.0;
};

/// Alternates evaluation and improvement until the monitoring-grid change
/// drops below the tolerance, the outer cap is hit, or the loss rises for
/// `divergence_window` consecutive iterations.
SolveReport policy_iteration(const market::ModelParams& p, const utility::UtilitySpec& u, const Domain& domain,
                             const SolverConfig& config);

}  // namespace liqport::hjb
