#pragma once

#include <functional>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace liqport::numerics {

enum class Method { lbfgs, bfgs };
enum class LineSearch { backtracking_armijo, strong_wolfe };

struct OptimizerConfig {
  Method method = Method::lbfgs;
  /// Initial trial step of every line search.
  double learning_rate = 0.1;
  /// Number of (s, y) pairs kept by L-BFGS.
  int memory = 10;
  int max_iter = 500;
  double gradient_tolerance = 1e-6;
  LineSearch line_search = LineSearch::backtracking_armijo;
  double armijo_c1 = 1e-4;
  double wolfe_c2 = 0.9;
  double shrink = 0.5;
  int max_line_search_steps = 40;

  /// Throws std::invalid_argument when a field is out of range.
  void validate() const;
};

/// Returns f(x) and writes the gradient into `grad` (already sized).
using Objective = std::function<double(const Eigen::VectorXd& x, Eigen::VectorXd& grad)>;

struct MinimizeResult {
  Eigen::VectorXd x;
  double f = 0.0;
  double gradient_norm = 0.0;
  /// f at the start and after every accepted iteration.
  std::vector<double> trace;
  int iterations = 0;
  int evaluations = 0;
  bool converged = false;
  bool line_search_failed = false;
  std::string message;
};

MinimizeResult minimize(const Objective& f, Eigen::VectorXd x0,
                        const OptimizerConfig& config);

/// Wraps a value-only function with a central-difference gradient. Meant for
/// low-dimensional problems (a handful of parameters).
Objective finite_difference_objective(std::function<double(const Eigen::VectorXd&)> f,
                                      double relative_step = 1e-6);

}  // namespace liqport::numerics
