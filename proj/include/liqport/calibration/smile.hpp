#pragma once

#include <span>
#include <vector>

#include "liqport/calibration/chain.hpp"

namespace liqport::calibration {

/// Natural cubic spline given by knot values and knot second derivatives,
/// held constant outside [front knot, back knot].
class CubicSpline {
 public:
  CubicSpline() = default;
  CubicSpline(std::vector<double> knots, std::vector<double> values, std::vector<double> second);

  double operator()(double x) const;
  /// Integral of f''^2 over the knot range, exact for the piecewise cubic.
  double roughness() const;

  const std::vector<double>& knots() const { return x_; }
  const std::vector<double>& values() const { return f_; }
  const std::vector<double>& second_derivatives() const { return g_; }

 private:
  std::vector<double> x_, f_, g_;
};

/// Minimizer of lambda * sum w_i (y_i - f(x_i))^2 + (1 - lambda) * int f''^2
/// over natural cubic splines with knots at the data (Reinsch). Knots must be
/// distinct (throws std::runtime_error otherwise); lambda in (0, 1].
CubicSpline fit_smoothing_spline(std::span<const double> x, std::span<const double> y, std::span<const double> w,
                                 double lambda);

/// Implied-vol smile over forward delta from the chain's retained quotes,
/// weighted by volume share.
CubicSpline fit_smile(const OptionChain& chain, double lambda = 0.99);

}  // namespace liqport::calibration
