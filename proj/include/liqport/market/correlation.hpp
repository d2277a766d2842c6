#pragma once

#include <stdexcept>

#include <Eigen/Core>

#include "liqport/market/params.hpp"

namespace liqport::market {

/// Driver order used by every 5x5 matrix below.
enum Driver : int { kStock = 0, kLiquidityPrice = 1, kVariance = 2, kVarianceLevel = 3, kIlliquidity = 4 };

using Matrix5 = Eigen::Matrix<double, 5, 5>;

struct CorrelationSpec {
  Matrix5 matrix;
  /// factor * factor^T == matrix (up to rounding).
  Matrix5 factor;
  /// True when the assembled matrix was not PSD and was replaced by the
  /// nearest unit-diagonal PSD matrix.
  bool projected = false;
};

class NotPositiveSemidefinite : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Places rho1..rho6 at their driver pairs; every other off-diagonal is zero.
Matrix5 assemble_correlation(const ModelParams& p);

/// Nearest correlation matrix (unit diagonal, PSD) by alternating projections
/// with Dykstra's correction.
Matrix5 nearest_correlation(const Matrix5& a, int max_iter = 500, double tol = 1e-12);

/// Assembles, checks PSD and factors. Non-PSD input throws
/// NotPositiveSemidefinite unless `allow_projection` is set, in which case the
/// nearest correlation matrix is used and `projected` is raised.
CorrelationSpec build_correlation(const ModelParams& p, bool allow_projection = false);

}  // namespace liqport::market
