#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>

#include "liqport/calibration/density.hpp"

namespace liqport::calibration {

struct BerkowitzResult {
  double mu_hat = 0.0;
  double sigma2_hat = 1.0;
  double rho_hat = 0.0;
  /// -2 [L(0, 1, 0) - L(mu_hat, sigma2_hat, rho_hat)]
  double LR3 = 0.0;
  /// -2 [max over (mu, sigma2) of L(mu, sigma2, 0) - L(mu_hat, sigma2_hat, rho_hat)]
  double LR1 = 0.0;
  double p3 = 1.0;
  double p1 = 1.0;
  double adjusted_p3 = std::numeric_limits<double>::quiet_NaN();
  double adjusted_p1 = std::numeric_limits<double>::quiet_NaN();
  double loglik = 0.0;
  bool optimizer_converged = true;
};

/// Exact Gaussian AR(1) log-likelihood (stationary first observation).
double ar1_loglik(std::span<const double> z, double mu, double sigma2, double rho);

/// Upper tail of the chi-square distribution.
double chi2_sf(double x, double dof);

/// Inverse-normal transform of y, exact AR(1) MLE and the LR3/LR1 statistics
/// with asymptotic chi-square(3)/(1) p-values. Needs at least 8 values, all
/// strictly inside (0, 1).
BerkowitzResult berkowitz_tests(std::span<const double> y);

struct AdjustedPValues {
  double p3 = 1.0;
  double p1 = 1.0;
  std::size_t n_mc = 0;
};

/// Replaces realizations by pseudo-realizations drawn from the given
/// densities n_mc times, recomputes both statistics and reports
/// (1 + #{simulated >= observed}) / (n_mc + 1). Throws for n_mc < 100.
AdjustedPValues mc_adjust_pvalue(const BerkowitzResult& observed, std::span<const DensityEstimate> densities,
                                 std::size_t n_mc, std::uint64_t seed);

}  // namespace liqport::calibration
