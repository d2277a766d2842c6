#pragma once

#include "liqport/market/params.hpp"

namespace liqport::market {

/// Cost-dependent mean level of illiquidity: theta_hat_L + lambda_TC*kappa_TC*L^xi.
double liquidity_mean_level(double L, const ModelParams& p);

/// sqrt((beta*L + rho4*sqrt(v))^2 + (1 - rho4^2)*v): volatility of the mixed
/// increment beta*L*dB^gamma + sqrt(v)*dB^S per unit sqrt-time.
double mixed_volatility(double beta, double L, double v, double rho4);

/// E|beta*L*dB^gamma + sqrt(v)*dB^S| over an interval of length dt.
double expected_abs_mixed_brownian(double beta, double L, double v, double rho4, double dt);

/// Instantaneous variance rate of dW/(omega*W): beta^2 L^2 + v + 2 rho4 beta sqrt(v) L.
double wealth_variance_rate(double L, double v, const ModelParams& p);

/// sqrt(2/(pi*delta_t)) * kappa_TC * mixed_volatility, the per-unit-time cost
/// intensity multiplying (1-omega)*omega*W.
double tc_intensity(double L, double v, const ModelParams& p);

/// Expected proportional trading cost per unit time.
double expected_tc_drift(double omega, double W, double v, double L, const ModelParams& p);

/// Coefficients of the controlled generator, one per derivative of Q.
/// Diffusion entries already carry the factor 1/2; cross entries do not.
struct CoefficientBundle {
  double drift_W = 0.0;
  double drift_v = 0.0;
  double drift_theta = 0.0;
  double drift_L = 0.0;
  double diff_WW = 0.0;
  double diff_vv = 0.0;
  double diff_thetatheta = 0.0;
  double diff_LL = 0.0;
  double cross_Wv = 0.0;
  double cross_Wtheta = 0.0;
  double cross_WL = 0.0;
  double cross_vtheta = 0.0;

  CoefficientBundle& operator+=(const CoefficientBundle& o);
  CoefficientBundle operator*(double s) const;
};

/// Evaluates every generator coefficient at (state, omega). Negative L is
/// clipped to 0; negative v or theta and omega outside [0, 1] throw.
CoefficientBundle hjb_coefficients(const MarketState& s, double omega, const ModelParams& p);

/// The same coefficients split by powers of omega:
/// coeff(omega) = constant + omega*linear + omega^2*quadratic.
struct OmegaExpansion {
  CoefficientBundle constant;
  CoefficientBundle linear;
  CoefficientBundle quadratic;

  CoefficientBundle at(double omega) const;
};

OmegaExpansion hjb_coefficient_expansion(const MarketState& s, const ModelParams& p);

}  // namespace liqport::market
