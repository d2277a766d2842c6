#pragma once

#include <array>
#include <string>

#include <json.hpp>

namespace liqport::market {

/// Parameters of the four-factor market (stock, variance, stochastic variance
/// level, illiquidity) and of the proportional-cost wealth dynamics.
///
/// Defaults are the baseline used throughout the sensitivity studies.
/// `theta_hat_L` is the cost-free illiquidity level and `xi` the curvature of
/// the cost feedback.
struct ModelParams {
  double r = 0.01;
  double mu = 0.05;
  double kappa = 5.0;
  double sigma1 = 0.1;
  double lambda = 1.5;
  double eta = 0.15;
  double sigma2 = 0.1;
  double alpha = 2.0;
  double theta_hat_L = 0.6;
  double lambda_TC = 5.0;
  double kappa_TC = 0.004;
  double xi = 0.5;
  double sigma_L = 0.2;
  double beta = 0.3;
  /// rho[0..5] = rho1..rho6: (S,v), (S,theta), (v,theta), (S,gamma), (S,L), (gamma,L).
  std::array<double, 6> rho{0.5, 0.2, 0.3, 0.5, 0.5, 0.5};
  double delta_t = 1.0 / 12.0;
  double T = 1.0;

  double rho1() const { return rho[0]; }
  double rho2() const { return rho[1]; }
  double rho3() const { return rho[2]; }
  double rho4() const { return rho[3]; }
  double rho5() const { return rho[4]; }
  double rho6() const { return rho[5]; }

  /// Range checks on every field; throws std::invalid_argument naming the field.
  /// Positive semidefiniteness of the completed correlation matrix is checked
  /// separately by build_correlation().
  void validate() const;

  /// Constant-volatility, frictionless reduction: every liquidity, cost and
  /// volatility-dynamics parameter set to zero. The variance state is then
  /// constant and should be held at sigma^2 for a chosen volatility sigma.
  static ModelParams merton(double r, double mu, double T);
};

struct MarketState {
  double W = 0.0;
  double v = 0.0;
  double theta = 0.0;
  double L = 0.0;
  double t = 0.0;
};

/// Field-for-field JSON mapping (keys r, mu, kappa, sigma1, lambda, eta,
/// sigma2, alpha, theta_hat_L, lambda_TC, kappa_TC, xi, sigma_L, beta,
/// rho1..rho6, delta_t, T). Missing keys keep their defaults; unknown keys are
/// rejected, except "gamma" which belongs to the power-utility validation case
/// and is ignored here.
nlohmann::json to_json(const ModelParams& p);
ModelParams params_from_json(const nlohmann::json& j, ModelParams base = {});

/// Named scalar access used by sweeps ("beta", "kappa_TC", "sigma_L", ...).
double get_param(const ModelParams& p, const std::string& name);
void set_param(ModelParams& p, const std::string& name, double value);

}  // namespace liqport::market
