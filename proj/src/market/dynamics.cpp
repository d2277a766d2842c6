#include "liqport/market/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace liqport::market {

namespace {

void check_state(const MarketState& s) {
  if (!(s.v >= 0.0)) throw std::domain_error("variance v must be >= 0, got " + std::to_string(s.v));
  if (!(s.theta >= 0.0)) throw std::domain_error("variance level theta must be >= 0, got " + std::to_string(s.theta));
  if (!(s.W >= 0.0)) throw std::domain_error("wealth W must be >= 0, got " + std::to_string(s.W));
  if (!std::isfinite(s.L) || !std::isfinite(s.t)) throw std::domain_error("non-finite state");
}

void check_omega(double omega) {
  if (!(omega >= 0.0 && omega <= 1.0))
    throw std::domain_error("allocation omega must lie in [0, 1], got " + std::to_string(omega));
}

}  // namespace

double liquidity_mean_level(double L, const ModelParams& p) {
  if (!(L >= 0.0)) throw std::domain_error("illiquidity L must be >= 0, got " + std::to_string(L));
  return p.theta_hat_L + p.lambda_TC * p.kappa_TC * std::pow(L, p.xi);
}

double mixed_volatility(double beta, double L, double v, double rho4) {
  if (!(std::abs(rho4) <= 1.0)) throw std::domain_error("rho4 must lie in [-1, 1]");
  if (!(v >= 0.0) || !(L >= 0.0)) throw std::domain_error("mixed volatility needs v >= 0 and L >= 0");
  const double a = beta * L + rho4 * std::sqrt(v);
  return std::sqrt(a * a + (1.0 - rho4 * rho4) * v);
}

double expected_abs_mixed_brownian(double beta, double L, double v, double rho4, double dt) {
  if (!(dt > 0.0)) throw std::domain_error("dt must be > 0");
  return std::sqrt(2.0 / std::numbers::pi) * mixed_volatility(beta, L, v, rho4) * std::sqrt(dt);
}

double wealth_variance_rate(double L, double v, const ModelParams& p) {
  return p.beta * p.beta * L * L + v + 2.0 * p.rho4() * p.beta * std::sqrt(v) * L;
}

double tc_intensity(double L, double v, const ModelParams& p) {
  return std::sqrt(2.0 / (std::numbers::pi * p.delta_t)) * p.kappa_TC * mixed_volatility(p.beta, L, v, p.rho4());
}

double expected_tc_drift(double omega, double W, double v, double L, const ModelParams& p) {
  check_omega(omega);
  return tc_intensity(std::max(L, 0.0), v, p) * ((1.0 - omega) * omega) * W;
}

CoefficientBundle& CoefficientBundle::operator+=(const CoefficientBundle& o) {
  drift_W += o.drift_W;
  drift_v += o.drift_v;
  drift_theta += o.drift_theta;
  drift_L += o.drift_L;
  diff_WW += o.diff_WW;
  diff_vv += o.diff_vv;
  diff_thetatheta += o.diff_thetatheta;
  diff_LL += o.diff_LL;
  cross_Wv += o.cross_Wv;
  cross_Wtheta += o.cross_Wtheta;
  cross_WL += o.cross_WL;
  cross_vtheta += o.cross_vtheta;
  return *this;
}

CoefficientBundle CoefficientBundle::operator*(double s) const {
  CoefficientBundle c = *this;
  c.drift_W *= s;
  c.drift_v *= s;
  c.drift_theta *= s;
  c.drift_L *= s;
  c.diff_WW *= s;
  c.diff_vv *= s;
  c.diff_thetatheta *= s;
  c.diff_LL *= s;
  c.cross_Wv *= s;
  c.cross_Wtheta *= s;
  c.cross_WL *= s;
  c.cross_vtheta *= s;
  return c;
}

CoefficientBundle hjb_coefficients(const MarketState& s, double omega, const ModelParams& p) {
  check_state(s);
  check_omega(omega);
  const double L = std::max(s.L, 0.0);
  const double v = s.v, th = s.theta, W = s.W;
  const double sv = std::sqrt(v), svt = std::sqrt(v * th);
  const double ow = omega * W;

  CoefficientBundle c;
  c.drift_W = (p.r + (p.mu - p.r) * omega - tc_intensity(L, v, p) * ((1.0 - omega) * omega)) * W;
  c.drift_v = p.kappa * (th - v);
  c.drift_theta = p.lambda * (p.eta - th);
  c.drift_L = p.alpha * (liquidity_mean_level(L, p) - L);
  c.diff_WW = 0.5 * wealth_variance_rate(L, v, p) * ow * ow;
  c.diff_vv = 0.5 * p.sigma1 * p.sigma1 * v;
  c.diff_thetatheta = 0.5 * p.sigma2 * p.sigma2 * th;
  c.diff_LL = 0.5 * p.sigma_L * p.sigma_L;
  c.cross_Wv = p.rho1() * p.sigma1 * v * ow;
  c.cross_Wtheta = p.rho2() * p.sigma2 * svt * ow;
  c.cross_WL = (p.rho6() * p.beta * L + p.rho5() * sv) * p.sigma_L * ow;
  c.cross_vtheta = p.rho3() * p.sigma1 * p.sigma2 * svt;
  return c;
}

CoefficientBundle OmegaExpansion::at(double omega) const {
  CoefficientBundle c = constant;
  c += linear * omega;
  c += quadratic * (omega * omega);
  return c;
}

OmegaExpansion hjb_coefficient_expansion(const MarketState& s, const ModelParams& p) {
  check_state(s);
  OmegaExpansion e;
  e.constant = hjb_coefficients(s, 0.0, p);
  const double L = std::max(s.L, 0.0);
  const double W = s.W, v = s.v;
  const double sv = std::sqrt(v), svt = std::sqrt(v * s.theta);
  const double c = tc_intensity(L, v, p);

  e.linear.drift_W = (p.mu - p.r - c) * W;
  e.linear.cross_Wv = p.rho1() * p.sigma1 * v * W;
  e.linear.cross_Wtheta = p.rho2() * p.sigma2 * svt * W;
  e.linear.cross_WL = (p.rho6() * p.beta * L + p.rho5() * sv) * p.sigma_L * W;

  e.quadratic.drift_W = c * W;
  e.quadratic.diff_WW = 0.5 * wealth_variance_rate(L, v, p) * W * W;
  return e;
}

}  // namespace liqport::market
