#include "liqport/calibration/black.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>

#include <boost/math/special_functions/erf.hpp>
#include <boost/math/tools/roots.hpp>

namespace liqport::calibration {

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double normal_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw std::domain_error("normal quantile needs p in (0, 1)");
  return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p);
}

double black_call(double forward, double strike, double vol, double tau, double discount) {
  if (!(forward > 0.0 && strike > 0.0 && tau > 0.0)) throw std::domain_error("black_call needs F, K, tau > 0");
  if (!(vol > 0.0)) return discount * std::max(forward - strike, 0.0);
  const double sd = vol * std::sqrt(tau);
  const double d1 = (std::log(forward / strike) + 0.5 * sd * sd) / sd;
  return discount * (forward * normal_cdf(d1) - strike * normal_cdf(d1 - sd));
}

double forward_delta(double forward, double strike, double vol, double tau) {
  const double sd = vol * std::sqrt(tau);
  return normal_cdf((std::log(forward / strike) + 0.5 * sd * sd) / sd);
}

double strike_from_delta(double forward, double delta, double vol, double tau) {
  const double sd = vol * std::sqrt(tau);
  return forward * std::exp(-normal_quantile(delta) * sd + 0.5 * sd * sd);
}

double implied_vol(double price, double forward, double strike, double tau, double discount) {
  const double lower = discount * std::max(forward - strike, 0.0);
  const double upper = discount * forward;
  if (!(price > lower && price < upper))
    throw std::domain_error("call price outside no-arbitrage bounds; no implied volatility");
  const auto f = [&](double s) { return black_call(forward, strike, s, tau, discount) - price; };
  double lo = 1e-6, hi = 5.0;
  if (f(lo) >= 0.0) return lo;
  if (f(hi) <= 0.0) throw std::domain_error("implied volatility above 500%");
  std::uintmax_t iters = 200;
  const auto r = boost::math::tools::toms748_solve(f, lo, hi, boost::math::tools::eps_tolerance<double>(50), iters);
  return 0.5 * (r.first + r.second);
}

}  // namespace liqport::calibration
