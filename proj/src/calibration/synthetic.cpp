#include "liqport/calibration/synthetic.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

#include "liqport/calibration/black.hpp"
#include "liqport/numerics/random.hpp"

namespace liqport::calibration {

namespace {

double tau_of(const SyntheticChainSpec& spec) { return spec.days / 365.0; }

double forward_of(const SyntheticChainSpec& spec) {
  return spec.underlying * std::exp(spec.rate * tau_of(spec));
}

void check(const SyntheticChainSpec& spec) {
  if (spec.days <= 0 || !(spec.underlying > 0.0) || !(spec.atm_vol > 0.0) || spec.n_strikes < 2 ||
      !(spec.width_sd > 0.0))
    throw std::invalid_argument("synthetic chain needs days, underlying, atm_vol, width_sd > 0 and >= 2 strikes");
}

}  // namespace

double synthetic_vol(const SyntheticChainSpec& spec, double strike) {
  const double m = std::log(strike / forward_of(spec));
  return spec.atm_vol + spec.skew * m + spec.curvature * m * m;
}

std::vector<RawQuote> synthetic_chain(const SyntheticChainSpec& spec) {
  check(spec);
  const double tau = tau_of(spec), F = forward_of(spec), D = std::exp(-spec.rate * tau);
  const double sd = spec.atm_vol * std::sqrt(tau);
  const std::string expiry = add_days(spec.as_of, spec.days);
  std::vector<RawQuote> rows;
  for (std::size_t i = 0; i < spec.n_strikes; ++i) {
    const double z = -spec.width_sd + 2.0 * spec.width_sd * static_cast<double>(i) / (spec.n_strikes - 1);
    const double K = F * std::exp(z * sd);
    const double vol = synthetic_vol(spec, K);
    if (!(vol > 0.0)) throw std::invalid_argument("synthetic smile is not positive at every strike");
    rows.push_back({spec.as_of, expiry, spec.underlying, spec.rate, K, black_call(F, K, vol, tau, D), spec.volume});
  }
  return rows;
}

double lognormal_pdf(double x, double m, double s) {
  if (!(x > 0.0)) return 0.0;
  const double z = (std::log(x) - m) / s;
  return std::exp(-0.5 * z * z) / (x * s * std::sqrt(2.0 * std::numbers::pi));
}

double lognormal_cdf(double x, double m, double s) {
  if (!(x > 0.0)) return 0.0;
  return normal_cdf((std::log(x) - m) / s);
}

LogMoments risk_neutral_moments(const SyntheticChainSpec& spec) {
  const double s = spec.atm_vol * std::sqrt(tau_of(spec));
  return {std::log(forward_of(spec)) - 0.5 * s * s, s};
}

SyntheticSeries synthetic_series(const SyntheticChainSpec& spec, std::size_t n_expiries, double tilt,
                                 std::uint64_t seed) {
  check(spec);
  SyntheticSeries out;
  const LogMoments lm = risk_neutral_moments(spec);
  for (std::size_t i = 0; i < n_expiries; ++i) {
    SyntheticChainSpec c = spec;
    c.as_of = add_days(spec.as_of, static_cast<int>(i) * spec.days);
    const auto rows = synthetic_chain(c);
    out.quotes.insert(out.quotes.end(), rows.begin(), rows.end());
    out.expiries.push_back(rows.front().expiry);
    std::mt19937_64 rng(numerics::substream_seed(seed, i));
    std::normal_distribution<double> n01;
    out.realizations.push_back(std::exp(lm.m + tilt * lm.s * lm.s + lm.s * n01(rng)));
  }
  return out;
}

}  // namespace liqport::calibration
