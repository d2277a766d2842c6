#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "liqport/calibration/chain.hpp"

namespace liqport::calibration {

/// Black-priced chain with implied vol atm + skew*m + curvature*m^2 in
/// log-moneyness m = log(K/F). Strikes are F*exp(z*atm*sqrt(tau)) for z
/// evenly spread over [-width_sd, width_sd].
struct SyntheticChainSpec {
  std::string as_of = "2024-01-02";
  int days = 28;
  double underlying = 4.76;
  double rate = 0.02;
  double atm_vol = 0.2;
  double skew = 0.0;
  double curvature = 0.0;
  std::size_t n_strikes = 11;
  double width_sd = 2.5;
  double volume = 50000.0;
};

double synthetic_vol(const SyntheticChainSpec& spec, double strike);

std::vector<RawQuote> synthetic_chain(const SyntheticChainSpec& spec);

/// Lognormal density with log-mean m and log-sd s.
double lognormal_pdf(double x, double m, double s);
double lognormal_cdf(double x, double m, double s);

/// Log-mean and log-sd of the terminal price under the flat-vol risk-neutral
/// measure of a chain spec (uses atm_vol).
struct LogMoments {
  double m = 0.0;
  double s = 0.0;
};
LogMoments risk_neutral_moments(const SyntheticChainSpec& spec);

struct SyntheticSeries {
  std::vector<RawQuote> quotes;
  std::vector<std::string> expiries;
  std::vector<double> realizations;
};

/// n consecutive non-overlapping expiries sharing the chain shape, each
/// realized from the risk-neutral lognormal tilted by S^tilt (log-mean
/// shifted by tilt * s^2). tilt = 0 draws risk-neutrally.
SyntheticSeries synthetic_series(const SyntheticChainSpec& spec, std::size_t n_expiries, double tilt,
                                 std::uint64_t seed);

}  // namespace liqport::calibration
