#pragma once

namespace liqport::calibration {

double normal_cdf(double x);
double normal_pdf(double x);
/// Inverse of normal_cdf; p must lie in (0, 1).
double normal_quantile(double p);

/// Undiscounted-forward Black formula: discount * (F N(d1) - K N(d2)).
double black_call(double forward, double strike, double vol, double tau, double discount);

/// Forward delta N(d1) of a European call.
double forward_delta(double forward, double strike, double vol, double tau);

/// Strike whose forward delta equals `delta` at volatility `vol`.
double strike_from_delta(double forward, double delta, double vol, double tau);

/// Implied volatility by bracketed root finding on [1e-6, 5]. Throws
/// std::domain_error when the price violates the no-arbitrage bounds
/// discount*max(F-K, 0) < C < discount*F.
double implied_vol(double price, double forward, double strike, double tau, double discount);

}  // namespace liqport::calibration
