#pragma once

namespace liqport::oracles {

/// Constant-volatility power-utility investor.
struct MertonSpec {
  double gamma = 0.5;
  double r = 0.02;
  double mu = 0.05;
  /// Volatility of the risky asset (variance sigma^2).
  double sigma = 0.4;
  double T = 1.0;

  /// Throws std::invalid_argument unless gamma > 0, gamma != 1, sigma > 0, T > 0.
  void validate() const;
};

struct MertonSolution {
  double value = 0.0;
  double omega = 0.0;
  /// dV/dt, dV/dW, d2V/dW2.
  double dt = 0.0;
  double dW = 0.0;
  double dWW = 0.0;
};

/// Growth constant a in V = W^(1-g)/(1-g) exp(a (T - t)).
double merton_growth(const MertonSpec& s);
/// Unconstrained optimal fraction (mu - r) / (gamma sigma^2).
double merton_omega(const MertonSpec& s);

MertonSolution merton_closed_form(const MertonSpec& s, double W, double t);

}  // namespace liqport::oracles
