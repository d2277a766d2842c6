#include "liqport/oracles/merton.hpp"

#include <cmath>
#include <stdexcept>

namespace liqport::oracles {

void MertonSpec::validate() const {
  if (!(gamma > 0.0) || gamma == 1.0) throw std::invalid_argument("gamma must be > 0 and != 1");
  if (!(sigma > 0.0)) throw std::invalid_argument("sigma must be > 0");
  if (!(T > 0.0)) throw std::invalid_argument("T must be > 0");
  if (!std::isfinite(r) || !std::isfinite(mu)) throw std::invalid_argument("r and mu must be finite");
}

double merton_omega(const MertonSpec& s) {
  s.validate();
  return (s.mu - s.r) / (s.gamma * s.sigma * s.sigma);
}

double merton_growth(const MertonSpec& s) {
  s.validate();
  const double ex = s.mu - s.r;
  return (1.0 - s.gamma) * (s.r + ex * ex / (2.0 * s.gamma * s.sigma * s.sigma));
}

MertonSolution merton_closed_form(const MertonSpec& s, double W, double t) {
  if (!(W > 0.0)) throw std::invalid_argument("wealth must be > 0");
  const double a = merton_growth(s);
  const double g = s.gamma;
  const double e = std::exp(a * (s.T - t));
  MertonSolution out;
  out.value = std::pow(W, 1.0 - g) / (1.0 - g) * e;
  out.omega = merton_omega(s);
  out.dt = -a * out.value;
  out.dW = std::pow(W, -g) * e;
  out.dWW = -g * std::pow(W, -g - 1.0) * e;
  return out;
}

}  // namespace liqport::oracles
