#include "liqport/calibration/density.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "liqport/calibration/black.hpp"

namespace liqport::calibration {

namespace {

double trapezoid(const std::vector<double>& s, const std::vector<double>& f) {
  double m = 0.0;
  for (std::size_t i = 0; i + 1 < s.size(); ++i) m += 0.5 * (f[i] + f[i + 1]) * (s[i + 1] - s[i]);
  return m;
}

// Mass of the linear interpolant on [s_i, s_i + a].
double partial_cell(double qi, double qj, double h, double a) { return a * qi + 0.5 * a * a * (qj - qi) / h; }

}  // namespace

double DensityEstimate::mean() const {
  // Exact first moment of the piecewise-linear interpolant.
  double m = 0.0;
  for (std::size_t i = 0; i + 1 < s.size(); ++i) {
    const double a = s[i], b = s[i + 1], fa = density[i], fb = density[i + 1];
    m += (b - a) * (fa * (2 * a + b) + fb * (a + 2 * b)) / 6.0;
  }
  return m;
}

double DensityEstimate::cdf(double x) const {
  if (x <= s.front()) return 0.0;
  if (x >= s.back()) return 1.0;
  const std::size_t i = static_cast<std::size_t>(std::upper_bound(s.begin(), s.end(), x) - s.begin()) - 1;
  double m = 0.0;
  for (std::size_t k = 0; k < i; ++k) m += 0.5 * (density[k] + density[k + 1]) * (s[k + 1] - s[k]);
  m += partial_cell(density[i], density[i + 1], s[i + 1] - s[i], x - s[i]);
  return std::clamp(m, 0.0, 1.0);
}

double DensityEstimate::quantile(double u) const {
  if (!(u >= 0.0 && u <= 1.0)) throw std::domain_error("quantile level must lie in [0, 1]");
  double m = 0.0;
  for (std::size_t i = 0; i + 1 < s.size(); ++i) {
    const double h = s[i + 1] - s[i];
    const double cell = 0.5 * (density[i] + density[i + 1]) * h;
    if (m + cell >= u && cell > 0.0) {
      const double r = u - m;
      const double qi = density[i], slope = (density[i + 1] - density[i]) / h;
      const double disc = std::max(qi * qi + 2.0 * slope * r, 0.0);
      const double denom = qi + std::sqrt(disc);
      const double a = denom > 0.0 ? 2.0 * r / denom : h;
      return s[i] + std::clamp(a, 0.0, h);
    }
    m += cell;
  }
  return s.back();
}

DensityEstimate make_density(std::vector<double> s, std::vector<double> values) {
  if (s.size() < 2 || values.size() != s.size()) throw std::invalid_argument("density needs >= 2 matching grid points");
  for (std::size_t i = 0; i + 1 < s.size(); ++i)
    if (!(s[i + 1] > s[i])) throw std::invalid_argument("density grid must be strictly increasing");
  for (double v : values)
    if (!(v >= 0.0) || !std::isfinite(v)) throw DensityError("density values must be finite and >= 0");
  DensityEstimate d;
  d.s = std::move(s);
  d.density = std::move(values);
  d.normalization = trapezoid(d.s, d.density);
  if (!(d.normalization > 0.0)) throw DensityError("density has zero mass");
  for (double& v : d.density) v /= d.normalization;
  return d;
}

double smile_delta(const CubicSpline& smile, const OptionChain& chain, double strike) {
  double lo = 0.0, hi = 1.0;
  for (int it = 0; it < 80; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double g = forward_delta(chain.forward, strike, smile(mid), chain.tau) - mid;
    (g > 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

DensityEstimate rn_density(const CubicSpline& smile, const OptionChain& chain, const DensityOptions& opt) {
  if (opt.n_points < 3) throw std::invalid_argument("density grid needs >= 3 points");
  if (!(0.0 < opt.delta_low && opt.delta_low < opt.delta_high && opt.delta_high < 1.0))
    throw std::invalid_argument("density delta range must satisfy 0 < low < high < 1");
  const double k_lo = strike_from_delta(chain.forward, opt.delta_high, smile(opt.delta_high), chain.tau);
  const double k_hi = strike_from_delta(chain.forward, opt.delta_low, smile(opt.delta_low), chain.tau);
  const std::size_t n = opt.n_points;
  const double h = (k_hi - k_lo) / static_cast<double>(n - 1);
  if (!(h > 0.0) || !(k_lo - h > 0.0)) throw DensityError("degenerate strike grid");

  // Prices on n + 2 strikes so every grid point has a centred second difference.
  std::vector<double> price(n + 2);
  for (std::size_t i = 0; i < n + 2; ++i) {
    const double K = k_lo + (static_cast<double>(i) - 1.0) * h;
    const double vol = smile(smile_delta(smile, chain, K));
    price[i] = black_call(chain.forward, K, vol, chain.tau, chain.discount);
  }
  const double growth = 1.0 / chain.discount;
  std::vector<double> s(n), q(n);
  double negative = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    s[i] = k_lo + static_cast<double>(i) * h;
    q[i] = growth * (price[i + 2] - 2.0 * price[i + 1] + price[i]) / (h * h);
    if (q[i] < 0.0) {
      negative -= q[i];
      q[i] = 0.0;
    }
  }
  DensityEstimate d = make_density(std::move(s), std::move(q));
  d.clipped_mass = negative * h / d.normalization;
  if (d.clipped_mass > opt.max_clipped)
    throw DensityError("negative density mass " + std::to_string(d.clipped_mass) + " exceeds the clipping limit");
  if (d.normalization < opt.min_mass || d.normalization > opt.max_mass)
    throw DensityError("risk-neutral density mass " + std::to_string(d.normalization) + " outside the accepted range");
  return d;
}

DensityEstimate subjective_density(const DensityEstimate& q, const utility::UtilitySpec& u) {
  std::vector<double> p(q.s.size());
  for (std::size_t i = 0; i < q.s.size(); ++i) {
    const double m = utility::marginal(u, q.s[i]);
    if (!(m > 0.0)) throw std::domain_error("marginal utility must be > 0 on the density grid");
    p[i] = q.density[i] / m;
  }
  DensityEstimate out = make_density(q.s, std::move(p));
  out.clipped_mass = q.clipped_mass;
  return out;
}

PitResult pit_transform(std::span<const double> realizations, std::span<const DensityEstimate> densities, double eps) {
  if (realizations.size() != densities.size()) throw std::invalid_argument("need one density per realization");
  PitResult r;
  r.y.resize(realizations.size());
  r.clamped.assign(realizations.size(), false);
  for (std::size_t t = 0; t < realizations.size(); ++t) {
    const double y = densities[t].cdf(realizations[t]);
    if (y < eps || y > 1.0 - eps) {
      r.y[t] = std::clamp(y, eps, 1.0 - eps);
      r.clamped[t] = true;
      ++r.n_clamped;
    } else {
      r.y[t] = y;
    }
  }
  return r;
}

double l1_distance(const DensityEstimate& d, const std::function<double(double)>& pdf, double outside_mass) {
  std::vector<double> diff(d.s.size());
  for (std::size_t i = 0; i < d.s.size(); ++i) diff[i] = std::abs(d.density[i] - pdf(d.s[i]));
  return trapezoid(d.s, diff) + outside_mass;
}

void write_density_csv(const DensityEstimate& q, const DensityEstimate& p, std::ostream& out) {
  if (q.s != p.s) throw std::invalid_argument("densities must share a grid");
  out << "s,q,p\n";
  const auto old = out.precision(17);
  for (std::size_t i = 0; i < q.s.size(); ++i) out << q.s[i] << ',' << q.density[i] << ',' << p.density[i] << '\n';
  out.precision(old);
}

}  // namespace liqport::calibration
