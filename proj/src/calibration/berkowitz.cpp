#include "liqport/calibration/berkowitz.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>
#include <vector>

#include <boost/math/special_functions/gamma.hpp>

#include "liqport/calibration/black.hpp"
#include "liqport/numerics/optimize.hpp"
#include "liqport/numerics/random.hpp"
#include "liqport/numerics/tape.hpp"

namespace liqport::calibration {

namespace {

using numerics::Tape;
using numerics::Var;

constexpr double kLog2Pi = 1.8378770664093454836;

// Negative log-likelihood in (mu, log sigma2, atanh rho) recorded on a tape.
Var ar1_nll(std::span<const double> z, std::span<const Var> th) {
  const Var mu = th[0];
  const Var s2 = exp(th[1]);
  const Var rho = tanh(th[2]);
  const Var one_m_r2 = 1.0 - square(rho);
  const double n = static_cast<double>(z.size());
  Var d0 = z[0] - mu;
  Var sse = square(d0) * one_m_r2;
  for (std::size_t t = 1; t < z.size(); ++t) {
    const Var e = (z[t] - mu) - rho * (z[t - 1] - mu);
    sse = sse + square(e);
  }
  return 0.5 * n * kLog2Pi + 0.5 * n * th[1] - 0.5 * log(one_m_r2) + 0.5 * sse / s2;
}

}  // namespace

double ar1_loglik(std::span<const double> z, double mu, double sigma2, double rho) {
  if (z.empty()) throw std::invalid_argument("empty series");
  if (!(sigma2 > 0.0) || !(std::abs(rho) < 1.0)) throw std::domain_error("AR(1) needs sigma2 > 0 and |rho| < 1");
  const double n = static_cast<double>(z.size());
  const double one_m_r2 = 1.0 - rho * rho;
  double sse = (z[0] - mu) * (z[0] - mu) * one_m_r2;
  for (std::size_t t = 1; t < z.size(); ++t) {
    const double e = (z[t] - mu) - rho * (z[t - 1] - mu);
    sse += e * e;
  }
  return -0.5 * n * kLog2Pi - 0.5 * n * std::log(sigma2) + 0.5 * std::log(one_m_r2) - 0.5 * sse / sigma2;
}

double chi2_sf(double x, double dof) {
  if (!(dof > 0.0)) throw std::invalid_argument("chi-square needs dof > 0");
  if (x <= 0.0) return 1.0;
  return boost::math::gamma_q(0.5 * dof, 0.5 * x);
}

BerkowitzResult berkowitz_tests(std::span<const double> y) {
  if (y.size() < 8) throw std::invalid_argument("Berkowitz test needs at least 8 observations");
  std::vector<double> z(y.size());
  for (std::size_t t = 0; t < y.size(); ++t) {
    if (!(y[t] > 0.0 && y[t] < 1.0)) throw std::domain_error("PIT values must lie strictly inside (0, 1)");
    z[t] = normal_quantile(y[t]);
  }
  const double n = static_cast<double>(z.size());
  double mean = 0.0;
  for (double v : z) mean += v;
  mean /= n;
  double var = 0.0, cov = 0.0;
  for (std::size_t t = 0; t < z.size(); ++t) var += (z[t] - mean) * (z[t] - mean);
  for (std::size_t t = 1; t < z.size(); ++t) cov += (z[t] - mean) * (z[t - 1] - mean);
  var /= n;
  if (!(var > 0.0)) throw std::domain_error("Berkowitz test needs a non-constant series");

  // Restricted (rho = 0) maximum, available in closed form.
  const double l_indep = ar1_loglik(z, mean, var, 0.0);
  const double l_null = ar1_loglik(z, 0.0, 1.0, 0.0);

  // Start from whichever of the restricted optimum and the moment estimate is better.
  const double rho0 = std::clamp(cov / (n * var), -0.95, 0.95);
  Eigen::VectorXd x0(3);
  x0 << mean, std::log(var * (1.0 - rho0 * rho0)), std::atanh(rho0);
  if (ar1_loglik(z, mean, var * (1.0 - rho0 * rho0), rho0) < l_indep) x0 << mean, std::log(var), 0.0;

  const numerics::Objective nll = [&z](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
    Tape tape;
    const Var th[3] = {tape.variable(x(0)), tape.variable(x(1)), tape.variable(x(2))};
    const Var out = ar1_nll(z, th);
    g = tape.gradient(out);
    return out.value();
  };
  numerics::OptimizerConfig cfg;
  cfg.learning_rate = 1.0;
  cfg.line_search = numerics::LineSearch::strong_wolfe;
  cfg.gradient_tolerance = 1e-9;
  cfg.max_iter = 300;
  const numerics::MinimizeResult r = numerics::minimize(nll, x0, cfg);

  BerkowitzResult out;
  out.optimizer_converged = r.converged;
  if (-r.f >= l_indep) {
    out.mu_hat = r.x(0);
    out.sigma2_hat = std::exp(r.x(1));
    out.rho_hat = std::tanh(r.x(2));
    out.loglik = -r.f;
  } else {
    out.mu_hat = mean;
    out.sigma2_hat = var;
    out.rho_hat = 0.0;
    out.loglik = l_indep;
  }
  out.LR3 = 2.0 * (out.loglik - l_null);
  out.LR1 = 2.0 * (out.loglik - l_indep);
  out.p3 = chi2_sf(out.LR3, 3.0);
  out.p1 = chi2_sf(out.LR1, 1.0);
  return out;
}

AdjustedPValues mc_adjust_pvalue(const BerkowitzResult& observed, std::span<const DensityEstimate> densities,
                                 std::size_t n_mc, std::uint64_t seed) {
  if (n_mc < 100) throw std::invalid_argument("Monte Carlo adjustment needs n_mc >= 100");
  std::size_t exceed3 = 0, exceed1 = 0;
  std::vector<double> x(densities.size());
  for (std::size_t m = 0; m < n_mc; ++m) {
    std::mt19937_64 rng(numerics::substream_seed(seed, m));
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    for (std::size_t t = 0; t < densities.size(); ++t) x[t] = densities[t].quantile(u01(rng));
    const PitResult pit = pit_transform(x, densities);
    const BerkowitzResult sim = berkowitz_tests(pit.y);
    if (sim.LR3 >= observed.LR3) ++exceed3;
    if (sim.LR1 >= observed.LR1) ++exceed1;
  }
  AdjustedPValues p;
  p.n_mc = n_mc;
  p.p3 = (1.0 + static_cast<double>(exceed3)) / (static_cast<double>(n_mc) + 1.0);
  p.p1 = (1.0 + static_cast<double>(exceed1)) / (static_cast<double>(n_mc) + 1.0);
  return p;
}

}  // namespace liqport::calibration
