#include "liqport/calibration/smile.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

#include <Eigen/Dense>

namespace liqport::calibration {

CubicSpline::CubicSpline(std::vector<double> knots, std::vector<double> values, std::vector<double> second)
    : x_(std::move(knots)), f_(std::move(values)), g_(std::move(second)) {
  if (x_.size() < 2 || f_.size() != x_.size() || g_.size() != x_.size())
    throw std::invalid_argument("spline needs >= 2 knots with matching values and second derivatives");
}

double CubicSpline::operator()(double x) const {
  if (x <= x_.front()) return f_.front();
  if (x >= x_.back()) return f_.back();
  const std::size_t i =
      static_cast<std::size_t>(std::upper_bound(x_.begin(), x_.end(), x) - x_.begin()) - 1;
  const double h = x_[i + 1] - x_[i];
  const double a = x - x_[i], b = x_[i + 1] - x;
  return (a * f_[i + 1] + b * f_[i]) / h - a * b / 6.0 * ((1.0 + a / h) * g_[i + 1] + (1.0 + b / h) * g_[i]);
}

double CubicSpline::roughness() const {
  double r = 0.0;
  for (std::size_t i = 0; i + 1 < x_.size(); ++i) {
    const double h = x_[i + 1] - x_[i];
    r += h / 3.0 * (g_[i] * g_[i] + g_[i] * g_[i + 1] + g_[i + 1] * g_[i + 1]);
  }
  return r;
}

CubicSpline fit_smoothing_spline(std::span<const double> x, std::span<const double> y, std::span<const double> w,
                                 double lambda) {
  const std::size_t n = x.size();
  if (y.size() != n || w.size() != n) throw std::invalid_argument("spline data sizes differ");
  if (n < 3) throw std::invalid_argument("smoothing spline needs at least 3 points");
  if (!(lambda > 0.0 && lambda <= 1.0)) throw std::invalid_argument("smoothing lambda must lie in (0, 1]");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return x[a] < x[b]; });
  std::vector<double> xs(n), ys(n), ws(n);
  for (std::size_t i = 0; i < n; ++i) {
    xs[i] = x[order[i]];
    ys[i] = y[order[i]];
    ws[i] = w[order[i]];
    if (!(ws[i] > 0.0)) throw std::invalid_argument("spline weights must be > 0");
  }
  for (std::size_t i = 0; i + 1 < n; ++i)
    if (!(xs[i + 1] > xs[i])) throw std::runtime_error("singular normal equations: repeated spline abscissa");

  const double p = (1.0 - lambda) / lambda;
  const Eigen::Index m = static_cast<Eigen::Index>(n) - 2;
  Eigen::MatrixXd Q = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), m);
  Eigen::MatrixXd R = Eigen::MatrixXd::Zero(m, m);
  for (Eigen::Index j = 0; j < m; ++j) {
    const auto k = static_cast<std::size_t>(j) + 1;
    const double h0 = xs[k] - xs[k - 1], h1 = xs[k + 1] - xs[k];
    Q(j, j) = 1.0 / h0;
    Q(j + 1, j) = -1.0 / h0 - 1.0 / h1;
    Q(j + 2, j) = 1.0 / h1;
    R(j, j) = (h0 + h1) / 3.0;
    if (j + 1 < m) R(j, j + 1) = R(j + 1, j) = h1 / 6.0;
  }
  const Eigen::Map<const Eigen::VectorXd> Y(ys.data(), static_cast<Eigen::Index>(n));
  const Eigen::VectorXd winv = Eigen::Map<const Eigen::VectorXd>(ws.data(), static_cast<Eigen::Index>(n)).cwiseInverse();
  const Eigen::MatrixXd A = R + p * Q.transpose() * winv.asDiagonal() * Q;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(A);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) throw std::runtime_error("singular normal equations");
  const Eigen::VectorXd gamma = ldlt.solve(Q.transpose() * Y);
  const Eigen::VectorXd f = Y - p * winv.asDiagonal() * (Q * gamma);

  std::vector<double> fv(f.data(), f.data() + n), gv(n, 0.0);
  for (Eigen::Index j = 0; j < m; ++j) gv[static_cast<std::size_t>(j) + 1] = gamma(j);
  return CubicSpline(std::move(xs), std::move(fv), std::move(gv));
}

CubicSpline fit_smile(const OptionChain& chain, double lambda) {
  std::vector<double> x, y, w;
  for (const auto& q : chain.quotes) {
    if (!q.kept()) continue;
    x.push_back(q.delta);
    y.push_back(q.implied_vol);
    w.push_back(q.volume_weight);
  }
  return fit_smoothing_spline(x, y, w, lambda);
}

}  // namespace liqport::calibration
