#include "liqport/numerics/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <stdexcept>

#include <Eigen/Dense>

namespace liqport::numerics {

void OptimizerConfig::validate() const {
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning rate must be > 0");
  if (memory < 1) throw std::invalid_argument("L-BFGS memory must be >= 1");
  if (max_iter < 0) throw std::invalid_argument("max_iter must be >= 0");
  if (!(gradient_tolerance > 0.0)) throw std::invalid_argument("gradient tolerance must be > 0");
  if (!(armijo_c1 > 0.0 && armijo_c1 < 1.0)) throw std::invalid_argument("c1 must be in (0,1)");
  if (!(wolfe_c2 > armijo_c1 && wolfe_c2 < 1.0)) throw std::invalid_argument("c2 must be in (c1,1)");
  if (!(shrink > 0.0 && shrink < 1.0)) throw std::invalid_argument("shrink must be in (0,1)");
  if (max_line_search_steps < 1) throw std::invalid_argument("line search needs >= 1 step");
}

namespace {

struct Point {
  Eigen::VectorXd x;
  Eigen::VectorXd g;
  double f = 0.0;
};

struct SearchOutcome {
  bool ok = false;
  Point p;
};

class Evaluator {
 public:
  Evaluator(const Objective& f, Eigen::Index n) : f_(f), n_(n) {}
  Point at(Eigen::VectorXd x) {
    Point p;
    p.g.resize(n_);
    p.f = f_(x, p.g);
    p.x = std::move(x);
    ++count;
    return p;
  }
  int count = 0;

 private:
  const Objective& f_;
  Eigen::Index n_;
};

bool finite(const Point& p) { return std::isfinite(p.f) && p.g.allFinite(); }

SearchOutcome armijo(Evaluator& eval, const Point& cur, const Eigen::VectorXd& d,
                     double t, const OptimizerConfig& cfg) {
  const double slope = cur.g.dot(d);
  for (int k = 0; k < cfg.max_line_search_steps; ++k, t *= cfg.shrink) {
    Point trial = eval.at(cur.x + t * d);
    if (finite(trial) && trial.f <= cur.f + cfg.armijo_c1 * t * slope)
      return {true, std::move(trial)};
  }
  return {};
}

// Strong Wolfe search with bisection-safeguarded cubic zoom.
SearchOutcome wolfe(Evaluator& eval, const Point& cur, const Eigen::VectorXd& d,
                    double t, const OptimizerConfig& cfg) {
  const double f0 = cur.f;
  const double d0 = cur.g.dot(d);
  double t_prev = 0.0, f_prev = f0, d_prev = d0;
  Point prev = cur;
  auto zoom = [&](double lo, double f_lo, double dlo, Point p_lo, double hi, double f_hi,
                  double dhi, int budget) -> SearchOutcome {
    for (int k = 0; k < budget; ++k) {
      double tj;
      const double d1 = dlo + dhi - 3.0 * (f_lo - f_hi) / (lo - hi);
      const double disc = d1 * d1 - dlo * dhi;
      if (disc >= 0.0 && std::isfinite(disc)) {
        const double d2 = std::copysign(std::sqrt(disc), hi - lo);
        tj = hi - (hi - lo) * (dhi + d2 - d1) / (dhi - dlo + 2.0 * d2);
      } else {
        tj = 0.5 * (lo + hi);
      }
      const double a = std::min(lo, hi), b = std::max(lo, hi);
      if (!(tj > a + 0.1 * (b - a) && tj < b - 0.1 * (b - a))) tj = 0.5 * (lo + hi);
      Point trial = eval.at(cur.x + tj * d);
      if (!finite(trial) || trial.f > f0 + cfg.armijo_c1 * tj * d0 || trial.f >= f_lo) {
        hi = tj;
        f_hi = finite(trial) ? trial.f : std::numeric_limits<double>::max();
        dhi = finite(trial) ? trial.g.dot(d) : 0.0;
      } else {
        const double dj = trial.g.dot(d);
        if (std::abs(dj) <= -cfg.wolfe_c2 * d0) return {true, std::move(trial)};
        if (dj * (hi - lo) >= 0.0) {
          hi = lo;
          f_hi = f_lo;
          dhi = dlo;
        }
        lo = tj;
        f_lo = trial.f;
        dlo = dj;
        p_lo = std::move(trial);
      }
      if (std::abs(hi - lo) < 1e-16) break;
    }
    // Fall back to the best sufficient-decrease point found, if any.
    if (lo > 0.0) return {true, std::move(p_lo)};
    return {};
  };

  for (int k = 0; k < cfg.max_line_search_steps; ++k) {
    Point trial = eval.at(cur.x + t * d);
    if (!finite(trial)) {
      return zoom(t_prev, f_prev, d_prev, prev, t, std::numeric_limits<double>::max(), 0.0,
                  cfg.max_line_search_steps - k);
    }
    const double dt = trial.g.dot(d);
    if (trial.f > f0 + cfg.armijo_c1 * t * d0 || (k > 0 && trial.f >= f_prev))
      return zoom(t_prev, f_prev, d_prev, prev, t, trial.f, dt, cfg.max_line_search_steps - k);
    if (std::abs(dt) <= -cfg.wolfe_c2 * d0) return {true, std::move(trial)};
    if (dt >= 0.0)
      return zoom(t, trial.f, dt, trial, t_prev, f_prev, d_prev, cfg.max_line_search_steps - k);
    t_prev = t;
    f_prev = trial.f;
    d_prev = dt;
    prev = std::move(trial);
    t *= 2.0;
  }
  if (t_prev > 0.0) return {true, std::move(prev)};
  return {};
}

}  // namespace

MinimizeResult minimize(const Objective& f, Eigen::VectorXd x0, const OptimizerConfig& cfg) {
  cfg.validate();
  const Eigen::Index n = x0.size();
  Evaluator eval(f, n);
  MinimizeResult res;

  Point cur = eval.at(std::move(x0));
  if (!finite(cur)) throw std::domain_error("objective is not finite at the starting point");
  res.trace.push_back(cur.f);

  std::deque<std::pair<Eigen::VectorXd, Eigen::VectorXd>> pairs;  // (s, y)
  Eigen::MatrixXd inv_hessian;
  bool hessian_scaled = false;
  if (cfg.method == Method::bfgs) inv_hessian = Eigen::MatrixXd::Identity(n, n);

  int it = 0;
  for (; it < cfg.max_iter; ++it) {
    const double gnorm = cur.g.norm();
    if (gnorm <= cfg.gradient_tolerance) {
      res.converged = true;
      break;
    }

    Eigen::VectorXd d;
    if (cfg.method == Method::lbfgs) {
      d = -cur.g;
      std::vector<double> alpha(pairs.size());
      for (std::size_t i = pairs.size(); i-- > 0;) {
        const auto& [s, y] = pairs[i];
        alpha[i] = s.dot(d) / y.dot(s);
        d -= alpha[i] * y;
      }
      if (!pairs.empty()) {
        const auto& [s, y] = pairs.back();
        d *= s.dot(y) / y.squaredNorm();
      }
      for (std::size_t i = 0; i < pairs.size(); ++i) {
        const auto& [s, y] = pairs[i];
        const double beta = y.dot(d) / y.dot(s);
        d += (alpha[i] - beta) * s;
      }
    } else {
      d = -inv_hessian * cur.g;
    }
    if (!(cur.g.dot(d) < 0.0)) {
      // Lost descent; restart from steepest descent.
      pairs.clear();
      if (cfg.method == Method::bfgs) inv_hessian.setIdentity();
      d = -cur.g;
    }

    // The very first step has no curvature information to scale it.
    double t = cfg.learning_rate;
    if (cfg.method == Method::lbfgs ? pairs.empty() : !hessian_scaled)
      t *= std::min(1.0, 1.0 / cur.g.lpNorm<1>());

    SearchOutcome step = cfg.line_search == LineSearch::strong_wolfe
                             ? wolfe(eval, cur, d, t, cfg)
                             : armijo(eval, cur, d, t, cfg);
    if (!step.ok) {
      res.line_search_failed = true;
      res.message = "line search failed";
      break;
    }

    Eigen::VectorXd s = step.p.x - cur.x;
    Eigen::VectorXd y = step.p.g - cur.g;
    const double sy = s.dot(y);
    if (sy > 1e-10 * s.norm() * y.norm()) {
      if (cfg.method == Method::lbfgs) {
        pairs.emplace_back(std::move(s), std::move(y));
        if (static_cast<int>(pairs.size()) > cfg.memory) pairs.pop_front();
      } else {
        if (!hessian_scaled) {
          inv_hessian *= sy / y.squaredNorm();
          hessian_scaled = true;
        }
        const double rho = 1.0 / sy;
        const Eigen::VectorXd hy = inv_hessian * y;
        inv_hessian += (rho * rho * y.dot(hy) + rho) * s * s.transpose() -
                       rho * (hy * s.transpose() + s * hy.transpose());
      }
    }
    cur = std::move(step.p);
    res.trace.push_back(cur.f);
  }

  res.iterations = it;
  res.evaluations = eval.count;
  res.gradient_norm = cur.g.norm();
  if (!res.converged && res.gradient_norm <= cfg.gradient_tolerance) res.converged = true;
  if (res.message.empty())
    res.message = res.converged ? "gradient tolerance reached" : "iteration limit reached";
  res.f = cur.f;
  res.x = std::move(cur.x);
  return res;
}

Objective finite_difference_objective(std::function<double(const Eigen::VectorXd&)> f,
                                      double relative_step) {
  return [f = std::move(f), relative_step](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
    const double fx = f(x);
    Eigen::VectorXd xp = x;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      const double h = relative_step * std::max(1.0, std::abs(x(i)));
      xp(i) = x(i) + h;
      const double up = f(xp);
      xp(i) = x(i) - h;
      const double dn = f(xp);
      xp(i) = x(i);
      g(i) = (up - dn) / (2.0 * h);
    }
    return fx;
  };
}

}  // namespace liqport::numerics
