#include "liqport/oracles/fd_solver.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <iomanip>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string>

#include "liqport/market/dynamics.hpp"

namespace liqport::oracles {

namespace {

struct NodeCoefficients {
  // drift(w) = b0 + b1 w + b2 w^2, half diffusion a(w) likewise.
  double b0, b1, b2, a0, a1, a2;

  double drift(double w) const { return b0 + w * (b1 + w * b2); }
  double diffusion(double w) const { return a0 + w * (a1 + w * a2); }
};

NodeCoefficients node_coefficients(const market::ModelParams& p, const market::MarketState& s) {
  const market::OmegaExpansion e = market::hjb_coefficient_expansion(s, p);
  return {e.constant.drift_W, e.linear.drift_W, e.quadratic.drift_W,
          e.constant.diff_WW, e.linear.diff_WW, e.quadratic.diff_WW};
}

double second_difference(double hm, double hp, double qm, double q, double qp) {
  return 2.0 * ((qp - q) / hp - (q - qm) / hm) / (hm + hp);
}

double generator(const NodeCoefficients& c, double w, double hm, double hp, double qm, double q, double qp) {
  const double b = c.drift(w);
  const double d1 = b >= 0.0 ? (qp - q) / hp : (q - qm) / hm;
  return b * d1 + c.diffusion(w) * second_difference(hm, hp, qm, q, qp);
}

double argmax(const NodeCoefficients& c, double hm, double hp, double qm, double q, double qp) {
  std::vector<double> cand{0.0, 1.0};
  // Roots of the drift, where the upwind direction switches.
  if (c.b2 != 0.0) {
    const double disc = c.b1 * c.b1 - 4.0 * c.b2 * c.b0;
    if (disc >= 0.0) {
      const double s = std::sqrt(disc);
      cand.push_back((-c.b1 + s) / (2.0 * c.b2));
      cand.push_back((-c.b1 - s) / (2.0 * c.b2));
    }
  } else if (c.b1 != 0.0) {
    cand.push_back(-c.b0 / c.b1);
  }
  // Vertex of each one-sided quadratic.
  const double d2 = second_difference(hm, hp, qm, q, qp);
  for (double d1 : {(qp - q) / hp, (q - qm) / hm}) {
    const double A = c.b2 * d1 + c.a2 * d2, B = c.b1 * d1 + c.a1 * d2;
    if (A < 0.0) cand.push_back(-B / (2.0 * A));
  }
  // Candidates must beat the incumbent by more than rounding noise, so exact
  // ties resolve to the smaller allocation.
  double best = 0.0, best_value = generator(c, 0.0, hm, hp, qm, q, qp);
  const double h = std::min(hm, hp), qmag = std::abs(qm) + std::abs(q) + std::abs(qp);
  const double scale = (std::abs(c.a0) + std::abs(c.a1) + std::abs(c.a2)) * qmag / (h * h) +
                       (std::abs(c.b0) + std::abs(c.b1) + std::abs(c.b2)) * qmag / h;
  const double noise = 64.0 * std::numeric_limits<double>::epsilon() * scale;
  for (double w : cand) {
    if (!(w > 0.0 && w <= 1.0)) continue;
    const double g = generator(c, w, hm, hp, qm, q, qp);
    if (g > best_value + noise) {
      best = w;
      best_value = g;
    }
  }
  return best;
}

// Thomas algorithm; a sub-, b main, c super-diagonal. Overwrites d.
void solve_tridiagonal(const std::vector<double>& a, std::vector<double> b, const std::vector<double>& c,
                       std::vector<double>& d) {
  const std::size_t n = d.size();
  for (std::size_t i = 1; i < n; ++i) {
    const double m = a[i] / b[i - 1];
    b[i] -= m * c[i - 1];
    d[i] -= m * d[i - 1];
  }
  d[n - 1] /= b[n - 1];
  for (std::size_t i = n - 1; i-- > 0;) d[i] = (d[i] - c[i] * d[i + 1]) / b[i];
}

double interpolate(const std::vector<double>& x, const std::vector<double>& y, double at) {
  if (at <= x.front()) return y.front();
  if (at >= x.back()) return y.back();
  const auto it = std::upper_bound(x.begin(), x.end(), at);
  const std::size_t i = static_cast<std::size_t>(it - x.begin());
  const double f = (at - x[i - 1]) / (x[i] - x[i - 1]);
  return (1.0 - f) * y[i - 1] + f * y[i];
}

}  // namespace

void FdConfig::validate() const {
  if (!(v >= 0.0 && theta >= 0.0 && L >= 0.0)) throw std::invalid_argument("frozen v, theta, L must be >= 0");
  if (!(W_max > 0.0)) throw std::invalid_argument("W_max must be > 0");
  if (!(stretch >= 0.0)) throw std::invalid_argument("stretch must be >= 0");
  if (n_W < 5 || n_t < 2) throw std::invalid_argument("grid needs n_W >= 5 and n_t >= 2");
  if (!(policy_tolerance > 0.0) || max_policy_iterations < 1)
    throw std::invalid_argument("policy loop settings must be positive");
}

double GridSolution::value_at(std::size_t k, double Wq) const { return interpolate(W, value.at(k), Wq); }
double GridSolution::policy_at(std::size_t k, double Wq) const { return interpolate(W, policy.at(k), Wq); }

double fd_node_generator(const market::ModelParams& p, const market::MarketState& s, double omega, double h_minus,
                         double h_plus, double q_minus, double q, double q_plus) {
  return generator(node_coefficients(p, s), omega, h_minus, h_plus, q_minus, q, q_plus);
}

double fd_node_argmax(const market::ModelParams& p, const market::MarketState& s, double h_minus, double h_plus,
                      double q_minus, double q, double q_plus) {
  return argmax(node_coefficients(p, s), h_minus, h_plus, q_minus, q, q_plus);
}

std::vector<double> fd_wealth_grid(const FdConfig& cfg) {
  cfg.validate();
  const std::size_t N = cfg.n_W;
  std::vector<double> W(N);
  for (std::size_t i = 0; i < N; ++i) {
    const double x = static_cast<double>(i) / static_cast<double>(N - 1);
    W[i] = cfg.stretch > 0.0 ? cfg.W_max * std::sinh(cfg.stretch * x) / std::sinh(cfg.stretch) : cfg.W_max * x;
  }
  W.front() = 0.0;
  W.back() = cfg.W_max;
  return W;
}

GridSolution fd_policy_iteration(const market::ModelParams& p, const utility::UtilitySpec& u, const FdConfig& cfg) {
  cfg.validate();
  p.validate();
  const std::size_t N = cfg.n_W, M = cfg.n_t;
  const double dt = p.T / static_cast<double>(M - 1);

  GridSolution g;
  g.scheme = "implicit Euler in time, drift-sign upwind in W on a sinh-stretched grid, zero curvature at W_max, "
             "absorbing W = 0";
  g.steps = M - 1;
  g.W = fd_wealth_grid(cfg);
  std::vector<double> h(N, 0.0);  // h[i] = W[i] - W[i-1]
  for (std::size_t i = 1; i < N; ++i) h[i] = g.W[i] - g.W[i - 1];
  g.t.resize(M);
  for (std::size_t k = 0; k < M; ++k) g.t[k] = dt * static_cast<double>(k);
  g.t.back() = p.T;
  g.value.assign(M, std::vector<double>(N));
  g.policy.assign(M, std::vector<double>(N, 0.0));

  std::vector<NodeCoefficients> coef(N);
  for (std::size_t i = 0; i < N; ++i) coef[i] = node_coefficients(p, {g.W[i], cfg.v, cfg.theta, cfg.L, 0.0});
  for (std::size_t i = 0; i < N; ++i) g.value[M - 1][i] = utility::evaluate(u, g.W[i]);

  std::vector<double> omega(N, 0.0), lo(N), di(N), up(N), rhs(N), q(N);
  for (std::size_t k = M - 1; k-- > 0;) {
    const std::vector<double>& next = g.value[k + 1];
    q = next;
    int sweep = 0;
    for (; sweep < cfg.max_policy_iterations; ++sweep) {
      // Policy from the current iterate.
      double change = 0.0;
      for (std::size_t i = 1; i + 1 < N; ++i) {
        const double w = argmax(coef[i], h[i], h[i + 1], q[i - 1], q[i], q[i + 1]);
        change = std::max(change, std::abs(w - omega[i]));
        omega[i] = w;
      }
      omega[N - 1] = omega[N - 2];
      if (sweep > 0 && change < cfg.policy_tolerance) break;
      // Implicit system for that policy on nodes 0..N-2; the top node follows
      // from linear extrapolation of the last two interior nodes, substituted into
      // the last interior row.
      lo[0] = up[0] = 0.0;
      di[0] = 1.0;
      rhs[0] = next[0];
      for (std::size_t i = 1; i + 1 < N; ++i) {
        const double b = coef[i].drift(omega[i]), a = coef[i].diffusion(omega[i]);
        const double hm = h[i], hp = h[i + 1];
        const double l = 2.0 * a / (hm * (hm + hp)) + std::max(-b, 0.0) / hm;
        const double r = 2.0 * a / (hp * (hm + hp)) + std::max(b, 0.0) / hp;
        if (a < -1e-14)
          throw std::domain_error("finite-difference scheme is not monotone at W = " + std::to_string(g.W[i]));
        lo[i] = -l;
        up[i] = -r;
        di[i] = 1.0 / dt + l + r;
        rhs[i] = next[i] / dt;
      }
      const std::size_t j = N - 2;
      const double rho = h[N - 1] / h[N - 2];
      lo[j] -= rho * up[j];
      di[j] += (1.0 + rho) * up[j];
      up[j] = 0.0;
      std::vector<double> sol(rhs.begin(), rhs.begin() + static_cast<std::ptrdiff_t>(N - 1));
      solve_tridiagonal(std::vector<double>(lo.begin(), lo.begin() + static_cast<std::ptrdiff_t>(N - 1)),
                        std::vector<double>(di.begin(), di.begin() + static_cast<std::ptrdiff_t>(N - 1)),
                        std::vector<double>(up.begin(), up.begin() + static_cast<std::ptrdiff_t>(N - 1)), sol);
      std::copy(sol.begin(), sol.end(), q.begin());
      q[N - 1] = q[N - 2] + rho * (q[N - 2] - q[N - 3]);
    }
    if (sweep >= cfg.max_policy_iterations) ++g.unconverged_steps;
    g.max_policy_sweeps = std::max(g.max_policy_sweeps, sweep);
    g.value[k] = q;
    g.policy[k] = omega;
  }
  g.policy[M - 1] = g.policy[M - 2];
  return g;
}

double observed_order(double coarse, double mid, double fine) {
  const double num = std::abs(coarse - mid), den = std::abs(mid - fine);
  if (den == 0.0) return std::numeric_limits<double>::infinity();
  return std::log2(num / den);
}

void write_grid_csv(const GridSolution& g, std::ostream& out) {
  out << "W,t,value,policy\n" << std::setprecision(17);
  for (std::size_t k = 0; k < g.t.size(); ++k)
    for (std::size_t i = 0; i < g.W.size(); ++i)
      out << g.W[i] << ',' << g.t[k] << ',' << g.value[k][i] << ',' << g.policy[k][i] << '\n';
}

}  // namespace liqport::oracles
