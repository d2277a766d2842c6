#include "liqport/market/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <mutex>
#include <ostream>
#include <random>
#include <stdexcept>
#include <thread>

#include "liqport/market/dynamics.hpp"
#include "liqport/numerics/random.hpp"

namespace liqport::market {

namespace {

struct Prepared {
  CorrelationSpec corr;
  double t0 = 0.0;
  double dt = 0.0;
};

Prepared prepare(const ModelParams& p, const MarketState& initial, const SimulationConfig& cfg) {
  p.validate();
  if (cfg.n_steps == 0) throw std::invalid_argument("simulation needs n_steps >= 1");
  if (cfg.block_size == 0) throw std::invalid_argument("simulation needs block_size >= 1");
  if (!(initial.t >= 0.0 && initial.t < p.T)) throw std::invalid_argument("initial time must lie in [0, T)");
  if (!(initial.W >= 0.0 && initial.v >= 0.0 && initial.theta >= 0.0))
    throw std::invalid_argument("initial W, v and theta must be >= 0");
  Prepared out;
  out.corr = build_correlation(p, cfg.allow_projection);
  out.t0 = initial.t;
  out.dt = (p.T - initial.t) / static_cast<double>(cfg.n_steps);
  if (out.dt > p.delta_t * (1.0 + 1e-9))
    throw std::invalid_argument("simulation step exceeds the rebalancing interval delta_t; increase n_steps");
  return out;
}

/// Advances paths [first, first + count) and calls record(local_index, step,
/// state) for every reported state when record is set.
template <class Record>
void run_block(const ModelParams& p, const Prepared& prep, const BatchPolicy& policy, const MarketState& initial,
               std::uint64_t seed, std::size_t n_steps, std::size_t first, std::size_t count, Record&& record) {
  std::vector<std::mt19937_64> engines;
  engines.reserve(count);
  for (std::size_t i = 0; i < count; ++i) engines.emplace_back(path_seed(seed, first + i));
  std::vector<std::normal_distribution<double>> normals(count);

  std::vector<MarketState> raw(count, initial), reported(count);
  std::vector<double> omega(count);
  const double sdt = std::sqrt(prep.dt);
  const Matrix5& F = prep.corr.factor;
  Eigen::Matrix<double, 5, 1> z, dB;

  auto report = [&](std::size_t step, double t) {
    for (std::size_t i = 0; i < count; ++i) {
      const MarketState& s = raw[i];
      reported[i] = {s.W, std::max(s.v, 0.0), std::max(s.theta, 0.0), std::max(s.L, 0.0), t};
      record(i, step, reported[i]);
    }
  };

  report(0, prep.t0);
  for (std::size_t k = 0; k < n_steps; ++k) {
    policy(reported, omega);
    for (std::size_t i = 0; i < count; ++i) {
      const double w = omega[i];
      if (!(w >= 0.0 && w <= 1.0)) throw std::domain_error("policy returned omega outside [0, 1]");
      for (int j = 0; j < 5; ++j) z(j) = normals[i](engines[i]);
      dB.noalias() = sdt * (F * z);

      MarketState& s = raw[i];
      const double vp = reported[i].v, thp = reported[i].theta, Lp = reported[i].L;
      const double W = s.W;
      const double tc = tc_intensity(Lp, vp, p) * ((1.0 - w) * w) * W;
      const double dW = (p.r * W + (p.mu - p.r) * w * W - tc) * prep.dt +
                        w * W * (p.beta * Lp * dB(kLiquidityPrice) + std::sqrt(vp) * dB(kStock));
      s.W = std::max(W + dW, 0.0);
      s.v += p.kappa * (thp - vp) * prep.dt + p.sigma1 * std::sqrt(vp) * dB(kVariance);
      s.theta += p.lambda * (p.eta - thp) * prep.dt + p.sigma2 * std::sqrt(thp) * dB(kVarianceLevel);
      s.L += p.alpha * (liquidity_mean_level(Lp, p) - s.L) * prep.dt + p.sigma_L * dB(kIlliquidity);
    }
    report(k + 1, prep.t0 + static_cast<double>(k + 1) * prep.dt);
  }
}

/// Runs fn(first, count) over blocks of [0, n) on up to `jobs` threads.
template <class Fn>
void for_each_block(std::size_t n, std::size_t block, std::size_t jobs, Fn&& fn) {
  const std::size_t n_blocks = (n + block - 1) / block;
  jobs = std::max<std::size_t>(1, std::min(jobs, n_blocks));
  if (jobs == 1) {
    for (std::size_t b = 0; b < n_blocks; ++b) fn(b * block, std::min(block, n - b * block));
    return;
  }
  std::mutex m;
  std::exception_ptr error;
  std::vector<std::thread> workers;
  for (std::size_t j = 0; j < jobs; ++j) {
    workers.emplace_back([&, j] {
      try {
        for (std::size_t b = j; b < n_blocks; b += jobs) fn(b * block, std::min(block, n - b * block));
      } catch (...) {
        std::lock_guard<std::mutex> lock(m);
        if (!error) error = std::current_exception();
      }
    });
  }
  for (auto& w : workers) w.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace

std::uint64_t path_seed(std::uint64_t seed, std::uint64_t path_id) { return numerics::substream_seed(seed, path_id); }

BatchPolicy constant_policy(double omega) {
  if (!(omega >= 0.0 && omega <= 1.0)) throw std::domain_error("constant policy omega must lie in [0, 1]");
  return [omega](std::span<const MarketState>, std::span<double> out) { std::fill(out.begin(), out.end(), omega); };
}

BatchPolicy pointwise_policy(std::function<double(const MarketState&)> f) {
  return [f = std::move(f)](std::span<const MarketState> states, std::span<double> out) {
    for (std::size_t i = 0; i < states.size(); ++i) out[i] = f(states[i]);
  };
}

PathEnsemble simulate_paths(const ModelParams& p, const BatchPolicy& policy, const MarketState& initial,
                            const SimulationConfig& cfg) {
  const Prepared prep = prepare(p, initial, cfg);
  PathEnsemble e;
  e.n_paths = cfg.n_paths;
  e.n_steps = cfg.n_steps;
  e.projected_correlation = prep.corr.projected;
  e.states.resize(cfg.n_paths * (cfg.n_steps + 1));
  for_each_block(cfg.n_paths, cfg.block_size, cfg.jobs, [&](std::size_t first, std::size_t count) {
    run_block(p, prep, policy, initial, cfg.seed, cfg.n_steps, first, count,
              [&](std::size_t i, std::size_t step, const MarketState& s) {
                e.states[(first + i) * (cfg.n_steps + 1) + step] = s;
              });
  });
  return e;
}

std::vector<MarketState> simulate_terminal(const ModelParams& p, const BatchPolicy& policy,
                                           const MarketState& initial, const SimulationConfig& cfg,
                                           std::size_t first_path, std::size_t count) {
  const Prepared prep = prepare(p, initial, cfg);
  std::vector<MarketState> out(count);
  for_each_block(count, cfg.block_size, cfg.jobs, [&](std::size_t first, std::size_t n) {
    run_block(p, prep, policy, initial, cfg.seed, cfg.n_steps, first_path + first, n,
              [&](std::size_t i, std::size_t step, const MarketState& s) {
                if (step == cfg.n_steps) out[first + i] = s;
              });
  });
  return out;
}

void write_paths_csv(const PathEnsemble& e, std::ostream& out) {
  out << "path,step,W,v,theta,L\n";
  const auto old = out.precision(17);
  for (std::size_t i = 0; i < e.n_paths; ++i)
    for (std::size_t k = 0; k <= e.n_steps; ++k) {
      const MarketState& s = e.at(i, k);
      out << i << ',' << k << ',' << s.W << ',' << s.v << ',' << s.theta << ',' << s.L << '\n';
    }
  out.precision(old);
}

}  // namespace liqport::market
