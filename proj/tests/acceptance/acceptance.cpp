// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 when any
// selected criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <Eigen/Core>

#include "liqport/calibration/berkowitz.hpp"
#include "liqport/calibration/chain.hpp"
#include "liqport/calibration/density.hpp"
#include "liqport/calibration/smile.hpp"
#include "liqport/calibration/synthetic.hpp"
#include "liqport/experiments/config.hpp"
#include "liqport/experiments/runs.hpp"
#include "liqport/hjb/network.hpp"
#include "liqport/market/dynamics.hpp"
#include "liqport/market/simulate.hpp"
#include "liqport/numerics/optimize.hpp"
#include "liqport/numerics/random.hpp"
#include "liqport/oracles/monte_carlo.hpp"
#include "liqport/utility/utility.hpp"
#include "test_support.hpp"

using namespace liqport;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

struct Options {
  std::uint64_t seed = 20240101;
  std::size_t jobs = 1;
  fs::path work = fs::temp_directory_path() / "liqport_acceptance";
};

// ---------------------------------------------------------------- 1 and 2

experiments::MertonComparison& merton_run(const Options& o) {
  static std::optional<experiments::MertonComparison> m;
  if (!m) {
    experiments::ExperimentConfig c;
    c.command = experiments::Command::validate_merton;
    c.seed = o.seed;
    c.solver.max_outer = 15;
    m = experiments::validate_merton(c);
  }
  return *m;
}

Outcome merton_accuracy(const Options& o) {
  const auto& m = merton_run(o);
  const bool pass = m.max_policy_error <= 0.02 && m.max_value_error <= 0.01;
  return {pass, "max |omega - 0.375| = " + fmt("%.4f", m.max_policy_error) + " (tol 0.02), max rel value error = " +
                    fmt("%.4f", m.max_value_error) + " (tol 0.01), iterations " +
                    std::to_string(m.report.iterations.size())};
}

Outcome merton_monotone(const Options& o) {
  const auto& it = merton_run(o).report.iterations;
  if (it.size() < 5) return {false, "fewer than 5 outer iterations recorded"};
  std::string trace;
  bool pass = true;
  for (std::size_t k = 0; k < 5; ++k) {
    trace += (k ? ", " : "") + fmt("%.4g", it[k].reference_distance);
    if (k > 0 && !(it[k].reference_distance < it[k - 1].reference_distance)) pass = false;
  }
  return {pass, "distance over iterations 1-5: " + trace};
}

// ---------------------------------------------------------------- 3

Outcome envelope(const Options&) {
  const utility::SShaped s;
  const utility::ConcaveEnvelope e = utility::concavify(s);
  bool pass = std::abs(e.W_tp - 5.48) <= 0.05 && std::abs(e.slope - 0.32) <= 0.01 &&
              std::abs(e.intercept + 0.81) <= 0.01;
  const int n = 10000;
  const double hi = 12.0, h = hi / (n - 1);
  double worst_dominance = 0.0, worst_concavity = 0.0;
  std::vector<double> u(n);
  for (int i = 0; i < n; ++i) {
    const double W = i * h;
    u[i] = utility::evaluate(e, W);
    worst_dominance = std::max(worst_dominance, utility::evaluate(s, W) - u[i]);
  }
  for (int i = 1; i + 1 < n; ++i) worst_concavity = std::max(worst_concavity, u[i - 1] - 2 * u[i] + u[i + 1]);
  pass = pass && worst_dominance <= 1e-12 && worst_concavity <= 1e-12;
  return {pass, "W_tp " + fmt("%.4f", e.W_tp) + ", slope " + fmt("%.4f", e.slope) + ", intercept " +
                    fmt("%.4f", e.intercept) + ", max(S - env) " + fmt("%.2e", worst_dominance) +
                    ", max second difference " + fmt("%.2e", worst_concavity)};
}

// ---------------------------------------------------------------- 4

Outcome mixed_brownian(const Options& o) {
  std::mt19937_64 rng(numerics::substream_seed(o.seed, 4));
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::normal_distribution<double> n01;
  double worst = 0.0;
  for (int set = 0; set < 5; ++set) {
    const double beta = u01(rng), L = u01(rng), v = 0.01 + 0.59 * u01(rng);
    const double rho = -0.9 + 1.8 * u01(rng), dt = 0.01 + 0.99 * u01(rng);
    const double exact = market::expected_abs_mixed_brownian(beta, L, v, rho, dt);
    const double sd = std::sqrt(dt), c = std::sqrt(1.0 - rho * rho);
    double sum = 0.0;
    const int n = 1000000;
    for (int k = 0; k < n; ++k) {
      const double zg = n01(rng), zs = rho * zg + c * n01(rng);
      sum += std::abs(beta * L * sd * zg + std::sqrt(v) * sd * zs);
    }
    worst = std::max(worst, std::abs(sum / n - exact) / exact);
  }
  return {worst <= 0.005, "worst relative gap over 5 parameter sets " + fmt("%.5f", worst) + " (tol 0.005)"};
}

// ---------------------------------------------------------------- 5

Outcome densities(const Options&) {
  using namespace calibration;
  double worst_q = 0.0, worst_p = 0.0;
  for (int days : {7, 28}) {
    SyntheticChainSpec spec;
    spec.days = days;
    const OptionChain c = ingest_chain(synthetic_chain(spec));
    const DensityEstimate q = rn_density(fit_smile(c), c);
    const LogMoments lm = risk_neutral_moments(spec);
    const double out_q = lognormal_cdf(q.lower(), lm.m, lm.s) + 1.0 - lognormal_cdf(q.upper(), lm.m, lm.s);
    worst_q = std::max(worst_q, l1_distance(q, [&](double x) { return lognormal_pdf(x, lm.m, lm.s); }, out_q));
    for (double k : {0.5, 2.0, 4.0}) {
      const DensityEstimate p = subjective_density(q, utility::Power{k});
      const double m = lm.m + k * lm.s * lm.s;
      const double out_p = lognormal_cdf(p.lower(), m, lm.s) + 1.0 - lognormal_cdf(p.upper(), m, lm.s);
      worst_p = std::max(worst_p, l1_distance(p, [&](double x) { return lognormal_pdf(x, m, lm.s); }, out_p));
    }
  }
  return {worst_q < 0.02 && worst_p < 0.01,
          "risk-neutral L1 " + fmt("%.5f", worst_q) + " (tol 0.02), power-subjective L1 " + fmt("%.5f", worst_p) +
              " (tol 0.01)"};
}

// ---------------------------------------------------------------- 6

std::vector<double> ar1_uniforms(std::size_t n, double rho, std::mt19937_64& rng) {
  std::normal_distribution<double> n01;
  std::vector<double> y(n);
  double z = n01(rng) / std::sqrt(1.0 - rho * rho);
  for (std::size_t t = 0; t < n; ++t) {
    if (t > 0) z = rho * z + n01(rng);
    y[t] = 0.5 * std::erfc(-z / std::sqrt(2.0));
  }
  return y;
}

Outcome berkowitz(const Options& o) {
  std::mt19937_64 rng(numerics::substream_seed(o.seed, 6));
  const int reps = 1000;
  int size_rejections = 0, power_rejections = 0;
  for (int k = 0; k < reps; ++k)
    if (calibration::berkowitz_tests(ar1_uniforms(200, 0.0, rng)).p3 < 0.05) ++size_rejections;
  for (int k = 0; k < reps; ++k)
    if (calibration::berkowitz_tests(ar1_uniforms(200, 0.8, rng)).p1 < 0.05) ++power_rejections;
  const double size = double(size_rejections) / reps, power = double(power_rejections) / reps;
  return {size >= 0.04 && size <= 0.08 && power > 0.99,
          "LR3 null rejection " + fmt("%.3f", size) + " (band [0.04, 0.08]), LR1 power at rho 0.8 " +
              fmt("%.3f", power) + " (need > 0.99)"};
}

// ---------------------------------------------------------------- 7

experiments::ExperimentConfig sweep_base(const Options& o) {
  experiments::ExperimentConfig c;
  c.command = experiments::Command::sweep;
  c.seed = o.seed;
  c.jobs = o.jobs;
  c.solver.hidden = 32;
  c.solver.n_interior = 2000;
  c.solver.n_terminal = 500;
  c.solver.max_outer = 15;
  c.cache_dir = o.work / "cache";
  return c;
}

Outcome sweeps(const Options& o) {
  const std::vector<std::pair<std::string, std::vector<double>>> plan{
      {"beta", {0.1, 0.5}}, {"kappa_TC", {0.0, 0.008}}, {"sigma_L", {0.1, 0.3}}, {"v0", {0.05, 0.1, 0.2}}};
  std::map<std::string, experiments::SweepResult> res;
  std::string detail;
  bool failed = false;
  for (const auto& [var, values] : plan) {
    experiments::ExperimentConfig c = sweep_base(o);
    c.sweep = {var, values};
    res[var] = experiments::sweep(c);
    failed = failed || res[var].failed;
    detail += var + " omega [";
    for (std::size_t k = 0; k < res[var].omega.size(); ++k) detail += (k ? " " : "") + fmt("%.4f", res[var].omega[k]);
    detail += "] ";
  }
  std::size_t cached = 0;
  for (const auto& e : fs::directory_iterator(o.work / "cache")) cached += e.path().extension() == ".json";
  const bool pass = !failed && cached == 7 && res["v0"].non_increasing && res["sigma_L"].non_increasing &&
                    res["kappa_TC"].max_gap < res["beta"].max_gap;
  return {pass, detail + "| solves " + std::to_string(cached) + ", kappa_TC gap " +
                    fmt("%.4f", res["kappa_TC"].max_gap) + " vs beta gap " + fmt("%.4f", res["beta"].max_gap)};
}

// ---------------------------------------------------------------- 8

Outcome mc_consistency(const Options& o) {
  experiments::ExperimentConfig c;
  c.command = experiments::Command::solve;
  c.seed = o.seed;
  c.solver.max_outer = 15;
  c.cache_dir = o.work / "cache";
  const hjb::SolveReport r = experiments::solve_model(c);
  const market::MarketState x0{5.5, 0.1, 0.2, 0.3, 0.0};
  const double q = hjb::value_net(r.networks, hjb::to_input(x0));
  market::SimulationConfig sim;
  sim.n_paths = 200000;
  sim.n_steps = 52;
  sim.seed = numerics::substream_seed(o.seed, 8);
  sim.jobs = o.jobs;
  const hjb::NetworkParams& n = r.networks;
  const market::BatchPolicy policy = market::pointwise_policy(
      [&n](const market::MarketState& s) { return hjb::policy_net(n, hjb::to_input(s)); });
  const oracles::McEstimate e = oracles::mc_policy_value(c.params, policy, x0, c.utility, sim);
  const double gap = std::abs(e.mean - q), tol = 3.0 * e.standard_error + 0.01;
  return {gap <= tol, "Q " + fmt("%.5f", q) + ", MC " + fmt("%.5f", e.mean) + " (se " +
                          fmt("%.5f", e.standard_error) + "), gap " + fmt("%.5f", gap) + " (tol " + fmt("%.5f", tol) +
                          "), outer iterations " + std::to_string(r.iterations.size())};
}

// ---------------------------------------------------------------- 9

Outcome derivatives_and_optimizer(const Options& o) {
  const testing::CompositionStats s = testing::random_composition_check(100, numerics::substream_seed(o.seed, 9));
  const numerics::Objective rosenbrock = [](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
    const double a = 1.0 - x(0), b = x(1) - x(0) * x(0);
    g(0) = -2.0 * a - 400.0 * x(0) * b;
    g(1) = 200.0 * b;
    return a * a + 100.0 * b * b;
  };
  numerics::OptimizerConfig cfg;
  cfg.max_iter = 1000;
  cfg.gradient_tolerance = 1e-10;
  const numerics::MinimizeResult m = numerics::minimize(rosenbrock, Eigen::Vector2d(-1.2, 1.0), cfg);
  const double err = (m.x - Eigen::Vector2d(1.0, 1.0)).cwiseAbs().maxCoeff();
  return {s.failures == 0 && s.total == 100 && err <= 1e-5,
          std::to_string(s.failures) + "/" + std::to_string(s.total) + " compositions off (worst rel " +
              fmt("%.2e", s.worst) + "), Rosenbrock |x - 1| " + fmt("%.2e", err) + " in " +
              std::to_string(m.iterations) + " iterations"};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria 1-9"};
  Options o;
  std::vector<int> only;
  std::string work = o.work.string();
  app.add_option("--seed", o.seed, "Master seed");
  app.add_option("--jobs", o.jobs, "Threads for sweeps and simulation")->check(CLI::PositiveNumber);
  app.add_option("--only", only, "Criteria to run (default: all)")->delimiter(',')->check(CLI::Range(1, 9));
  app.add_option("--work", work, "Scratch directory; wiped at start");
  CLI11_PARSE(app, argc, argv);
  o.work = work;
  fs::remove_all(o.work);
  fs::create_directories(o.work);

  const std::vector<std::pair<std::string, std::function<Outcome(const Options&)>>> criteria{
      {"Merton policy and value accuracy", merton_accuracy},
      {"Merton distance decreases over iterations 1-5", merton_monotone},
      {"concave envelope of the S-shaped utility", envelope},
      {"E|beta L dB_gamma + sqrt(v) dB_S| against Monte Carlo", mixed_brownian},
      {"density recovery and power tilt", densities},
      {"Berkowitz size and power", berkowitz},
      {"sensitivity sweeps", sweeps},
      {"Monte Carlo value of the learned policy", mc_consistency},
      {"hyper-dual derivatives and L-BFGS", derivatives_and_optimizer},
  };
  const std::set<int> selected(only.begin(), only.end());
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!selected.empty() && !selected.count(id)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome r;
    try {
      r = criteria[i].second(o);
    } catch (const std::exception& e) {
      r = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("CRITERION %d %s: %s | %s [%.1fs]\n", id, r.pass ? "PASS" : "FAIL", criteria[i].first.c_str(),
                r.detail.c_str(), secs);
    std::fflush(stdout);
    failures += !r.pass;
  }
  return failures ? 1 : 0;
}
