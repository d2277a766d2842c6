#include "liqport/experiments/runs.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <thread>

#include "liqport/calibration/calibrate.hpp"
#include "liqport/calibration/synthetic.hpp"
#include "liqport/hjb/collocation.hpp"
#include "liqport/hjb/report_io.hpp"
#include "liqport/numerics/random.hpp"
#include "liqport/oracles/merton.hpp"

namespace liqport::experiments {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Runs f(0..n-1) on up to `jobs` threads; an exception thrown by f(i) is
// stored in errors[i].
template <class F>
std::vector<std::string> parallel_for(std::size_t n, std::size_t jobs, F f) {
  std::vector<std::string> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next++) < n;) {
      try {
        f(i);
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
  };
  std::vector<std::thread> pool;
  const std::size_t extra = std::min(jobs, n) > 0 ? std::min(jobs, n) - 1 : 0;
  for (std::size_t k = 0; k < extra; ++k) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  return errors;
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

hjb::State state_of(const Slice& s) { return {s.W, s.v, s.theta, s.L, s.t}; }

std::string slice_text(const hjb::NetworkParams& n, const hjb::State& base, hjb::SliceAxis axis,
                       const std::vector<double>& grid) {
  std::ostringstream o;
  hjb::write_slice_csv(n, base, axis, grid, o);
  return o.str();
}

std::vector<double> wealth_grid(const hjb::Domain& d) {
  return hjb::grid_nodes(d.W[0], d.W[1], static_cast<std::size_t>(std::lround((d.W[1] - d.W[0]) / 0.25)) + 1);
}
std::vector<double> time_grid(const hjb::Domain& d) { return hjb::grid_nodes(0.0, d.T, 21); }

std::string iterations_text(const hjb::SolveReport& r) {
  std::ostringstream o;
  hjb::write_iterations_csv(r, o);
  return o.str();
}

std::string comment_block(const std::vector<std::string>& comments) {
  std::string out;
  for (const std::string& c : comments) out += "# " + c + "\n";
  return out;
}

const std::vector<std::pair<utility::UtilitySpec, std::string>>& families() {
  static const std::vector<std::pair<utility::UtilitySpec, std::string>> f{
      {utility::Linear{}, "risk neutral"},
      {utility::Power{}, "power"},
      {utility::Exponential{}, "exponential"},
      {utility::Hara{}, "HARA"},
      {utility::LogPlusPower{}, "log plus power"},
      {utility::LinearPlusExponential{}, "linear plus exponential"},
      {utility::SShaped{}, "S-shaped"},
  };
  return f;
}

}  // namespace

std::uint64_t solve_hash(const ExperimentConfig& cfg) {
  const json j = to_json(cfg);
  const json key{{"params", j.at("params")}, {"utility", j.at("utility")}, {"domain", j.at("domain")},
                 {"solver", j.at("solver")}, {"seed", cfg.seed}};
  return fnv1a(key.dump());
}

hjb::SolveReport solve_model(const ExperimentConfig& cfg, const hjb::ValueFunction& reference) {
  fs::path cached;
  if (!cfg.cache_dir.empty()) {
    cached = cfg.cache_dir / ("solve-" + hex(solve_hash(cfg)) + ".json");
    if (fs::exists(cached)) return hjb::load_report(cached);
  }
  hjb::SolverConfig sc = solver_config(cfg.solver, cfg.seed);
  sc.reference = reference;
  hjb::SolveReport r = hjb::policy_iteration(cfg.params, cfg.utility, cfg.domain, sc);
  if (!cached.empty()) {
    fs::create_directories(cached.parent_path());
    hjb::save_report(r, cached);
  }
  return r;
}

MertonComparison validate_merton(const ExperimentConfig& cfg) {
  const MertonCase& m = cfg.merton;
  const oracles::MertonSpec spec{m.gamma, m.r, m.mu, m.sigma, m.T};
  spec.validate();
  ExperimentConfig c = cfg;
  c.params = market::ModelParams::merton(m.r, m.mu, m.T);
  c.domain = hjb::Domain::merton(m.sigma * m.sigma, m.T);
  c.domain.W = cfg.domain.W;
  c.utility = utility::Power{m.gamma};

  MertonComparison out;
  out.omega_star = oracles::merton_omega(spec);
  out.report = solve_model(c, [spec](const market::MarketState& s) {
    return oracles::merton_closed_form(spec, s.W, s.t).value;
  });
  const hjb::NetworkParams& n = out.report.networks;

  struct Row {
    double t, W;
    bool monitor;
  };
  std::vector<Row> rows;
  const double v = m.sigma * m.sigma;
  for (double t : {0.0, 0.5 * m.T})
    for (double W : wealth_grid(c.domain)) rows.push_back({t, W, false});
  const hjb::MonitoringGrid g = hjb::monitoring_grid(c.domain, 5);
  for (Eigen::Index j = 0; j < g.points.cols(); ++j) {
    const double t = g.points(hjb::kInT, j);
    const bool at_slice = t == 0.0 || std::abs(t - 0.5 * m.T) < 1e-12 * m.T;
    if (at_slice && g.interior[static_cast<std::size_t>(j)]) rows.push_back({t, g.points(hjb::kInW, j), true});
  }
  std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
    return a.t != b.t ? a.t < b.t : a.W < b.W;
  });

  out.table.columns = {"t", "W", "monitor", "value", "value_exact", "rel_value_error", "omega", "omega_exact",
                       "omega_error"};
  for (const Row& r : rows) {
    const hjb::State x{r.W, v, v, 0.0, r.t};
    const double q = hjb::value_net(n, x), w = hjb::policy_net(n, x);
    const oracles::MertonSolution exact = oracles::merton_closed_form(spec, r.W, r.t);
    const double rel = std::abs(q - exact.value) / std::abs(exact.value), dw = std::abs(w - exact.omega);
    if (r.monitor) {
      out.max_policy_error = std::max(out.max_policy_error, dw);
      out.max_value_error = std::max(out.max_value_error, rel);
    }
    out.table.rows.push_back({format_number(r.t), format_number(r.W), r.monitor ? "1" : "0", format_number(q),
                              format_number(exact.value), format_number(rel), format_number(w),
                              format_number(exact.omega), format_number(dw)});
  }
  out.pass = !out.report.diverged && out.max_policy_error <= m.policy_tolerance &&
             out.max_value_error <= m.value_tolerance;
  return out;
}

SweepResult sweep(const ExperimentConfig& cfg) {
  SweepResult out;
  const std::string& var = cfg.sweep.variable;
  const bool v0 = var == "v0";
  out.variable = var;
  out.values = cfg.sweep.values;
  const double baseline = v0 ? cfg.slice.v : market::get_param(cfg.params, var);
  if (std::find(out.values.begin(), out.values.end(), baseline) == out.values.end()) {
    out.values.push_back(baseline);
    out.notes.push_back("baseline " + var + " = " + format_number(baseline) + " added to the sweep");
  }
  std::sort(out.values.begin(), out.values.end());
  out.values.erase(std::unique(out.values.begin(), out.values.end()), out.values.end());

  std::vector<ExperimentConfig> solves;
  if (v0) {
    solves.push_back(cfg);
  } else {
    for (double value : out.values) {
      ExperimentConfig c = cfg;
      market::set_param(c.params, var, value);
      solves.push_back(c);
    }
  }
  std::vector<hjb::SolveReport> reports(solves.size());
  const std::vector<std::string> errors =
      parallel_for(solves.size(), cfg.jobs, [&](std::size_t i) { reports[i] = solve_model(solves[i]); });

  out.wealth.columns = {var, "W", "value", "omega"};
  out.time.columns = {var, "t", "value", "omega"};
  out.summary.columns = {var, "omega_at_slice", "value_at_slice", "iterations", "converged", "diverged"};
  for (std::size_t k = 0; k < out.values.size(); ++k) {
    const std::size_t s = v0 ? 0 : k;
    const std::string label = format_number(out.values[k]);
    if (!errors[s].empty()) {
      out.failed = true;
      out.notes.push_back(var + " = " + label + ": solve failed: " + errors[s]);
      out.reports.emplace_back();
      out.omega.push_back(kNaN);
      out.value.push_back(kNaN);
      out.summary.rows.push_back({label, "nan", "nan", "0", "0", "0"});
      continue;
    }
    const hjb::SolveReport& r = reports[s];
    out.reports.push_back(r);
    if (r.diverged) {
      out.failed = true;
      out.notes.push_back(var + " = " + label + ": " + r.message);
    }
    hjb::State base = state_of(cfg.slice);
    if (v0) base[hjb::kInV] = out.values[k];
    out.omega.push_back(hjb::policy_net(r.networks, base));
    out.value.push_back(hjb::value_net(r.networks, base));
    out.summary.rows.push_back({label, format_number(out.omega.back()), format_number(out.value.back()),
                                std::to_string(r.iterations.size()), r.converged ? "1" : "0",
                                r.diverged ? "1" : "0"});
    const Table w = parse_csv(slice_text(r.networks, base, hjb::SliceAxis::wealth, wealth_grid(cfg.domain)));
    for (auto row : w.rows) {
      row.insert(row.begin(), label);
      out.wealth.rows.push_back(row);
    }
    const Table t = parse_csv(slice_text(r.networks, base, hjb::SliceAxis::time, time_grid(cfg.domain)));
    for (auto row : t.rows) {
      row.insert(row.begin(), label);
      out.time.rows.push_back(row);
    }
  }
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  out.non_increasing = true;
  for (std::size_t k = 0; k < out.omega.size(); ++k) {
    lo = std::min(lo, out.omega[k]);
    hi = std::max(hi, out.omega[k]);
    if (k > 0 && !(out.omega[k] <= out.omega[k - 1])) out.non_increasing = false;
  }
  out.max_gap = hi - lo;
  return out;
}

void write_synthetic_chains(const ExperimentConfig& cfg, const fs::path& dir) {
  const SyntheticChains& g = cfg.calibration.synthetic_chains;
  fs::create_directories(dir);
  std::vector<std::string> expiries;
  std::vector<double> prices;
  int offset = 0;
  for (std::size_t k = 0; k < g.days.size(); ++k) {
    calibration::SyntheticChainSpec spec;
    spec.days = g.days[k];
    spec.atm_vol = g.atm_vol;
    spec.as_of = calibration::add_days("2000-01-03", offset);
    offset += static_cast<int>(g.n_expiries) * g.days[k] + 7;
    const calibration::SyntheticSeries s =
        calibration::synthetic_series(spec, g.n_expiries, g.tilt, numerics::substream_seed(cfg.seed, 100 + k));
    std::ofstream out(dir / ("chains_" + std::to_string(g.days[k]) + "d.csv"));
    calibration::write_chain_csv(s.quotes, out);
    expiries.insert(expiries.end(), s.expiries.begin(), s.expiries.end());
    prices.insert(prices.end(), s.realizations.begin(), s.realizations.end());
  }
  std::ofstream out(dir / "realizations.csv");
  calibration::write_realizations_csv(expiries, prices, out);
}

CalibrationTable calibrate_families(const ExperimentConfig& cfg, const fs::path& chains_dir) {
  CalibrationTable out;
  if (!fs::is_directory(chains_dir)) throw NoChains("no chains: " + chains_dir.string() + " is not a directory");
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(chains_dir))
    if (e.is_regular_file() && e.path().extension() == ".csv" && e.path().filename() != "realizations.csv")
      files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::vector<calibration::RawQuote> rows;
  for (const fs::path& f : files) {
    std::ifstream in(f);
    const auto r = calibration::read_chain_csv(in);
    rows.insert(rows.end(), r.begin(), r.end());
  }
  if (rows.empty()) throw NoChains("no chains found in " + chains_dir.string());
  std::ifstream rin(chains_dir / "realizations.csv");
  if (!rin) throw std::runtime_error("missing realizations.csv in " + chains_dir.string());
  const auto realizations = calibration::read_realizations_csv(rin);

  out.table.columns = {"family", "label", "horizon_weeks", "n", "parameters", "LR3", "p3", "adjusted_p3",
                       "LR1", "p1", "adjusted_p1", "clamped", "optimizer_failed"};
  for (int h : cfg.calibration.horizons) {
    calibration::PipelineOptions opt;
    opt.horizon_weeks = h;
    opt.density.delta_low = cfg.calibration.tail_delta;
    opt.density.delta_high = 1.0 - cfg.calibration.tail_delta;
    calibration::PipelineReport rep;
    const auto samples = calibration::build_samples(rows, realizations, opt, &rep);
    if (samples.size() < cfg.calibration.min_chains) {
      out.notes.push_back("horizon " + std::to_string(h) + "w skipped: " + std::to_string(samples.size()) +
                          " usable chains, need " + std::to_string(cfg.calibration.min_chains));
      continue;
    }
    for (std::size_t f = 0; f < families().size(); ++f) {
      const auto& [start, label] = families()[f];
      std::vector<std::string> row{utility::family_name(start), label, std::to_string(h),
                                   std::to_string(samples.size())};
      try {
        calibration::CalibrationResult fit;
        if (std::holds_alternative<utility::Linear>(start)) {
          const calibration::UtilityEvaluation e = calibration::evaluate_utility(start, samples);
          fit.fitted = start;
          fit.tests = e.tests;
          fit.n_clamped = e.n_clamped;
        } else {
          fit = calibration::calibrate_utility(start, samples);
        }
        std::vector<calibration::DensityEstimate> dens;
        for (const auto& s : samples) dens.push_back(calibration::subjective_density(s.q, fit.fitted));
        const calibration::AdjustedPValues adj = calibration::mc_adjust_pvalue(
            fit.tests, dens, cfg.calibration.n_mc,
            numerics::substream_seed(cfg.seed, static_cast<std::uint64_t>(h) * 64 + f));
        std::string params;
        for (double p : utility::parameters(fit.fitted)) params += (params.empty() ? "" : ";") + format_number(p);
        for (const std::string& s :
             {params, format_number(fit.tests.LR3), format_number(fit.tests.p3), format_number(adj.p3),
              format_number(fit.tests.LR1), format_number(fit.tests.p1), format_number(adj.p1),
              std::to_string(fit.n_clamped), std::string(fit.failed ? "1" : "0")})
          row.push_back(s);
      } catch (const std::exception& e) {
        out.notes.push_back("horizon " + std::to_string(h) + "w " + label + ": " + e.what());
        row.resize(4);
        for (int k = 0; k < 7; ++k) row.push_back(k == 0 ? "" : "nan");
        row.push_back("0");
        row.push_back("1");
      }
      out.table.rows.push_back(row);
    }
  }
  return out;
}

std::string default_run_name(const ExperimentConfig& cfg) {
  if (cfg.command == Command::sweep) return "sweep-" + cfg.sweep.variable;
  return to_string(cfg.command);
}

RunResult run(const ExperimentConfig& cfg, const fs::path& dir) {
  cfg.validate();
  fs::create_directories(dir);
  RunResult r;
  const std::string hash = hex(config_hash(cfg));
  const std::vector<std::string> comments{std::string("liqport ") + to_string(cfg.command) +
                                          " config_hash=" + hash + " seed=" + std::to_string(cfg.seed)};
  const auto emit = [&](const std::string& name, const std::string& text) {
    write_text(dir / name, text);
    r.files.push_back(name);
  };
  const auto emit_csv = [&](const std::string& name, const Table& t) { emit(name, csv_text(t, comments)); };
  // Plots are rendered from the CSV as written, never from in-memory values.
  const auto emit_plot = [&](const std::string& csv, const std::string& svg, const std::string& x,
                             const std::string& y, const std::string& group, const std::string& title,
                             bool log_y) {
    LinePlot p = plot_from_table(parse_csv(read_text(dir / csv)), x, y, group, title);
    p.log_y = log_y;
    emit(svg, render_svg(p));
  };
  const auto fail = [&](int code, const std::string& status, const std::string& note) {
    r.exit_code = std::max(r.exit_code, code);
    r.status = status;
    r.notes.push_back(note);
  };
  const auto start = std::chrono::steady_clock::now();

  try {
    switch (cfg.command) {
      case Command::validate_merton: {
        const MertonComparison m = validate_merton(cfg);
        emit_csv("comparison.csv", m.table);
        emit("convergence.csv", comment_block(comments) + iterations_text(m.report));
        hjb::save_report(m.report, dir / "networks.json");
        r.files.push_back("networks.json");
        emit_plot("comparison.csv", "policy.svg", "W", "omega", "t", "Allocation against wealth", false);
        emit_plot("comparison.csv", "value.svg", "W", "value", "t", "Value against wealth", false);
        emit_plot("convergence.csv", "convergence.svg", "iteration", "reference_distance", "",
                  "Sup-norm distance to the closed form", true);
        r.checks["omega_star"] = m.omega_star;
        r.checks["max_policy_error"] = {{"value", m.max_policy_error},
                                        {"tolerance", cfg.merton.policy_tolerance},
                                        {"pass", m.max_policy_error <= cfg.merton.policy_tolerance}};
        r.checks["max_relative_value_error"] = {{"value", m.max_value_error},
                                                {"tolerance", cfg.merton.value_tolerance},
                                                {"pass", m.max_value_error <= cfg.merton.value_tolerance}};
        r.checks["iterations"] = m.report.iterations.size();
        r.checks["converged"] = m.report.converged;
        if (m.report.diverged) fail(kExitRunFailed, "error", "solver diverged: " + m.report.message);
        else if (!m.pass) fail(kExitCheckFailed, "fail", "tolerance check failed");
        break;
      }
      case Command::solve: {
        const hjb::SolveReport rep = solve_model(cfg);
        hjb::save_report(rep, dir / "networks.json");
        r.files.push_back("networks.json");
        emit("convergence.csv", comment_block(comments) + iterations_text(rep));
        const hjb::State base = state_of(cfg.slice);
        emit("wealth_slice.csv", comment_block(comments) + slice_text(rep.networks, base, hjb::SliceAxis::wealth,
                                                                      wealth_grid(cfg.domain)));
        emit("time_slice.csv", comment_block(comments) +
                                   slice_text(rep.networks, base, hjb::SliceAxis::time, time_grid(cfg.domain)));
        emit_plot("convergence.csv", "convergence.svg", "iteration", "evaluation_loss", "", "Evaluation loss",
                  true);
        emit_plot("wealth_slice.csv", "wealth_slice.svg", "W", "omega", "", "Allocation against wealth", false);
        emit_plot("time_slice.csv", "time_slice.svg", "t", "omega", "", "Allocation against time", false);
        r.checks["iterations"] = rep.iterations.size();
        r.checks["converged"] = rep.converged;
        r.checks["omega_at_slice"] = hjb::policy_net(rep.networks, base);
        r.checks["value_at_slice"] = hjb::value_net(rep.networks, base);
        if (rep.diverged) fail(kExitRunFailed, "error", "solver diverged: " + rep.message);
        break;
      }
      case Command::sweep: {
        const SweepResult s = sweep(cfg);
        const std::string& var = s.variable;
        emit_csv("summary.csv", s.summary);
        emit_csv("wealth_slice.csv", s.wealth);
        emit_csv("time_slice.csv", s.time);
        emit_plot("wealth_slice.csv", "wealth_slice.svg", "W", "omega", var, "Allocation against wealth", false);
        emit_plot("time_slice.csv", "time_slice.svg", "t", "omega", var, "Allocation against time", false);
        for (std::size_t k = 0; k < s.reports.size(); ++k) {
          if (s.reports[k].iterations.empty()) continue;
          const std::string name = "networks_" + var + "_" + format_number(s.values[k]) + ".json";
          hjb::save_report(s.reports[k], dir / name);
          r.files.push_back(name);
          if (var == "v0") break;
        }
        r.notes.insert(r.notes.end(), s.notes.begin(), s.notes.end());
        r.checks["values"] = s.values;
        r.checks["omega_at_slice"] = s.omega;
        r.checks["max_gap"] = s.max_gap;
        r.checks["non_increasing"] = s.non_increasing;
        if (s.failed) fail(kExitRunFailed, "error", "one or more solves failed; outputs are partial");
        break;
      }
      case Command::calibrate: {
        fs::path chains = cfg.calibration.chains_dir;
        if (cfg.calibration.synthetic) {
          chains = dir / "chains";
          write_synthetic_chains(cfg, chains);
          for (const auto& e : fs::directory_iterator(chains))
            r.files.push_back((fs::path("chains") / e.path().filename()).string());
          std::sort(r.files.begin(), r.files.end());
        }
        const CalibrationTable t = calibrate_families(cfg, chains);
        emit_csv("pvalues.csv", t.table);
        r.notes.insert(r.notes.end(), t.notes.begin(), t.notes.end());
        r.checks["rows"] = t.table.rows.size();
        if (t.table.rows.empty()) fail(kExitCheckFailed, "fail", "every horizon bucket was skipped");
        break;
      }
    }
  } catch (const NoChains& e) {
    fail(kExitRunFailed, "error", e.what());
  } catch (const std::exception& e) {
    fail(kExitRunFailed, "error", std::string("run failed: ") + e.what());
  }

  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const json manifest{{"command", to_string(cfg.command)},
                      {"config", to_json(cfg)},
                      {"config_hash", hash},
                      {"seed", cfg.seed},
                      {"status", r.status},
                      {"exit_code", r.exit_code},
                      {"files", r.files},
                      {"notes", r.notes},
                      {"checks", r.checks},
                      {"distance_norm", "sup-norm over the monitoring grid"},
                      {"wall_seconds", seconds}};
  write_text(dir / "manifest.json", manifest.dump(2) + "\n");
  return r;
}

}  // namespace liqport::experiments
