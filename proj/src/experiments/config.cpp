#include "liqport/experiments/config.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <stdexcept>

namespace liqport::experiments {

namespace {

using nlohmann::json;

const std::set<std::string> kSweepVariables{"beta", "kappa_TC", "sigma_L", "v0"};

// Copies j[key] into out when present.
template <class T>
void read(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

void reject_unknown(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  for (const auto& [k, _] : j.items())
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return k == a; }))
      throw std::invalid_argument("unknown key '" + k + "' in " + where);
}

json domain_json(const hjb::Domain& d) {
  return {{"W", d.W}, {"v", d.v}, {"theta", d.theta}, {"L", d.L}, {"T", d.T}};
}

hjb::Domain domain_from(const json& j, hjb::Domain d) {
  reject_unknown(j, {"W", "v", "theta", "L", "T"}, "domain");
  read(j, "W", d.W);
  read(j, "v", d.v);
  read(j, "theta", d.theta);
  read(j, "L", d.L);
  read(j, "T", d.T);
  return d;
}

}  // namespace

const char* to_string(Command c) {
  switch (c) {
    case Command::calibrate: return "calibrate";
    case Command::solve: return "solve";
    case Command::validate_merton: return "validate-merton";
    case Command::sweep: return "sweep";
  }
  return "?";
}

Command command_from_string(const std::string& s) {
  if (s == "calibrate") return Command::calibrate;
  if (s == "solve") return Command::solve;
  if (s == "validate-merton") return Command::validate_merton;
  if (s == "sweep") return Command::sweep;
  throw std::invalid_argument("unknown command '" + s + "'");
}

void ExperimentConfig::validate() const {
  params.validate();
  utility::validate(utility);
  domain.validate();
  if (jobs == 0) throw std::invalid_argument("jobs must be >= 1");
  if (solver.hidden < 1 || solver.n_interior == 0 || solver.n_terminal == 0 || solver.max_outer < 1 ||
      !(solver.tolerance > 0.0) || solver.evaluation_iterations < 1 || solver.improvement_iterations < 1 ||
      !(solver.step > 0.0))
    throw std::invalid_argument("solver settings out of range");
  if (command == Command::sweep) {
    if (!kSweepVariables.count(sweep.variable))
      throw std::invalid_argument("sweep variable must be beta, kappa_TC, sigma_L or v0");
    if (sweep.values.empty()) throw std::invalid_argument("sweep values must be non-empty");
  }
  if (command == Command::sweep || command == Command::solve) {
    if (domain.T != params.T) throw std::invalid_argument("domain T must equal the model horizon T");
    const hjb::State x{slice.W, slice.v, slice.theta, slice.L, slice.t};
    if (!domain.contains(x)) throw std::invalid_argument("evaluation slice lies outside the domain");
    if (command == Command::sweep && sweep.variable == "v0")
      for (double v0 : sweep.values)
        if (v0 < domain.v[0] || v0 > domain.v[1]) throw std::invalid_argument("v0 value outside the domain");
  }
  if (command == Command::validate_merton) {
    if (!(merton.gamma > 0.0) || merton.gamma == 1.0 || !(merton.sigma > 0.0) || !(merton.T > 0.0))
      throw std::invalid_argument("merton case needs gamma > 0, gamma != 1, sigma > 0, T > 0");
    if (!(merton.policy_tolerance > 0.0) || !(merton.value_tolerance > 0.0))
      throw std::invalid_argument("merton tolerances must be > 0");
  }
  if (command == Command::calibrate) {
    if (calibration.horizons.empty()) throw std::invalid_argument("calibration horizons must be non-empty");
    if (calibration.n_mc < 100) throw std::invalid_argument("calibration n_mc must be >= 100");
    if (!(calibration.tail_delta > 0.0 && calibration.tail_delta < 0.5))
      throw std::invalid_argument("calibration tail_delta must lie in (0, 0.5)");
    if (calibration.synthetic && (calibration.synthetic_chains.days.empty() ||
                                  calibration.synthetic_chains.n_expiries == 0))
      throw std::invalid_argument("synthetic chains need days and n_expiries");
  }
}

ExperimentConfig config_from_json(const json& j) {
  reject_unknown(j, {"command", "seed", "jobs", "output", "cache_dir", "params", "utility", "domain", "solver",
                     "slice", "sweep", "merton", "calibration"},
                 "config");
  ExperimentConfig c;
  if (j.contains("command")) c.command = command_from_string(j.at("command").get<std::string>());
  read(j, "seed", c.seed);
  read(j, "jobs", c.jobs);
  read(j, "output", c.output);
  if (j.contains("cache_dir")) c.cache_dir = j.at("cache_dir").get<std::string>();
  if (j.contains("params")) c.params = market::params_from_json(j.at("params"));
  if (j.contains("utility")) c.utility = utility::utility_from_json(j.at("utility"));
  if (j.contains("domain")) c.domain = domain_from(j.at("domain"), c.domain);
  if (j.contains("solver")) {
    const json& s = j.at("solver");
    reject_unknown(s, {"hidden", "n_interior", "n_terminal", "max_outer", "tolerance", "evaluation_iterations",
                       "improvement_iterations", "step"},
                   "solver");
    read(s, "hidden", c.solver.hidden);
    read(s, "n_interior", c.solver.n_interior);
    read(s, "n_terminal", c.solver.n_terminal);
    read(s, "max_outer", c.solver.max_outer);
    read(s, "tolerance", c.solver.tolerance);
    read(s, "evaluation_iterations", c.solver.evaluation_iterations);
    read(s, "improvement_iterations", c.solver.improvement_iterations);
    read(s, "step", c.solver.step);
  }
  if (j.contains("slice")) {
    const json& s = j.at("slice");
    reject_unknown(s, {"t", "W", "theta", "v", "L"}, "slice");
    read(s, "t", c.slice.t);
    read(s, "W", c.slice.W);
    read(s, "theta", c.slice.theta);
    read(s, "v", c.slice.v);
    read(s, "L", c.slice.L);
  }
  if (j.contains("sweep")) {
    const json& s = j.at("sweep");
    reject_unknown(s, {"variable", "values"}, "sweep");
    read(s, "variable", c.sweep.variable);
    read(s, "values", c.sweep.values);
  }
  if (j.contains("merton")) {
    const json& s = j.at("merton");
    reject_unknown(s, {"gamma", "r", "mu", "sigma", "T", "policy_tolerance", "value_tolerance"}, "merton");
    read(s, "gamma", c.merton.gamma);
    read(s, "r", c.merton.r);
    read(s, "mu", c.merton.mu);
    read(s, "sigma", c.merton.sigma);
    read(s, "T", c.merton.T);
    read(s, "policy_tolerance", c.merton.policy_tolerance);
    read(s, "value_tolerance", c.merton.value_tolerance);
  }
  if (j.contains("calibration")) {
    const json& s = j.at("calibration");
    reject_unknown(s, {"chains_dir", "synthetic", "synthetic_chains", "horizons", "n_mc", "min_chains", "tail_delta"},
                   "calibration");
    if (s.contains("chains_dir")) c.calibration.chains_dir = s.at("chains_dir").get<std::string>();
    read(s, "synthetic", c.calibration.synthetic);
    read(s, "horizons", c.calibration.horizons);
    read(s, "n_mc", c.calibration.n_mc);
    read(s, "min_chains", c.calibration.min_chains);
    read(s, "tail_delta", c.calibration.tail_delta);
    if (s.contains("synthetic_chains")) {
      const json& g = s.at("synthetic_chains");
      reject_unknown(g, {"n_expiries", "tilt", "days", "atm_vol"}, "synthetic_chains");
      read(g, "n_expiries", c.calibration.synthetic_chains.n_expiries);
      read(g, "tilt", c.calibration.synthetic_chains.tilt);
      read(g, "days", c.calibration.synthetic_chains.days);
      read(g, "atm_vol", c.calibration.synthetic_chains.atm_vol);
    }
  }
  return c;
}

json to_json(const ExperimentConfig& c) {
  const SyntheticChains& g = c.calibration.synthetic_chains;
  return {
      {"command", to_string(c.command)},
      {"seed", c.seed},
      {"jobs", c.jobs},
      {"output", c.output},
      {"cache_dir", c.cache_dir.string()},
      {"params", market::to_json(c.params)},
      {"utility", utility::to_json(c.utility)},
      {"domain", domain_json(c.domain)},
      {"solver",
       {{"hidden", c.solver.hidden},
        {"n_interior", c.solver.n_interior},
        {"n_terminal", c.solver.n_terminal},
        {"max_outer", c.solver.max_outer},
        {"tolerance", c.solver.tolerance},
        {"evaluation_iterations", c.solver.evaluation_iterations},
        {"improvement_iterations", c.solver.improvement_iterations},
        {"step", c.solver.step}}},
      {"slice", {{"t", c.slice.t}, {"W", c.slice.W}, {"theta", c.slice.theta}, {"v", c.slice.v}, {"L", c.slice.L}}},
      {"sweep", {{"variable", c.sweep.variable}, {"values", c.sweep.values}}},
      {"merton",
       {{"gamma", c.merton.gamma},
        {"r", c.merton.r},
        {"mu", c.merton.mu},
        {"sigma", c.merton.sigma},
        {"T", c.merton.T},
        {"policy_tolerance", c.merton.policy_tolerance},
        {"value_tolerance", c.merton.value_tolerance}}},
      {"calibration",
       {{"chains_dir", c.calibration.chains_dir.string()},
        {"synthetic", c.calibration.synthetic},
        {"synthetic_chains",
         {{"n_expiries", g.n_expiries}, {"tilt", g.tilt}, {"days", g.days}, {"atm_vol", g.atm_vol}}},
        {"horizons", c.calibration.horizons},
        {"n_mc", c.calibration.n_mc},
        {"min_chains", c.calibration.min_chains},
        {"tail_delta", c.calibration.tail_delta}}},
  };
}

ExperimentConfig load_config(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw std::runtime_error("cannot open config " + file.string());
  return config_from_json(json::parse(in, nullptr, true, true));
}

std::uint64_t config_hash(const ExperimentConfig& c) {
  json j = to_json(c);
  j.erase("jobs");
  j.erase("output");
  j.erase("cache_dir");
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : j.dump()) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

hjb::SolverConfig solver_config(const SolverSettings& s, std::uint64_t seed) {
  hjb::SolverConfig c;
  c.hidden = s.hidden;
  c.n_interior = s.n_interior;
  c.n_terminal = s.n_terminal;
  c.seed = seed;
  c.max_outer = s.max_outer;
  c.tolerance = s.tolerance;
  c.evaluation.max_iter = s.evaluation_iterations;
  c.improvement.max_iter = s.improvement_iterations;
  c.evaluation.learning_rate = s.step;
  c.improvement.learning_rate = s.step;
  return c;
}

}  // namespace liqport::experiments
