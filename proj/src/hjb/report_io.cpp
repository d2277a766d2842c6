#include "liqport/hjb/report_io.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string>

namespace liqport::hjb {

namespace {

std::vector<double> flat(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

nlohmann::json range_json(const std::array<double, 2>& r) { return nlohmann::json::array({r[0], r[1]}); }

std::array<double, 2> range_from(const nlohmann::json& j) { return {j.at(0).get<double>(), j.at(1).get<double>()}; }

// JSON has no NaN; encode it as null.
nlohmann::json number(double x) { return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(nullptr); }

double number_from(const nlohmann::json& j) {
  return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

}  // namespace

nlohmann::json to_json(const Mlp& m) {
  const int H = m.hidden();
  nlohmann::json j;
  j["hidden"] = H;
  j["output"] = m.output() == OutputActivation::sigmoid ? "sigmoid" : "identity";
  j["layers"] = nlohmann::json::array({{{"name", "f1"}, {"in", kInputs}, {"out", H}},
                                       {{"name", "f2"}, {"in", H}, {"out", H}},
                                       {{"name", "f3"}, {"in", H}, {"out", 1}}});
  j["layout"] = "W1 (column-major), b1, W2 (column-major), b2, w3, b3";
  j["theta"] = flat(m.theta());
  return j;
}

Mlp mlp_from_json(const nlohmann::json& j) {
  const std::string out = j.at("output").get<std::string>();
  if (out != "sigmoid" && out != "identity") throw std::invalid_argument("unknown output activation: " + out);
  Mlp m(j.at("hidden").get<int>(), out == "sigmoid" ? OutputActivation::sigmoid : OutputActivation::identity);
  const auto theta = j.at("theta").get<std::vector<double>>();
  if (theta.size() != m.size()) throw std::invalid_argument("parameter array does not match the layer shapes");
  m.set_theta(Eigen::Map<const Eigen::VectorXd>(theta.data(), static_cast<Eigen::Index>(theta.size())));
  return m;
}

nlohmann::json to_json(const NetworkParams& n) {
  nlohmann::json j;
  j["value"] = to_json(n.value);
  j["policy"] = to_json(n.policy);
  j["domain"] = {{"W", range_json(n.domain.W)},
                 {"v", range_json(n.domain.v)},
                 {"theta", range_json(n.domain.theta)},
                 {"L", range_json(n.domain.L)},
                 {"T", n.domain.T}};
  j["inputs"] = {"W", "v", "theta", "L", "t"};
  j["scaling"] = {{"center", n.scaling.center}, {"scale", n.scaling.scale}};
  return j;
}

NetworkParams networks_from_json(const nlohmann::json& j) {
  NetworkParams n;
  n.value = mlp_from_json(j.at("value"));
  n.policy = mlp_from_json(j.at("policy"));
  const auto& d = j.at("domain");
  n.domain.W = range_from(d.at("W"));
  n.domain.v = range_from(d.at("v"));
  n.domain.theta = range_from(d.at("theta"));
  n.domain.L = range_from(d.at("L"));
  n.domain.T = d.at("T").get<double>();
  n.domain.validate();
  n.scaling.center = j.at("scaling").at("center").get<State>();
  n.scaling.scale = j.at("scaling").at("scale").get<State>();
  return n;
}

nlohmann::json to_json(const IterationRecord& r) {
  return {{"iteration", r.iteration},
          {"evaluation_loss", number(r.evaluation_loss)},
          {"pde_loss", number(r.pde_loss)},
          {"terminal_loss", number(r.terminal_loss)},
          {"generator_mean", number(r.generator_mean)},
          {"max_relative_change", number(r.max_relative_change)},
          {"reference_distance", number(r.reference_distance)},
          {"evaluation_iterations", r.evaluation_iterations},
          {"improvement_iterations", r.improvement_iterations},
          {"excluded", r.excluded},
          {"evaluation_failed", r.evaluation_failed},
          {"improvement_failed", r.improvement_failed}};
}

nlohmann::json to_json(const SolveReport& r) {
  nlohmann::json j;
  j["networks"] = to_json(r.networks);
  j["iterations"] = nlohmann::json::array();
  for (const auto& it : r.iterations) j["iterations"].push_back(to_json(it));
  j["converged"] = r.converged;
  j["diverged"] = r.diverged;
  j["message"] = r.message;
  j["wall_seconds"] = r.wall_seconds;
  j["distance_norm"] = "sup over the monitoring grid";
  return j;
}

SolveReport report_from_json(const nlohmann::json& j) {
  SolveReport r;
  r.networks = networks_from_json(j.at("networks"));
  for (const auto& it : j.at("iterations")) {
    IterationRecord rec;
    rec.iteration = it.at("iteration").get<int>();
    rec.evaluation_loss = number_from(it.at("evaluation_loss"));
    rec.pde_loss = number_from(it.at("pde_loss"));
    rec.terminal_loss = number_from(it.at("terminal_loss"));
    rec.generator_mean = number_from(it.at("generator_mean"));
    rec.max_relative_change = number_from(it.at("max_relative_change"));
    rec.reference_distance = number_from(it.at("reference_distance"));
    rec.evaluation_iterations = it.at("evaluation_iterations").get<int>();
    rec.improvement_iterations = it.at("improvement_iterations").get<int>();
    rec.excluded = it.at("excluded").get<std::size_t>();
    rec.evaluation_failed = it.at("evaluation_failed").get<bool>();
    rec.improvement_failed = it.at("improvement_failed").get<bool>();
    r.iterations.push_back(rec);
  }
  r.converged = j.at("converged").get<bool>();
  r.diverged = j.at("diverged").get<bool>();
  r.message = j.at("message").get<std::string>();
  r.wall_seconds = j.at("wall_seconds").get<double>();
  return r;
}

void save_report(const SolveReport& r, const std::filesystem::path& file) {
  std::ofstream out(file);
  if (!out) throw std::runtime_error("cannot write " + file.string());
  out << std::setw(1) << to_json(r) << '\n';
}

SolveReport load_report(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw std::runtime_error("cannot read " + file.string());
  return report_from_json(nlohmann::json::parse(in));
}

void write_iterations_csv(const SolveReport& r, std::ostream& out) {
  out << "iteration,evaluation_loss,pde_loss,terminal_loss,generator_mean,max_relative_change,reference_distance,"
         "evaluation_iterations,improvement_iterations,excluded\n";
  out << std::setprecision(17);
  for (const auto& it : r.iterations)
    out << it.iteration << ',' << it.evaluation_loss << ',' << it.pde_loss << ',' << it.terminal_loss << ','
        << it.generator_mean << ',' << it.max_relative_change << ',' << it.reference_distance << ','
        << it.evaluation_iterations << ',' << it.improvement_iterations << ',' << it.excluded << '\n';
}

void write_slice_csv(const NetworkParams& n, const State& base, SliceAxis axis, const std::vector<double>& grid,
                     std::ostream& out) {
  out << (axis == SliceAxis::wealth ? "W" : "t") << ",value,omega\n";
  out << std::setprecision(17);
  for (double g : grid) {
    State x = base;
    x[axis == SliceAxis::wealth ? kInW : kInT] = g;
    out << g << ',' << value_net(n, x) << ',' << policy_net(n, x) << '\n';
  }
}

}  // namespace liqport::hjb
