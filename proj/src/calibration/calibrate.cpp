#include "liqport/calibration/calibrate.hpp"

#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "liqport/calibration/smile.hpp"

namespace liqport::calibration {

namespace {

constexpr double kPenalty = 1e6;

// Parameters optimized on the log scale, per family.
std::vector<bool> positive_mask(const utility::UtilitySpec& u) {
  using namespace utility;
  if (std::holds_alternative<Hara>(u)) return {false, false};
  if (std::holds_alternative<LogPlusPower>(u)) return {true, false};
  return std::vector<bool>(parameters(u).size(), true);
}

std::vector<double> to_params(const Eigen::VectorXd& x, const std::vector<bool>& positive) {
  std::vector<double> th(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) th[i] = positive[i] ? std::exp(x(i)) : x(i);
  return th;
}

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  const auto b = s.find_last_not_of(" \t\r");
  return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
}

}  // namespace

std::vector<CalibrationSample> build_samples(std::span<const RawQuote> rows,
                                             const std::map<std::string, double>& realizations,
                                             const PipelineOptions& options, PipelineReport* report) {
  PipelineReport rep;
  std::vector<CalibrationSample> out;
  for (const auto& group : group_by_expiry(rows)) {
    ++rep.chains_seen;
    rep.quotes_seen += group.size();
    const std::string& expiry = group.front().expiry;
    const auto hit = realizations.find(expiry);
    if (hit == realizations.end()) {
      rep.dropped.push_back(expiry + ": no realization");
      continue;
    }
    try {
      const OptionChain chain = ingest_chain(group, options.filters);
      if (options.horizon_weeks != 0 && chain.horizon_weeks != options.horizon_weeks) {
        rep.dropped.push_back(expiry + ": outside horizon bucket");
        continue;
      }
      const CubicSpline smile = fit_smile(chain, options.smoothing);
      out.push_back({rn_density(smile, chain, options.density), hit->second, expiry});
      rep.quotes_kept += chain.count(QuoteStatus::kept);
      ++rep.chains_used;
    } catch (const std::exception& e) {
      rep.dropped.push_back(expiry + ": " + e.what());
    }
  }
  if (report) *report = std::move(rep);
  return out;
}

std::map<std::string, double> read_realizations_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || trim(line) != "expiry,price")
    throw std::invalid_argument("realizations CSV must start with the header 'expiry,price'");
  std::map<std::string, double> out;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw std::invalid_argument("realizations CSV row " + std::to_string(row));
    const std::string expiry = trim(line.substr(0, comma));
    std::size_t used = 0;
    const std::string price = trim(line.substr(comma + 1));
    double value = 0.0;
    try {
      value = std::stod(price, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != price.size() || price.empty() || !(value > 0.0))
      throw std::invalid_argument("realizations CSV row " + std::to_string(row) + ": bad price");
    if (!out.emplace(expiry, value).second)
      throw std::invalid_argument("realizations CSV repeats expiry " + expiry);
  }
  return out;
}

void write_realizations_csv(std::span<const std::string> expiries, std::span<const double> prices,
                            std::ostream& out) {
  if (expiries.size() != prices.size()) throw std::invalid_argument("expiries and prices differ in length");
  out << "expiry,price\n";
  const auto old = out.precision(17);
  for (std::size_t i = 0; i < prices.size(); ++i) out << expiries[i] << ',' << prices[i] << '\n';
  out.precision(old);
}

UtilityEvaluation evaluate_utility(const utility::UtilitySpec& u, std::span<const CalibrationSample> samples) {
  std::vector<DensityEstimate> p;
  std::vector<double> x;
  p.reserve(samples.size());
  for (const auto& s : samples) {
    p.push_back(subjective_density(s.q, u));
    x.push_back(s.realization);
  }
  const PitResult pit = pit_transform(x, p);
  return {berkowitz_tests(pit.y), pit.n_clamped};
}

numerics::OptimizerConfig CalibrationOptions::default_optimizer() {
  numerics::OptimizerConfig c;
  c.method = numerics::Method::bfgs;
  c.learning_rate = 1.0;
  c.line_search = numerics::LineSearch::backtracking_armijo;
  c.max_iter = 100;
  c.gradient_tolerance = 1e-5;
  return c;
}

CalibrationResult calibrate_utility(const utility::UtilitySpec& start, std::span<const CalibrationSample> samples,
                                    const CalibrationOptions& options) {
  if (samples.size() < 8) throw std::invalid_argument("utility calibration needs at least 8 samples");
  utility::validate(start);
  const std::vector<double> th0 = utility::parameters(start);
  const std::vector<bool> positive = positive_mask(start);

  CalibrationResult res;
  res.n_samples = samples.size();
  if (th0.empty()) {
    const UtilityEvaluation ev = evaluate_utility(start, samples);
    res.fitted = start;
    res.tests = ev.tests;
    res.n_clamped = ev.n_clamped;
    res.message = "no free parameters";
    return res;
  }

  Eigen::VectorXd x0(th0.size());
  for (std::size_t i = 0; i < th0.size(); ++i) {
    if (positive[i] && !(th0[i] > 0.0)) throw std::invalid_argument("starting parameter must be > 0");
    x0(i) = positive[i] ? std::log(th0[i]) : th0[i];
  }

  double best_f = std::numeric_limits<double>::infinity();
  Eigen::VectorXd best_x = x0;
  const auto lr3 = [&](const Eigen::VectorXd& x) {
    double f = kPenalty;
    try {
      const utility::UtilitySpec u = utility::with_parameters(start, to_params(x, positive));
      utility::validate(u);
      f = evaluate_utility(u, samples).tests.LR3;
      if (!std::isfinite(f)) f = kPenalty;
    } catch (const std::exception&) {
      f = kPenalty;
    }
    if (f < best_f) {
      best_f = f;
      best_x = x;
    }
    return f;
  };

  const numerics::MinimizeResult r =
      numerics::minimize(numerics::finite_difference_objective(lr3, options.fd_step), x0, options.optimizer);
  res.iterations = r.iterations;
  res.evaluations = r.evaluations;
  res.failed = !r.converged;
  res.message = r.message;
  if (!(best_f < kPenalty)) {
    res.failed = true;
    res.message = "no admissible parameters found";
  }
  res.fitted = utility::with_parameters(start, to_params(best_x, positive));
  const UtilityEvaluation ev = evaluate_utility(res.fitted, samples);
  res.tests = ev.tests;
  res.n_clamped = ev.n_clamped;
  return res;
}

}  // namespace liqport::calibration
