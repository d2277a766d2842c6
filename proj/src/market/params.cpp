#include "liqport/market/params.hpp"

#include <cmath>
#include <stdexcept>
#include <utility>
#include <vector>

namespace liqport::market {

namespace {

using Field = std::pair<const char*, double ModelParams::*>;

const std::vector<Field>& scalar_fields() {
  static const std::vector<Field> fields{
      {"r", &ModelParams::r},
      {"mu", &ModelParams::mu},
      {"kappa", &ModelParams::kappa},
      {"sigma1", &ModelParams::sigma1},
      {"lambda", &ModelParams::lambda},
      {"eta", &ModelParams::eta},
      {"sigma2", &ModelParams::sigma2},
      {"alpha", &ModelParams::alpha},
      {"theta_hat_L", &ModelParams::theta_hat_L},
      {"lambda_TC", &ModelParams::lambda_TC},
      {"kappa_TC", &ModelParams::kappa_TC},
      {"xi", &ModelParams::xi},
      {"sigma_L", &ModelParams::sigma_L},
      {"beta", &ModelParams::beta},
      {"delta_t", &ModelParams::delta_t},
      {"T", &ModelParams::T},
  };
  return fields;
}

int rho_index(const std::string& name) {
  if (name.size() == 4 && name.compare(0, 3, "rho") == 0 && name[3] >= '1' && name[3] <= '6')
    return name[3] - '1';
  return -1;
}

void require(bool ok, const char* field, const char* what) {
  if (!ok) throw std::invalid_argument(std::string("ModelParams.") + field + ": " + what);
}

}  // namespace

void ModelParams::validate() const {
  for (const auto& [name, member] : scalar_fields())
    require(std::isfinite(this->*member), name, "must be finite");
  require(kappa_TC >= 0.0 && kappa_TC < 1.0, "kappa_TC", "must lie in [0, 1)");
  require(xi > 0.0 && xi < 1.0, "xi", "must lie in (0, 1)");
  require(beta >= 0.0, "beta", "must be >= 0");
  require(kappa >= 0.0, "kappa", "must be >= 0");
  require(lambda >= 0.0, "lambda", "must be >= 0");
  require(alpha >= 0.0, "alpha", "must be >= 0");
  require(sigma1 >= 0.0, "sigma1", "must be >= 0");
  require(sigma2 >= 0.0, "sigma2", "must be >= 0");
  require(sigma_L >= 0.0, "sigma_L", "must be >= 0");
  require(eta >= 0.0, "eta", "must be >= 0");
  require(theta_hat_L >= 0.0, "theta_hat_L", "must be >= 0");
  require(lambda_TC >= 0.0, "lambda_TC", "must be >= 0");
  require(delta_t > 0.0, "delta_t", "must be > 0");
  require(T > 0.0, "T", "must be > 0");
  for (double c : rho) require(c >= -1.0 && c <= 1.0, "rho", "each correlation must lie in [-1, 1]");
}

ModelParams ModelParams::merton(double r, double mu, double T) {
  ModelParams p;
  p.r = r;
  p.mu = mu;
  p.T = T;
  p.kappa = p.sigma1 = p.lambda = p.eta = p.sigma2 = 0.0;
  p.alpha = p.theta_hat_L = p.lambda_TC = p.kappa_TC = 0.0;
  p.sigma_L = p.beta = 0.0;
  p.rho.fill(0.0);
  return p;
}

nlohmann::json to_json(const ModelParams& p) {
  nlohmann::json j;
  for (const auto& [name, member] : scalar_fields()) j[name] = p.*member;
  for (int i = 0; i < 6; ++i) j["rho" + std::to_string(i + 1)] = p.rho[static_cast<std::size_t>(i)];
  return j;
}

ModelParams params_from_json(const nlohmann::json& j, ModelParams base) {
  if (!j.is_object()) throw std::invalid_argument("model parameters must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (key == "gamma") continue;
    if (!value.is_number()) throw std::invalid_argument("model parameter '" + key + "' is not a number");
    set_param(base, key, value.get<double>());
  }
  base.validate();
  return base;
}

double get_param(const ModelParams& p, const std::string& name) {
  for (const auto& [field, member] : scalar_fields())
    if (name == field) return p.*member;
  if (const int k = rho_index(name); k >= 0) return p.rho[static_cast<std::size_t>(k)];
  throw std::invalid_argument("unknown model parameter '" + name + "'");
}

void set_param(ModelParams& p, const std::string& name, double value) {
  for (const auto& [field, member] : scalar_fields()) {
    if (name == field) {
      p.*member = value;
      return;
    }
  }
  if (const int k = rho_index(name); k >= 0) {
    p.rho[static_cast<std::size_t>(k)] = value;
    return;
  }
  throw std::invalid_argument("unknown model parameter '" + name + "'");
}

}  // namespace liqport::market
