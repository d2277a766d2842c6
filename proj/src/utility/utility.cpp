#include "liqport/utility/utility.hpp"

#include <cmath>
#include <stdexcept>

namespace liqport::utility {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

[[noreturn]] void domain(const std::string& family, double W) {
  throw std::domain_error(family + " utility undefined at W=" + std::to_string(W));
}

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument(what);
}

void check_nonnegative(const std::string& family, double W) {
  if (!(W >= 0.0) || !std::isfinite(W)) domain(family, W);
}

void check_positive(const std::string& family, double W) {
  if (!(W > 0.0) || !std::isfinite(W)) domain(family, W);
}

double hara_base(const Hara& h, double W) {
  check_nonnegative("hara", W);
  const double b = h.k1 * W + h.k2;
  if (!(b > 0.0)) domain("hara", W);
  return b;
}

// Value and first two derivatives of the S-shaped utility.
struct Jet {
  double u, du, d2u;
};

Jet s_shaped_jet(const SShaped& s, double W) {
  check_nonnegative("s_shaped", W);
  if (W >= s.W0) {
    const double h = std::tanh(s.k1 * (W - s.W0));
    const double sech2 = 1.0 - h * h;
    return {h, s.k1 * sech2, -2.0 * s.k1 * s.k1 * h * sech2};
  }
  const double h = std::tanh(s.k2 * (s.W0 - W));
  const double sech2 = 1.0 - h * h;
  return {-(s.k1 / s.k2) * h, s.k1 * sech2, 2.0 * s.k1 * s.k2 * h * sech2};
}

Jet envelope_jet(const ConcaveEnvelope& e, double W) {
  check_nonnegative("concave_envelope", W);
  if (W >= e.W_tp) return s_shaped_jet(e.base, W);
  return {e.intercept + e.slope * W, e.slope, 0.0};
}

}  // namespace

void validate(const UtilitySpec& u) {
  std::visit(overloaded{
                 [](const Linear&) {},
                 [](const Power& p) { require(p.k > 0.0 && p.k != 1.0, "power utility needs k > 0, k != 1"); },
                 [](const Exponential& p) { require(p.k > 0.0, "exponential utility needs k > 0"); },
                 [](const Hara& p) {
                   require(p.k1 != 0.0 && p.k1 != 1.0 && std::isfinite(p.k1) && std::isfinite(p.k2),
                           "hara utility needs k1 not in {0, 1}");
                 },
                 [](const LogPlusPower& p) {
                   require(p.k1 >= 0.0 && p.k2 != 0.0 && std::isfinite(p.k2),
                           "log_plus_power utility needs k1 >= 0, k2 != 0");
                 },
                 [](const LinearPlusExponential& p) {
                   require(p.k1 >= 0.0 && p.k2 > 0.0 && std::isfinite(p.k1),
                           "linear_plus_exponential utility needs k1 >= 0, k2 > 0");
                 },
                 [](const SShaped& p) {
                   require(p.k1 > 0.0 && p.k2 > 0.0 && p.W0 > 0.0, "s_shaped utility needs k1, k2, W0 > 0");
                 },
                 [](const ConcaveEnvelope& e) {
                   validate(e.base);
                   require(e.slope > 0.0 && e.W_tp >= e.base.W0, "envelope needs slope > 0 and W_tp >= W0");
                 },
             },
             u);
}

double evaluate(const UtilitySpec& u, double W) {
  return std::visit(overloaded{
                        [W](const Linear&) {
                          check_nonnegative("linear", W);
                          return W;
                        },
                        [W](const Power& p) {
                          if (W == 0.0 && p.k < 1.0) return 0.0;
                          check_positive("power", W);
                          return std::pow(W, 1.0 - p.k) / (1.0 - p.k);
                        },
                        [W](const Exponential& p) {
                          check_nonnegative("exponential", W);
                          return -std::exp(-p.k * W) / p.k;
                        },
                        [W](const Hara& p) {
                          return std::pow(hara_base(p, W), 1.0 - 1.0 / p.k1) / (p.k1 - 1.0);
                        },
                        [W](const LogPlusPower& p) {
                          check_positive("log_plus_power", W);
                          return p.k1 * std::log(W) + std::pow(W, p.k2) / p.k2;
                        },
                        [W](const LinearPlusExponential& p) {
                          check_nonnegative("linear_plus_exponential", W);
                          return p.k1 * W - std::exp(-p.k2 * W) / p.k2;
                        },
                        [W](const SShaped& s) { return s_shaped_jet(s, W).u; },
                        [W](const ConcaveEnvelope& e) { return envelope_jet(e, W).u; },
                    },
                    u);
}

double marginal(const UtilitySpec& u, double W) {
  return std::visit(overloaded{
                        [W](const Linear&) {
                          check_nonnegative("linear", W);
                          return 1.0;
                        },
                        [W](const Power& p) {
                          check_positive("power", W);
                          return std::pow(W, -p.k);
                        },
                        [W](const Exponential& p) {
                          check_nonnegative("exponential", W);
                          return std::exp(-p.k * W);
                        },
                        [W](const Hara& p) { return std::pow(hara_base(p, W), -1.0 / p.k1); },
                        [W](const LogPlusPower& p) {
                          check_positive("log_plus_power", W);
                          return p.k1 / W + std::pow(W, p.k2 - 1.0);
                        },
                        [W](const LinearPlusExponential& p) {
                          check_nonnegative("linear_plus_exponential", W);
                          return p.k1 + std::exp(-p.k2 * W);
                        },
                        [W](const SShaped& s) { return s_shaped_jet(s, W).du; },
                        [W](const ConcaveEnvelope& e) { return envelope_jet(e, W).du; },
                    },
                    u);
}

double second_derivative(const UtilitySpec& u, double W) {
  return std::visit(overloaded{
                        [W](const Linear&) {
                          check_nonnegative("linear", W);
                          return 0.0;
                        },
                        [W](const Power& p) {
                          check_positive("power", W);
                          return -p.k * std::pow(W, -p.k - 1.0);
                        },
                        [W](const Exponential& p) {
                          check_nonnegative("exponential", W);
                          return -p.k * std::exp(-p.k * W);
                        },
                        [W](const Hara& p) { return -std::pow(hara_base(p, W), -1.0 / p.k1 - 1.0); },
                        [W](const LogPlusPower& p) {
                          check_positive("log_plus_power", W);
                          return -p.k1 / (W * W) + (p.k2 - 1.0) * std::pow(W, p.k2 - 2.0);
                        },
                        [W](const LinearPlusExponential& p) {
                          check_nonnegative("linear_plus_exponential", W);
                          return -p.k2 * std::exp(-p.k2 * W);
                        },
                        [W](const SShaped& s) { return s_shaped_jet(s, W).d2u; },
                        [W](const ConcaveEnvelope& e) {
                          if (W == e.W_tp)
                            throw std::domain_error("envelope second derivative undefined at the tangent point");
                          return envelope_jet(e, W).d2u;
                        },
                    },
                    u);
}

double rra(const UtilitySpec& u, double W) {
  if (!(W > 0.0)) throw std::domain_error("relative risk aversion needs W > 0");
  return -W * second_derivative(u, W) / marginal(u, W);
}

ConcaveEnvelope concavify(const SShaped& s) {
  validate(s);
  const double u0 = s_shaped_jet(s, 0.0).u;
  auto h = [&](double W) {
    const Jet j = s_shaped_jet(s, W);
    return j.u - u0 - W * j.du;
  };
  double lo = s.W0, hi = s.W0 + 10.0;
  double hlo = h(lo);
  if (!(hlo < 0.0 && h(hi) > 0.0))
    throw std::invalid_argument("no tangent point in [W0, W0 + 10]; degenerate S-shaped parameters");
  // Bisect until the bracket cannot shrink: the line then meets the branch
  // to rounding, not merely to the 1e-10 bracket width.
  for (;;) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    const double hm = h(mid);
    if ((hm < 0.0) == (hlo < 0.0)) {
      lo = mid;
      hlo = hm;
    } else {
      hi = mid;
    }
  }
  ConcaveEnvelope e;
  e.base = s;
  e.W_tp = 0.5 * (lo + hi);
  e.slope = s_shaped_jet(s, e.W_tp).du;
  e.intercept = u0;
  return e;
}

std::string family_name(const UtilitySpec& u) {
  return std::visit(overloaded{
                        [](const Linear&) { return std::string("linear"); },
                        [](const Power&) { return std::string("power"); },
                        [](const Exponential&) { return std::string("exponential"); },
                        [](const Hara&) { return std::string("hara"); },
                        [](const LogPlusPower&) { return std::string("log_plus_power"); },
                        [](const LinearPlusExponential&) { return std::string("linear_plus_exponential"); },
                        [](const SShaped&) { return std::string("s_shaped"); },
                        [](const ConcaveEnvelope&) { return std::string("concave_envelope"); },
                    },
                    u);
}

std::vector<double> parameters(const UtilitySpec& u) {
  return std::visit(overloaded{
                        [](const Linear&) { return std::vector<double>{}; },
                        [](const Power& p) { return std::vector<double>{p.k}; },
                        [](const Exponential& p) { return std::vector<double>{p.k}; },
                        [](const Hara& p) { return std::vector<double>{p.k1, p.k2}; },
                        [](const LogPlusPower& p) { return std::vector<double>{p.k1, p.k2}; },
                        [](const LinearPlusExponential& p) { return std::vector<double>{p.k1, p.k2}; },
                        [](const SShaped& p) { return std::vector<double>{p.k1, p.k2, p.W0}; },
                        [](const ConcaveEnvelope& e) { return std::vector<double>{e.base.k1, e.base.k2, e.base.W0}; },
                    },
                    u);
}

UtilitySpec with_parameters(const UtilitySpec& u, std::span<const double> theta) {
  const std::size_t n = parameters(u).size();
  if (theta.size() != n)
    throw std::invalid_argument(family_name(u) + " expects " + std::to_string(n) + " parameters");
  UtilitySpec out = std::visit(overloaded{
                                   [&](const Linear&) -> UtilitySpec { return Linear{}; },
                                   [&](const Power&) -> UtilitySpec { return Power{theta[0]}; },
                                   [&](const Exponential&) -> UtilitySpec { return Exponential{theta[0]}; },
                                   [&](const Hara&) -> UtilitySpec { return Hara{theta[0], theta[1]}; },
                                   [&](const LogPlusPower&) -> UtilitySpec { return LogPlusPower{theta[0], theta[1]}; },
                                   [&](const LinearPlusExponential&) -> UtilitySpec {
                                     return LinearPlusExponential{theta[0], theta[1]};
                                   },
                                   [&](const SShaped&) -> UtilitySpec { return SShaped{theta[0], theta[1], theta[2]}; },
                                   [&](const ConcaveEnvelope&) -> UtilitySpec {
                                     return concavify(SShaped{theta[0], theta[1], theta[2]});
                                   },
                               },
                               u);
  validate(out);
  return out;
}

nlohmann::json to_json(const UtilitySpec& u) {
  nlohmann::json j;
  j["family"] = family_name(u);
  std::visit(overloaded{
                 [&](const Linear&) {},
                 [&](const Power& p) { j["k"] = p.k; },
                 [&](const Exponential& p) { j["k"] = p.k; },
                 [&](const Hara& p) { j["k1"] = p.k1, j["k2"] = p.k2; },
                 [&](const LogPlusPower& p) { j["k1"] = p.k1, j["k2"] = p.k2; },
                 [&](const LinearPlusExponential& p) { j["k1"] = p.k1, j["k2"] = p.k2; },
                 [&](const SShaped& s) { j["k1"] = s.k1, j["k2"] = s.k2, j["W0"] = s.W0; },
                 [&](const ConcaveEnvelope& e) {
                   j["k1"] = e.base.k1, j["k2"] = e.base.k2, j["W0"] = e.base.W0;
                   j["W_tp"] = e.W_tp, j["slope"] = e.slope, j["intercept"] = e.intercept;
                 },
             },
             u);
  return j;
}

UtilitySpec utility_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("family")) throw std::invalid_argument("utility record needs a 'family' key");
  const std::string f = j.at("family").get<std::string>();
  auto num = [&](const char* key) {
    if (!j.contains(key) || !j.at(key).is_number())
      throw std::invalid_argument("utility '" + f + "' needs numeric '" + key + "'");
    return j.at(key).get<double>();
  };
  UtilitySpec u;
  if (f == "linear") u = Linear{};
  else if (f == "power") u = Power{num("k")};
  else if (f == "exponential") u = Exponential{num("k")};
  else if (f == "hara") u = Hara{num("k1"), num("k2")};
  else if (f == "log_plus_power") u = LogPlusPower{num("k1"), num("k2")};
  else if (f == "linear_plus_exponential") u = LinearPlusExponential{num("k1"), num("k2")};
  else if (f == "s_shaped") u = SShaped{num("k1"), num("k2"), num("W0")};
  else if (f == "concave_envelope") u = concavify(SShaped{num("k1"), num("k2"), num("W0")});
  else throw std::invalid_argument("unknown utility family '" + f + "'");
  validate(u);
  return u;
}

}  // namespace liqport::utility
