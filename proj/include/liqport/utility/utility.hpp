#pragma once

#include <span>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

namespace liqport::utility {

/// U(W) = W; the risk-neutral reference.
struct Linear {};

/// W^(1-k) / (1-k).
struct Power {
  double k = 0.5;
};

/// -exp(-k W) / k.
struct Exponential {
  double k = 1.0;
};

/// (k1 W + k2)^(1 - 1/k1) / (k1 - 1).
struct Hara {
  double k1 = 2.0;
  double k2 = 1.0;
};

/// k1 log W + W^k2 / k2.
struct LogPlusPower {
  double k1 = 1.0;
  double k2 = 0.5;
};

/// k1 W - exp(-k2 W) / k2.
struct LinearPlusExponential {
  double k1 = 1.0;
  double k2 = 1.0;
};

/// tanh(k1 (W - W0)) above the reference point,
/// -(k1/k2) tanh(k2 (W0 - W)) below it.
struct SShaped {
  double k1 = 2.27;
  double k2 = 2.81;
  double W0 = 4.76;
};

/// Smallest concave majorant of an S-shaped utility on [0, inf): the line
/// intercept + slope*W below the tangent point, the gain branch above it.
struct ConcaveEnvelope {
  SShaped base;
  double W_tp = 0.0;
  double slope = 0.0;
  double intercept = 0.0;
};

using UtilitySpec =
    std::variant<Linear, Power, Exponential, Hara, LogPlusPower, LinearPlusExponential, SShaped, ConcaveEnvelope>;

/// Throws std::invalid_argument when parameters leave the family's valid range.
void validate(const UtilitySpec& u);

/// All four throw std::domain_error outside the family's wealth domain.
double evaluate(const UtilitySpec& u, double W);
double marginal(const UtilitySpec& u, double W);
double second_derivative(const UtilitySpec& u, double W);
/// -W U''(W) / U'(W). For the envelope, undefined exactly at W_tp.
double rra(const UtilitySpec& u, double W);

/// Tangent line from (0, U(0)) to the gain branch, found by bisection on
/// [W0, W0 + 10] down to floating-point resolution (well below 1e-10).
/// Throws when the bracket holds no sign change.
ConcaveEnvelope concavify(const SShaped& s);

/// Stable family tag: "linear", "power", "exponential", "hara", "log_plus_power",
/// "linear_plus_exponential", "s_shaped", "concave_envelope".
std::string family_name(const UtilitySpec& u);

/// Free parameters in declaration order (none, k, or k1, k2[, W0]). The envelope
/// exposes the parameters of its base.
std::vector<double> parameters(const UtilitySpec& u);
/// Same family with new parameters (the envelope is re-concavified).
UtilitySpec with_parameters(const UtilitySpec& u, std::span<const double> theta);

/// {"family": tag}, {"family": tag, "k": ...} or {"family": tag, "k1": ..., "k2": ...[, "W0": ...]}.
/// Envelope records also carry W_tp/slope/intercept; reading recomputes them
/// from the base parameters.
nlohmann::json to_json(const UtilitySpec& u);
UtilitySpec utility_from_json(const nlohmann::json& j);

}  // namespace liqport::utility
