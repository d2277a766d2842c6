#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>

#include "liqport/market/params.hpp"

namespace liqport::hjb {

/// Network inputs in this order.
enum Input : int { kInW = 0, kInV = 1, kInTheta = 2, kInL = 3, kInT = 4 };
inline constexpr int kInputs = 5;

using State = std::array<double, kInputs>;
using StateBatch = Eigen::Matrix<double, kInputs, Eigen::Dynamic>;

inline State to_input(const market::MarketState& s) { return {s.W, s.v, s.theta, s.L, s.t}; }

/// Fixed affine map x -> (x - center) / scale applied before the first layer.
struct InputScaling {
  State center{0, 0, 0, 0, 0};
  State scale{1, 1, 1, 1, 1};
};

enum class OutputActivation { identity, sigmoid };

/// 5 -> H -> H -> 1 perceptron with tanh hidden activations. Parameters are
/// stored flat as [W1 (H x 5, column-major), b1, W2 (H x H), b2, w3, b3].
class Mlp {
 public:
  Mlp() = default;
  Mlp(int hidden, OutputActivation out);

  int hidden() const noexcept { return hidden_; }
  OutputActivation output() const noexcept { return out_; }
  std::size_t size() const noexcept { return static_cast<std::size_t>(theta_.size()); }
  static std::size_t size_for(int hidden) {
    const auto h = static_cast<std::size_t>(hidden);
    return h * kInputs + h + h * h + h + h + 1;
  }

  Eigen::VectorXd& theta() noexcept { return theta_; }
  const Eigen::VectorXd& theta() const noexcept { return theta_; }
  void set_theta(const Eigen::VectorXd& t);

  Eigen::Map<const Eigen::MatrixXd> W1() const { return {theta_.data(), hidden_, kInputs}; }
  Eigen::Map<const Eigen::VectorXd> b1() const { return {theta_.data() + o_b1(), hidden_}; }
  Eigen::Map<const Eigen::MatrixXd> W2() const { return {theta_.data() + o_W2(), hidden_, hidden_}; }
  Eigen::Map<const Eigen::VectorXd> b2() const { return {theta_.data() + o_b2(), hidden_}; }
  Eigen::Map<const Eigen::VectorXd> w3() const { return {theta_.data() + o_w3(), hidden_}; }
  double b3() const { return theta_(static_cast<Eigen::Index>(o_b3())); }

  std::size_t o_b1() const { return static_cast<std::size_t>(hidden_) * kInputs; }
  std::size_t o_W2() const { return o_b1() + static_cast<std::size_t>(hidden_); }
  std::size_t o_b2() const { return o_W2() + static_cast<std::size_t>(hidden_) * static_cast<std::size_t>(hidden_); }
  std::size_t o_w3() const { return o_b2() + static_cast<std::size_t>(hidden_); }
  std::size_t o_b3() const { return o_w3() + static_cast<std::size_t>(hidden_); }

 private:
  int hidden_ = 0;
  OutputActivation out_ = OutputActivation::identity;
  Eigen::VectorXd theta_;
};

/// Every parameter drawn uniformly from [-amplitude, amplitude].
Mlp init_mlp(int hidden, OutputActivation out, std::uint64_t seed, double amplitude = 0.1);

/// Forward pass on any scalar type with arithmetic and tanh (double,
/// numerics::HyperDual). Inputs are raw states; scaling is applied here.
template <class S>
S mlp_forward(const Mlp& m, const InputScaling& sc, std::span<const S> x) {
  using std::exp;
  using std::tanh;
  if (x.size() != kInputs) throw std::invalid_argument("network expects a 5-component state");
  const int H = m.hidden();
  const auto W1 = m.W1();
  const auto b1 = m.b1();
  const auto W2 = m.W2();
  const auto b2 = m.b2();
  const auto w3 = m.w3();
  std::array<S, kInputs> xs;
  for (int d = 0; d < kInputs; ++d) xs[d] = (x[d] - S(sc.center[d])) * S(1.0 / sc.scale[d]);
  std::vector<S> h1(static_cast<std::size_t>(H));
  for (int i = 0; i < H; ++i) {
    S a = S(b1(i));
    for (int d = 0; d < kInputs; ++d) a = a + S(W1(i, d)) * xs[d];
    h1[i] = tanh(a);
  }
  S y = S(m.b3());
  for (int i = 0; i < H; ++i) {
    S a = S(b2(i));
    for (int j = 0; j < H; ++j) a = a + S(W2(i, j)) * h1[j];
    y = y + S(w3(i)) * tanh(a);
  }
  if (m.output() == OutputActivation::sigmoid) return S(1.0) / (S(1.0) + exp(-y));
  return y;
}

/// Bounds of the truncated state box. Degenerate (zero-width) ranges freeze
/// a coordinate.
struct Domain {
  std::array<double, 2> W{0.5, 12.0};
  std::array<double, 2> v{0.01, 0.6};
  std::array<double, 2> theta{0.01, 0.8};
  std::array<double, 2> L{0.0, 1.0};
  double T = 1.0;

  std::array<double, 2> range(int input) const;
  bool frozen(int input) const { const auto r = range(input); return r[0] == r[1]; }
  /// Throws std::invalid_argument for inverted ranges, T <= 0 or negative
  /// v, theta or W.
  void validate() const;
  bool contains(const State& x) const;
  /// Scaling onto [-1, 1] per coordinate (identity scale for frozen ones).
  InputScaling scaling() const;

  /// W in [0.5, 12] with v, theta, L frozen; the constant-volatility setting.
  static Domain merton(double v, double T = 1.0);
};

struct NetworkParams {
  Mlp value;
  Mlp policy;
  InputScaling scaling;
  Domain domain;
};

NetworkParams init_networks(const Domain& domain, int hidden, std::uint64_t seed, double amplitude = 0.1);

double value_net(const NetworkParams& n, const State& x);
/// Strictly inside (0, 1).
double policy_net(const NetworkParams& n, const State& x);
/// True when x lies outside the training box (evaluation still succeeds).
bool extrapolated(const NetworkParams& n, const State& x);

/// Batched plain forward pass, one output per column.
Eigen::RowVectorXd mlp_batch(const Mlp& m, const InputScaling& sc, const StateBatch& X);

}  // namespace liqport::hjb
