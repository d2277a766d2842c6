#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>

namespace liqport::numerics {

class Tape;

/// Handle to a node recorded on a Tape. Cheap to copy; only valid while the
/// owning tape is alive and has not been cleared.
class Var {
 public:
  Var() = default;
  double value() const;
  std::uint32_t index() const noexcept { return index_; }
  Tape* tape() const noexcept { return tape_; }

 private:
  friend class Tape;
  Var(Tape* tape, std::uint32_t index) : tape_(tape), index_(index) {}
  Tape* tape_ = nullptr;
  std::uint32_t index_ = 0;
};

/// Linear record of elementary operations for reverse accumulation.
///
/// Leaves are created with variable(); every operation on Var appends one
/// node. replay() re-runs the recorded program on new leaf values, which with
/// the original leaf values reproduces every node value bit for bit.
class Tape {
 public:
  enum class Op : std::uint8_t {
    leaf, constant, add, sub, mul, div, neg, add_c, mul_c, exp, log, tanh, sqrt,
    pow_c, sigmoid, square
  };

  Var variable(double value);
  Var constant(double value);

  std::size_t size() const noexcept { return nodes_.size(); }
  std::size_t leaf_count() const noexcept { return leaves_.size(); }
  double value(const Var& v) const { return nodes_.at(v.index_).value; }

  /// d(output)/d(leaf) for every leaf, in creation order.
  Eigen::VectorXd gradient(const Var& output) const;

  /// Recomputes all node values from new leaf values; returns the value of
  /// `output` under those leaves. Leaves must be given in creation order.
  double replay(std::span<const double> leaf_values, const Var& output);

  void clear();

  // Recording primitives; Var operators forward here.
  Var unary(Op op, const Var& a, double c = 0.0);
  Var binary(Op op, const Var& a, const Var& b);

 private:
  struct Node {
    Op op;
    std::uint32_t a;
    std::uint32_t b;
    double c;
    double value;
  };
  static double evaluate(Op op, double a, double b, double c);
  Var push(Op op, std::uint32_t a, std::uint32_t b, double c, double value);
  void check(const Var& v) const;

  std::vector<Node> nodes_;
  std::vector<std::uint32_t> leaves_;
};

Var operator+(const Var& a, const Var& b);
Var operator-(const Var& a, const Var& b);
Var operator*(const Var& a, const Var& b);
Var operator/(const Var& a, const Var& b);
Var operator-(const Var& a);
Var operator+(const Var& a, double c);
Var operator+(double c, const Var& a);
Var operator-(const Var& a, double c);
Var operator-(double c, const Var& a);
Var operator*(const Var& a, double c);
Var operator*(double c, const Var& a);
Var operator/(const Var& a, double c);
Var exp(const Var& a);
Var log(const Var& a);
Var tanh(const Var& a);
Var sqrt(const Var& a);
Var pow(const Var& a, double p);
Var sigmoid(const Var& a);
Var square(const Var& a);

/// Raised when a loss handed to grad_wrt_params is not finite.
class NonFiniteLoss : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Gradient of a scalar loss with respect to its parameter vector by reverse
/// accumulation. `loss` is called as loss(tape, params) with params recorded
/// as tape leaves and must return a Var on the same tape.
template <class Loss>
Eigen::VectorXd grad_wrt_params(Loss&& loss, std::span<const double> theta) {
  Tape tape;
  std::vector<Var> params;
  params.reserve(theta.size());
  for (double t : theta) params.push_back(tape.variable(t));
  const Var out = loss(tape, std::span<const Var>(params));
  if (!std::isfinite(out.value())) throw NonFiniteLoss("loss is not finite");
  return tape.gradient(out);
}

}  // namespace liqport::numerics
