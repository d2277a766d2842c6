#include "liqport/numerics/tape.hpp"

#include <cmath>

#include "liqport/numerics/hyperdual.hpp"

namespace liqport::numerics {

namespace {
constexpr std::uint32_t kNone = 0xffffffffu;
}

double Var::value() const {
  if (!tape_) throw std::logic_error("Var is not attached to a tape");
  return tape_->value(*this);
}

Var Tape::push(Op op, std::uint32_t a, std::uint32_t b, double c, double value) {
  nodes_.push_back(Node{op, a, b, c, value});
  return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

void Tape::check(const Var& v) const {
  if (v.tape_ != this || v.index_ >= nodes_.size())
    throw std::invalid_argument("Var belongs to a different tape");
}

Var Tape::variable(double value) {
  Var v = push(Op::leaf, kNone, kNone, 0.0, value);
  leaves_.push_back(v.index_);
  return v;
}

Var Tape::constant(double value) { return push(Op::constant, kNone, kNone, value, value); }

double Tape::evaluate(Op op, double a, double b, double c) {
  switch (op) {
    case Op::add: return a + b;
    case Op::sub: return a - b;
    case Op::mul: return a * b;
    case Op::div: return a / b;
    case Op::neg: return -a;
    case Op::add_c: return a + c;
    case Op::mul_c: return a * c;
    case Op::exp: return std::exp(a);
    case Op::log: return std::log(a);
    case Op::tanh: return std::tanh(a);
    case Op::sqrt: return std::sqrt(a);
    case Op::pow_c: return std::pow(a, c);
    case Op::sigmoid: return sigmoid(a);
    case Op::square: return a * a;
    case Op::leaf:
    case Op::constant: break;
  }
  return c;
}

Var Tape::unary(Op op, const Var& a, double c) {
  check(a);
  return push(op, a.index_, kNone, c, evaluate(op, nodes_[a.index_].value, 0.0, c));
}

Var Tape::binary(Op op, const Var& a, const Var& b) {
  check(a);
  check(b);
  return push(op, a.index_, b.index_, 0.0,
              evaluate(op, nodes_[a.index_].value, nodes_[b.index_].value, 0.0));
}

Eigen::VectorXd Tape::gradient(const Var& output) const {
  check(output);
  std::vector<double> adj(output.index_ + 1, 0.0);
  adj[output.index_] = 1.0;
  for (std::int64_t i = output.index_; i >= 0; --i) {
    const Node& n = nodes_[static_cast<std::size_t>(i)];
    const double g = adj[static_cast<std::size_t>(i)];
    if (g == 0.0) continue;
    const double va = n.a != kNone ? nodes_[n.a].value : 0.0;
    const double vb = n.b != kNone ? nodes_[n.b].value : 0.0;
    switch (n.op) {
      case Op::leaf:
      case Op::constant: break;
      case Op::add: adj[n.a] += g; adj[n.b] += g; break;
      case Op::sub: adj[n.a] += g; adj[n.b] -= g; break;
      case Op::mul: adj[n.a] += g * vb; adj[n.b] += g * va; break;
      case Op::div: adj[n.a] += g / vb; adj[n.b] -= g * n.value / vb; break;
      case Op::neg: adj[n.a] -= g; break;
      case Op::add_c: adj[n.a] += g; break;
      case Op::mul_c: adj[n.a] += g * n.c; break;
      case Op::exp: adj[n.a] += g * n.value; break;
      case Op::log: adj[n.a] += g / va; break;
      case Op::tanh: adj[n.a] += g * (1.0 - n.value * n.value); break;
      case Op::sqrt: adj[n.a] += g * 0.5 / n.value; break;
      case Op::pow_c: adj[n.a] += g * n.c * std::pow(va, n.c - 1.0); break;
      case Op::sigmoid: adj[n.a] += g * n.value * (1.0 - n.value); break;
      case Op::square: adj[n.a] += g * 2.0 * va; break;
    }
  }
  Eigen::VectorXd out(static_cast<Eigen::Index>(leaves_.size()));
  for (std::size_t k = 0; k < leaves_.size(); ++k)
    out(static_cast<Eigen::Index>(k)) = leaves_[k] <= output.index_ ? adj[leaves_[k]] : 0.0;
  return out;
}

double Tape::replay(std::span<const double> leaf_values, const Var& output) {
  check(output);
  if (leaf_values.size() != leaves_.size())
    throw std::invalid_argument("replay: leaf count mismatch");
  std::size_t next_leaf = 0;
  for (Node& n : nodes_) {
    if (n.op == Op::leaf) {
      n.value = leaf_values[next_leaf++];
    } else if (n.op != Op::constant) {
      const double va = n.a != kNone ? nodes_[n.a].value : 0.0;
      const double vb = n.b != kNone ? nodes_[n.b].value : 0.0;
      n.value = evaluate(n.op, va, vb, n.c);
    }
  }
  return nodes_[output.index_].value;
}

void Tape::clear() {
  nodes_.clear();
  leaves_.clear();
}

Var operator+(const Var& a, const Var& b) { return a.tape()->binary(Tape::Op::add, a, b); }
Var operator-(const Var& a, const Var& b) { return a.tape()->binary(Tape::Op::sub, a, b); }
Var operator*(const Var& a, const Var& b) { return a.tape()->binary(Tape::Op::mul, a, b); }
Var operator/(const Var& a, const Var& b) { return a.tape()->binary(Tape::Op::div, a, b); }
Var operator-(const Var& a) { return a.tape()->unary(Tape::Op::neg, a); }
Var operator+(const Var& a, double c) { return a.tape()->unary(Tape::Op::add_c, a, c); }
Var operator+(double c, const Var& a) { return a + c; }
Var operator-(const Var& a, double c) { return a + (-c); }
Var operator-(double c, const Var& a) { return (-a) + c; }
Var operator*(const Var& a, double c) { return a.tape()->unary(Tape::Op::mul_c, a, c); }
Var operator*(double c, const Var& a) { return a * c; }
Var operator/(const Var& a, double c) { return a * (1.0 / c); }
Var exp(const Var& a) { return a.tape()->unary(Tape::Op::exp, a); }
Var log(const Var& a) { return a.tape()->unary(Tape::Op::log, a); }
Var tanh(const Var& a) { return a.tape()->unary(Tape::Op::tanh, a); }
Var sqrt(const Var& a) { return a.tape()->unary(Tape::Op::sqrt, a); }
Var pow(const Var& a, double p) { return a.tape()->unary(Tape::Op::pow_c, a, p); }
Var sigmoid(const Var& a) { return a.tape()->unary(Tape::Op::sigmoid, a); }
Var square(const Var& a) { return a.tape()->unary(Tape::Op::square, a); }

}  // namespace liqport::numerics
