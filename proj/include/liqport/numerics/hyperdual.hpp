#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace liqport::numerics {

inline constexpr std::size_t kMaxDirections = 6;

/// Raised when a function touches a primitive with no derivative rule.
class UnsupportedPrimitive : public std::domain_error {
 public:
  explicit UnsupportedPrimitive(const std::string& name)
      : std::domain_error("unsupported primitive: " + name), name_(name) {}
  const std::string& primitive() const noexcept { return name_; }

 private:
  std::string name_;
};

/// Raised when a value, gradient or Hessian entry comes out NaN or infinite.
class NonFiniteDerivative : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Scalar carrying a value, its gradient and its (packed, symmetric) Hessian
/// over up to kMaxDirections active input directions.
///
/// Constants have zero active directions and mix freely with variables; the
/// result of a binary operation carries the larger direction count.
class HyperDual {
 public:
  HyperDual() = default;
  HyperDual(double value) : value_(value) {}  // NOLINT: implicit constant

  static HyperDual variable(double value, std::size_t direction,
                            std::size_t n_directions);

  double value() const noexcept { return value_; }
  std::size_t directions() const noexcept { return n_; }
  double d(std::size_t i) const noexcept { return i < n_ ? grad_[i] : 0.0; }
  double dd(std::size_t i, std::size_t j) const noexcept {
    return (i < n_ && j < n_) ? hess_[packed(i, j)] : 0.0;
  }

  HyperDual& operator+=(const HyperDual& o);
  HyperDual& operator-=(const HyperDual& o);
  HyperDual& operator*=(const HyperDual& o);
  HyperDual& operator/=(const HyperDual& o);

  /// f(a) given f, f', f'' evaluated at a.value().
  friend HyperDual chain(const HyperDual& a, double f, double df, double d2f);

  friend HyperDual operator-(const HyperDual& a);
  friend HyperDual operator*(const HyperDual& a, const HyperDual& b);

 private:
  static constexpr std::size_t packed(std::size_t i, std::size_t j) noexcept {
    if (i > j) std::swap(i, j);
    return i * kMaxDirections - i * (i + 1) / 2 + j;
  }
  static constexpr std::size_t kPacked = kMaxDirections * (kMaxDirections + 1) / 2;

  double value_ = 0.0;
  std::size_t n_ = 0;
  std::array<double, kMaxDirections> grad_{};
  std::array<double, kPacked> hess_{};
};

HyperDual chain(const HyperDual& a, double f, double df, double d2f);
HyperDual operator-(const HyperDual& a);
HyperDual operator*(const HyperDual& a, const HyperDual& b);

inline HyperDual operator+(HyperDual a, const HyperDual& b) { return a += b; }
inline HyperDual operator-(HyperDual a, const HyperDual& b) { return a -= b; }
inline HyperDual operator/(HyperDual a, const HyperDual& b) { return a /= b; }

HyperDual exp(const HyperDual& a);
HyperDual log(const HyperDual& a);
HyperDual tanh(const HyperDual& a);
HyperDual sqrt(const HyperDual& a);
HyperDual pow(const HyperDual& a, double p);
HyperDual pow(const HyperDual& a, const HyperDual& b);
HyperDual sigmoid(const HyperDual& a);
HyperDual reciprocal(const HyperDual& a);

// Non-smooth primitives have no derivative rule; calling them throws.
HyperDual abs(const HyperDual& a);
HyperDual floor(const HyperDual& a);
HyperDual ceil(const HyperDual& a);
HyperDual round(const HyperDual& a);

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

struct InputDerivatives {
  double value = 0.0;
  Eigen::VectorXd gradient;  // over the active set, in the order given
  Eigen::MatrixXd hessian;   // exactly symmetric
};

/// Evaluates f at x with exact first and second derivatives over `active`.
///
/// `f` is any callable taking std::span<const HyperDual> (all inputs, with the
/// inactive ones seeded as constants) and returning a HyperDual.
template <class F>
InputDerivatives eval_with_input_derivs(F&& f, std::span<const double> x,
                                        std::span<const std::size_t> active);

namespace detail {
InputDerivatives extract(const HyperDual& y, std::size_t n_active);
std::vector<HyperDual> seed(std::span<const double> x,
                            std::span<const std::size_t> active);
}  // namespace detail

template <class F>
InputDerivatives eval_with_input_derivs(F&& f, std::span<const double> x,
                                        std::span<const std::size_t> active) {
  const std::vector<HyperDual> inputs = detail::seed(x, active);
  const HyperDual y = f(std::span<const HyperDual>(inputs));
  return detail::extract(y, active.size());
}

}  // namespace liqport::numerics
