#include "liqport/numerics/hyperdual.hpp"

#include <algorithm>
#include <cmath>

namespace liqport::numerics {

HyperDual HyperDual::variable(double value, std::size_t direction,
                              std::size_t n_directions) {
  if (n_directions == 0 || n_directions > kMaxDirections)
    throw std::invalid_argument("HyperDual: direction count must be in [1, 6]");
  if (direction >= n_directions)
    throw std::invalid_argument("HyperDual: direction index out of range");
  HyperDual x(value);
  x.n_ = n_directions;
  x.grad_[direction] = 1.0;
  return x;
}

HyperDual& HyperDual::operator+=(const HyperDual& o) {
  value_ += o.value_;
  n_ = std::max(n_, o.n_);
  for (std::size_t i = 0; i < o.n_; ++i) grad_[i] += o.grad_[i];
  for (std::size_t i = 0; i < o.n_; ++i)
    for (std::size_t j = i; j < o.n_; ++j) hess_[packed(i, j)] += o.hess_[packed(i, j)];
  return *this;
}

HyperDual& HyperDual::operator-=(const HyperDual& o) {
  value_ -= o.value_;
  n_ = std::max(n_, o.n_);
  for (std::size_t i = 0; i < o.n_; ++i) grad_[i] -= o.grad_[i];
  for (std::size_t i = 0; i < o.n_; ++i)
    for (std::size_t j = i; j < o.n_; ++j) hess_[packed(i, j)] -= o.hess_[packed(i, j)];
  return *this;
}

HyperDual& HyperDual::operator*=(const HyperDual& o) { return *this = *this * o; }

HyperDual& HyperDual::operator/=(const HyperDual& o) {
  return *this = *this * reciprocal(o);
}

HyperDual operator*(const HyperDual& a, const HyperDual& b) {
  HyperDual r;
  r.value_ = a.value_ * b.value_;
  r.n_ = std::max(a.n_, b.n_);
  for (std::size_t i = 0; i < r.n_; ++i)
    r.grad_[i] = a.grad_[i] * b.value_ + a.value_ * b.grad_[i];
  for (std::size_t i = 0; i < r.n_; ++i) {
    for (std::size_t j = i; j < r.n_; ++j) {
      const std::size_t k = HyperDual::packed(i, j);
      r.hess_[k] = a.hess_[k] * b.value_ + a.grad_[i] * b.grad_[j] +
                   a.grad_[j] * b.grad_[i] + a.value_ * b.hess_[k];
    }
  }
  return r;
}

HyperDual operator-(const HyperDual& a) {
  HyperDual r = a;
  r.value_ = -a.value_;
  for (auto& g : r.grad_) g = -g;
  for (auto& h : r.hess_) h = -h;
  return r;
}

HyperDual chain(const HyperDual& a, double f, double df, double d2f) {
  HyperDual r;
  r.value_ = f;
  r.n_ = a.n_;
  for (std::size_t i = 0; i < a.n_; ++i) r.grad_[i] = df * a.grad_[i];
  for (std::size_t i = 0; i < a.n_; ++i) {
    for (std::size_t j = i; j < a.n_; ++j) {
      const std::size_t k = HyperDual::packed(i, j);
      r.hess_[k] = d2f * a.grad_[i] * a.grad_[j] + df * a.hess_[k];
    }
  }
  return r;
}

HyperDual exp(const HyperDual& a) {
  const double e = std::exp(a.value());
  return chain(a, e, e, e);
}

HyperDual log(const HyperDual& a) {
  const double x = a.value();
  return chain(a, std::log(x), 1.0 / x, -1.0 / (x * x));
}

HyperDual tanh(const HyperDual& a) {
  const double t = std::tanh(a.value());
  const double s = 1.0 - t * t;
  return chain(a, t, s, -2.0 * t * s);
}

HyperDual sqrt(const HyperDual& a) {
  const double s = std::sqrt(a.value());
  return chain(a, s, 0.5 / s, -0.25 / (s * a.value()));
}

HyperDual pow(const HyperDual& a, double p) {
  const double x = a.value();
  return chain(a, std::pow(x, p), p * std::pow(x, p - 1.0),
               p * (p - 1.0) * std::pow(x, p - 2.0));
}

HyperDual pow(const HyperDual& a, const HyperDual& b) { return exp(b * log(a)); }

HyperDual sigmoid(const HyperDual& a) {
  const double s = sigmoid(a.value());
  const double ds = s * (1.0 - s);
  return chain(a, s, ds, ds * (1.0 - 2.0 * s));
}

HyperDual reciprocal(const HyperDual& a) {
  const double x = a.value();
  return chain(a, 1.0 / x, -1.0 / (x * x), 2.0 / (x * x * x));
}

HyperDual abs(const HyperDual&) { throw UnsupportedPrimitive("abs"); }
HyperDual floor(const HyperDual&) { throw UnsupportedPrimitive("floor"); }
HyperDual ceil(const HyperDual&) { throw UnsupportedPrimitive("ceil"); }
HyperDual round(const HyperDual&) { throw UnsupportedPrimitive("round"); }

namespace detail {

std::vector<HyperDual> seed(std::span<const double> x,
                            std::span<const std::size_t> active) {
  if (active.empty()) throw std::invalid_argument("active direction set is empty");
  if (active.size() > kMaxDirections)
    throw std::invalid_argument("at most 6 active directions are supported");
  std::vector<HyperDual> in(x.begin(), x.end());
  for (std::size_t k = 0; k < active.size(); ++k) {
    if (active[k] >= x.size()) throw std::invalid_argument("active index out of range");
    for (std::size_t m = 0; m < k; ++m)
      if (active[m] == active[k]) throw std::invalid_argument("duplicate active index");
    in[active[k]] = HyperDual::variable(x[active[k]], k, active.size());
  }
  return in;
}

InputDerivatives extract(const HyperDual& y, std::size_t n_active) {
  InputDerivatives out;
  out.value = y.value();
  out.gradient.resize(static_cast<Eigen::Index>(n_active));
  out.hessian.resize(static_cast<Eigen::Index>(n_active),
                     static_cast<Eigen::Index>(n_active));
  bool finite = std::isfinite(out.value);
  for (std::size_t i = 0; i < n_active; ++i) {
    out.gradient(static_cast<Eigen::Index>(i)) = y.d(i);
    finite = finite && std::isfinite(y.d(i));
    for (std::size_t j = 0; j < n_active; ++j) {
      out.hessian(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = y.dd(i, j);
      finite = finite && std::isfinite(y.dd(i, j));
    }
  }
  if (!finite) throw NonFiniteDerivative("non-finite value or derivative in evaluation");
  return out;
}

}  // namespace detail

}  // namespace liqport::numerics
