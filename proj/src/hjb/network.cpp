#include "liqport/hjb/network.hpp"

#include <algorithm>
#include <limits>
#include <random>

#include "liqport/numerics/random.hpp"

namespace liqport::hjb {

Mlp::Mlp(int hidden, OutputActivation out) : hidden_(hidden), out_(out) {
  if (hidden < 1) throw std::invalid_argument("hidden width must be >= 1");
  theta_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(size_for(hidden)));
}

void Mlp::set_theta(const Eigen::VectorXd& t) {
  if (t.size() != theta_.size()) throw std::invalid_argument("parameter vector has the wrong length");
  theta_ = t;
}

Mlp init_mlp(int hidden, OutputActivation out, std::uint64_t seed, double amplitude) {
  Mlp m(hidden, out);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-amplitude, amplitude);
  for (Eigen::Index i = 0; i < m.theta().size(); ++i) m.theta()(i) = u(rng);
  return m;
}

std::array<double, 2> Domain::range(int input) const {
  switch (input) {
    case kInW: return W;
    case kInV: return v;
    case kInTheta: return theta;
    case kInL: return L;
    case kInT: return {0.0, T};
    default: throw std::invalid_argument("input index out of range");
  }
}

void Domain::validate() const {
  for (int d = 0; d < kInputs; ++d) {
    const auto r = range(d);
    if (!(r[0] <= r[1]) || !std::isfinite(r[0]) || !std::isfinite(r[1]))
      throw std::invalid_argument("domain ranges must be finite with lower <= upper");
  }
  if (!(T > 0.0)) throw std::invalid_argument("domain horizon T must be > 0");
  if (W[0] < 0.0 || v[0] < 0.0 || theta[0] < 0.0) throw std::invalid_argument("W, v and theta ranges must be >= 0");
}

bool Domain::contains(const State& x) const {
  for (int d = 0; d < kInputs; ++d) {
    const auto r = range(d);
    if (x[d] < r[0] || x[d] > r[1]) return false;
  }
  return true;
}

InputScaling Domain::scaling() const {
  InputScaling s;
  for (int d = 0; d < kInputs; ++d) {
    const auto r = range(d);
    s.center[d] = 0.5 * (r[0] + r[1]);
    s.scale[d] = r[1] > r[0] ? 0.5 * (r[1] - r[0]) : 1.0;
  }
  return s;
}

Domain Domain::merton(double v, double T) {
  Domain d;
  d.v = {v, v};
  d.theta = {v, v};
  d.L = {0.0, 0.0};
  d.T = T;
  return d;
}

NetworkParams init_networks(const Domain& domain, int hidden, std::uint64_t seed, double amplitude) {
  domain.validate();
  NetworkParams n;
  n.domain = domain;
  n.scaling = domain.scaling();
  n.value = init_mlp(hidden, OutputActivation::identity, numerics::substream_seed(seed, 0), amplitude);
  n.policy = init_mlp(hidden, OutputActivation::sigmoid, numerics::substream_seed(seed, 1), amplitude);
  return n;
}

double value_net(const NetworkParams& n, const State& x) {
  return mlp_forward<double>(n.value, n.scaling, std::span<const double>(x.data(), x.size()));
}

double policy_net(const NetworkParams& n, const State& x) {
  const double w = mlp_forward<double>(n.policy, n.scaling, std::span<const double>(x.data(), x.size()));
  return std::clamp(w, std::numeric_limits<double>::min(), std::nextafter(1.0, 0.0));
}

bool extrapolated(const NetworkParams& n, const State& x) { return !n.domain.contains(x); }

Eigen::RowVectorXd mlp_batch(const Mlp& m, const InputScaling& sc, const StateBatch& X) {
  Eigen::MatrixXd xs(kInputs, X.cols());
  for (int d = 0; d < kInputs; ++d) xs.row(d) = (X.row(d).array() - sc.center[d]) / sc.scale[d];
  Eigen::MatrixXd h = m.W1() * xs;
  h.colwise() += m.b1();
  h = h.array().tanh().matrix();
  Eigen::MatrixXd h2 = m.W2() * h;
  h2.colwise() += m.b2();
  h2 = h2.array().tanh().matrix();
  Eigen::RowVectorXd y = (m.w3().transpose() * h2).array() + m.b3();
  if (m.output() == OutputActivation::sigmoid) {
    y = (1.0 / (1.0 + (-y.array()).exp())).matrix();
    y = y.cwiseMax(std::numeric_limits<double>::min()).cwiseMin(std::nextafter(1.0, 0.0));
  }
  return y;
}

}  // namespace liqport::hjb
