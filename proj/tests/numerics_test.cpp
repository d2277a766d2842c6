#include <cmath>
#include <functional>
#include <random>
#include <type_traits>
#include <vector>

#include <gtest/gtest.h>

#include "liqport/numerics/hyperdual.hpp"
#include "liqport/numerics/optimize.hpp"
#include "liqport/numerics/tape.hpp"
#include "test_support.hpp"

namespace nx = liqport::numerics;
using nx::HyperDual;

namespace {

using liqport::testing::RandomExpr;

double fd_first(const std::function<double(std::vector<double>)>& f, std::vector<double> x,
                std::size_t i, double h) {
  x[i] += h;
  const double up = f(x);
  x[i] -= 2 * h;
  return (up - f(x)) / (2 * h);
}

}  // namespace

TEST(HyperDual, SquareAtThree) {
  const std::vector<double> x{3.0};
  const std::vector<std::size_t> active{0};
  auto r = nx::eval_with_input_derivs(
      [](std::span<const HyperDual> v) { return v[0] * v[0]; }, x, active);
  EXPECT_DOUBLE_EQ(r.value, 9.0);
  EXPECT_DOUBLE_EQ(r.gradient(0), 6.0);
  EXPECT_DOUBLE_EQ(r.hessian(0, 0), 2.0);
}

TEST(HyperDual, BilinearOffDiagonal) {
  const std::vector<double> x{2.0, 5.0};
  const std::vector<std::size_t> active{0, 1};
  auto r = nx::eval_with_input_derivs(
      [](std::span<const HyperDual> v) { return v[0] * v[1]; }, x, active);
  EXPECT_DOUBLE_EQ(r.hessian(0, 1), 1.0);
  EXPECT_DOUBLE_EQ(r.hessian(1, 0), 1.0);
  EXPECT_DOUBLE_EQ(r.hessian(0, 0), 0.0);
}

TEST(HyperDual, TanhMatchesFiniteDifference) {
  const std::vector<double> x{0.5};
  const std::vector<std::size_t> active{0};
  auto r = nx::eval_with_input_derivs(
      [](std::span<const HyperDual> v) { return nx::tanh(v[0]); }, x, active);
  const double t = std::tanh(0.5);
  EXPECT_NEAR(r.gradient(0), 1.0 - t * t, 1e-15);
  const double h = 1e-5;
  const double fd = (std::tanh(0.5 + h) - std::tanh(0.5 - h)) / (2 * h);
  EXPECT_LT(std::abs(r.gradient(0) - fd), 1e-8);
}

TEST(HyperDual, InactiveInputsAreConstants) {
  const std::vector<double> x{2.0, 3.0, 4.0};
  const std::vector<std::size_t> active{2};
  auto r = nx::eval_with_input_derivs(
      [](std::span<const HyperDual> v) { return v[0] * v[1] * v[2] * v[2]; }, x, active);
  EXPECT_DOUBLE_EQ(r.gradient(0), 2.0 * 3.0 * 8.0);
  EXPECT_DOUBLE_EQ(r.hessian(0, 0), 12.0);
}

TEST(HyperDual, UnsupportedPrimitiveIsNamed) {
  const std::vector<double> x{1.0};
  const std::vector<std::size_t> active{0};
  try {
    nx::eval_with_input_derivs([](std::span<const HyperDual> v) { return nx::abs(v[0]); }, x,
                               active);
    FAIL() << "expected UnsupportedPrimitive";
  } catch (const nx::UnsupportedPrimitive& e) {
    EXPECT_EQ(e.primitive(), "abs");
  }
}

TEST(HyperDual, NanIsFlagged) {
  const std::vector<double> x{-1.0};
  const std::vector<std::size_t> active{0};
  EXPECT_THROW(nx::eval_with_input_derivs(
                   [](std::span<const HyperDual> v) { return nx::log(v[0]); }, x, active),
               nx::NonFiniteDerivative);
}

TEST(HyperDual, RejectsEmptyActiveSet) {
  const std::vector<double> x{1.0};
  const std::vector<std::size_t> active;
  EXPECT_THROW(nx::eval_with_input_derivs(
                   [](std::span<const HyperDual> v) { return v[0]; }, x, active),
               std::invalid_argument);
}

TEST(HyperDual, LinearityOfDerivatives) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const RandomExpr f = RandomExpr::make(rng, 3, 8);
    const RandomExpr g = RandomExpr::make(rng, 3, 8);
    const double a = u(rng), b = u(rng);
    const std::vector<double> x{u(rng), u(rng), u(rng)};
    const std::vector<std::size_t> active{0, 1, 2};
    auto rf = nx::eval_with_input_derivs([&](auto v) { return f.eval<HyperDual>(v); }, x, active);
    auto rg = nx::eval_with_input_derivs([&](auto v) { return g.eval<HyperDual>(v); }, x, active);
    auto rs = nx::eval_with_input_derivs(
        [&](auto v) { return HyperDual(a) * f.eval<HyperDual>(v) + HyperDual(b) * g.eval<HyperDual>(v); },
        x, active);
    EXPECT_LT((rs.gradient - (a * rf.gradient + b * rg.gradient)).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((rs.hessian - (a * rf.hessian + b * rg.hessian)).cwiseAbs().maxCoeff(), 1e-12);
  }
}

// 100 random composed functions against central finite differences.
TEST(HyperDual, RandomCompositionsMatchFiniteDifferences) {
  const auto stats = liqport::testing::random_composition_check(100, 20240501);
  EXPECT_EQ(stats.failures, 0) << "worst relative error " << stats.worst;
  EXPECT_EQ(stats.symmetric, stats.total);
}

TEST(Tape, QuadraticGradientIsTheta) {
  const std::vector<double> theta{1.0, -2.0, 0.5};
  auto g = nx::grad_wrt_params(
      [](nx::Tape& tape, std::span<const nx::Var> p) {
        nx::Var s = tape.constant(0.0);
        for (const auto& v : p) s = s + nx::square(v);
        return s * 0.5;
      },
      theta);
  for (std::size_t i = 0; i < theta.size(); ++i) EXPECT_DOUBLE_EQ(g(static_cast<int>(i)), theta[i]);
}

TEST(Tape, ConstantLossHasZeroGradient) {
  const std::vector<double> theta{1.0, 2.0};
  auto g = nx::grad_wrt_params([](nx::Tape& tape, std::span<const nx::Var>) { return tape.constant(4.2); },
                               theta);
  EXPECT_EQ(g.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Tape, NonFiniteLossIsRejected) {
  const std::vector<double> theta{-1.0};
  EXPECT_THROW(nx::grad_wrt_params(
                   [](nx::Tape&, std::span<const nx::Var> p) { return nx::log(p[0]); }, theta),
               nx::NonFiniteLoss);
}

TEST(Tape, ReplayIsBitExactAndGradientOfSumIsSumOfGradients) {
  nx::Tape tape;
  nx::Var x = tape.variable(0.7), y = tape.variable(-0.3);
  nx::Var f = nx::tanh(x * y) + nx::exp(y);
  nx::Var g = nx::sqrt(x * x + 1.0) / (y + 2.0);
  nx::Var s = f + g;
  const double fv = f.value(), sv = s.value();
  const std::vector<double> leaves{0.7, -0.3};
  EXPECT_EQ(tape.replay(leaves, f), fv);
  EXPECT_EQ(s.value(), sv);
  const Eigen::VectorXd gs = tape.gradient(s);
  const Eigen::VectorXd gf = tape.gradient(f);
  const Eigen::VectorXd gg = tape.gradient(g);
  EXPECT_LT((gs - gf - gg).cwiseAbs().maxCoeff(), 1e-15);
  const std::vector<double> other{0.2, 0.4};
  EXPECT_NEAR(tape.replay(other, f), std::tanh(0.08) + std::exp(0.4), 1e-15);
}

// Three-layer tanh network, mean squared output over a small batch; gradient
// against central differences on every coordinate.
TEST(Tape, NetworkMseGradientMatchesFiniteDifferences) {
  const int in = 5, hidden = 18, batch = 6;
  const int n_params = hidden * in + hidden + hidden * hidden + hidden + hidden + 1;
  ASSERT_GT(n_params, 450);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  std::vector<double> theta(static_cast<std::size_t>(n_params));
  for (auto& t : theta) t = u(rng);
  std::vector<std::vector<double>> xs(batch, std::vector<double>(in));
  for (auto& x : xs)
    for (auto& v : x) v = u(rng) * 2;

  auto net = [&](auto p, const std::vector<double>& x) {
    using S = std::remove_cv_t<typename decltype(p)::element_type>;
    using std::tanh;
    std::size_t k = 0;
    std::vector<S> h1, h2;
    for (int i = 0; i < hidden; ++i) {
      S a = p[k++] * x[0];
      for (int j = 1; j < in; ++j) a = a + p[k++] * x[static_cast<std::size_t>(j)];
      h1.push_back(tanh(a + p[k++]));
    }
    for (int i = 0; i < hidden; ++i) {
      S a = p[k++] * h1[0];
      for (int j = 1; j < hidden; ++j) a = a + p[k++] * h1[static_cast<std::size_t>(j)];
      h2.push_back(tanh(a + p[k++]));
    }
    S out = p[k++] * h2[0];
    for (int j = 1; j < hidden; ++j) out = out + p[k++] * h2[static_cast<std::size_t>(j)];
    return out + p[k++];
  };
  auto loss_d = [&](const std::vector<double>& p) {
    double s = 0;
    for (const auto& x : xs) {
      const double o = net(std::span<const double>(p), x);
      s += o * o;
    }
    return s / batch;
  };
  const Eigen::VectorXd g = nx::grad_wrt_params(
      [&](nx::Tape& tape, std::span<const nx::Var> p) {
        nx::Var s = tape.constant(0.0);
        for (const auto& x : xs) s = s + nx::square(net(p, x));
        return s / static_cast<double>(batch);
      },
      theta);
  double worst = 0.0;
  for (int i = 0; i < n_params; ++i) {
    const double fd = fd_first(loss_d, theta, static_cast<std::size_t>(i), 1e-6);
    const double err = std::abs(g(i) - fd) / std::max(std::abs(fd), 1e-4);
    worst = std::max(worst, err);
  }
  EXPECT_LT(worst, 1e-4);
}

TEST(Minimize, OneDimensionalQuadratic) {
  nx::OptimizerConfig cfg;
  cfg.learning_rate = 1.0;
  cfg.gradient_tolerance = 1e-12;
  auto res = nx::minimize(
      [](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
        g(0) = 2 * (x(0) - 3);
        return (x(0) - 3) * (x(0) - 3);
      },
      Eigen::VectorXd::Zero(1), cfg);
  EXPECT_NEAR(res.x(0), 3.0, 1e-8);
}

namespace {
double rosenbrock(const Eigen::VectorXd& x, Eigen::VectorXd& g) {
  const double a = 1 - x(0), b = x(1) - x(0) * x(0);
  g(0) = -2 * a - 400 * x(0) * b;
  g(1) = 200 * b;
  return a * a + 100 * b * b;
}
}  // namespace

TEST(Minimize, RosenbrockLbfgsArmijo) {
  nx::OptimizerConfig cfg;
  cfg.learning_rate = 1.0;
  cfg.max_iter = 2000;
  cfg.gradient_tolerance = 1e-10;
  Eigen::VectorXd x0(2);
  x0 << -1.2, 1.0;
  auto res = nx::minimize(rosenbrock, x0, cfg);
  EXPECT_NEAR(res.x(0), 1.0, 1e-5);
  EXPECT_NEAR(res.x(1), 1.0, 1e-5);
  for (std::size_t i = 1; i < res.trace.size(); ++i) EXPECT_LE(res.trace[i], res.trace[i - 1]);
}

TEST(Minimize, RosenbrockStrongWolfeAndBfgs) {
  Eigen::VectorXd x0(2);
  x0 << -1.2, 1.0;
  for (auto method : {nx::Method::lbfgs, nx::Method::bfgs}) {
    nx::OptimizerConfig cfg;
    cfg.method = method;
    cfg.learning_rate = 1.0;
    cfg.max_iter = 2000;
    cfg.gradient_tolerance = 1e-10;
    cfg.line_search = nx::LineSearch::strong_wolfe;
    auto res = nx::minimize(rosenbrock, x0, cfg);
    EXPECT_NEAR(res.x(0), 1.0, 1e-5);
    EXPECT_NEAR(res.x(1), 1.0, 1e-5);
  }
}

TEST(Minimize, PaperDefaultStepStillConverges) {
  nx::OptimizerConfig cfg;  // learning rate 0.1, Armijo
  cfg.max_iter = 5000;
  cfg.gradient_tolerance = 1e-9;
  Eigen::VectorXd x0(2);
  x0 << -1.2, 1.0;
  auto res = nx::minimize(rosenbrock, x0, cfg);
  EXPECT_NEAR(res.x(0), 1.0, 1e-4);
  for (std::size_t i = 1; i < res.trace.size(); ++i) EXPECT_LE(res.trace[i], res.trace[i - 1]);
}

TEST(Minimize, ConfigValidation) {
  nx::OptimizerConfig cfg;
  cfg.learning_rate = 0.0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = {};
  cfg.memory = 0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = {};
  cfg.gradient_tolerance = -1;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
}

TEST(Minimize, LineSearchFailureReturnsBestPoint) {
  // Objective whose gradient points the wrong way: no step can decrease f.
  nx::OptimizerConfig cfg;
  cfg.max_line_search_steps = 5;
  auto res = nx::minimize(
      [](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
        g(0) = -1.0;
        return x(0) * x(0) + 1.0;
      },
      Eigen::VectorXd::Zero(1), cfg);
  EXPECT_TRUE(res.line_search_failed);
  EXPECT_DOUBLE_EQ(res.f, 1.0);
}

// AR(1) Gaussian likelihood on data from a known generator.
TEST(Minimize, Ar1LikelihoodRecoversRho) {
  std::mt19937_64 rng(2024);
  std::normal_distribution<double> z;
  const int n = 200;
  std::vector<double> y(n);
  y[0] = z(rng) / std::sqrt(1 - 0.09);
  for (int t = 1; t < n; ++t) y[t] = 0.3 * y[t - 1] + z(rng);
  nx::Objective obj = [&](const Eigen::VectorXd& p, Eigen::VectorXd& g) {
    nx::Tape tape;
    const nx::Var mu = tape.variable(p(0)), ls2 = tape.variable(p(1)), ar = tape.variable(p(2));
    const nx::Var s2 = nx::exp(ls2), rho = nx::tanh(ar);
    nx::Var acc = tape.constant(0.0);
    for (int t = 1; t < n; ++t) {
      nx::Var e = (y[t] - mu) - rho * (y[t - 1] - mu);
      acc = acc + nx::square(e) / s2;
    }
    nx::Var out = 0.5 * acc + 0.5 * (n - 1) * nx::log(s2);
    g = tape.gradient(out);
    return out.value();
  };
  nx::OptimizerConfig cfg;
  cfg.learning_rate = 1.0;
  cfg.max_iter = 200;
  auto res = nx::minimize(obj, Eigen::VectorXd::Zero(3), cfg);
  EXPECT_NEAR(std::tanh(res.x(2)), 0.3, 0.1);
  EXPECT_NEAR(res.x(0), 0.0, 0.3);
}
