#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <vector>

#include <Eigen/Dense>

#include "liqport/hjb/collocation.hpp"
#include "liqport/hjb/jet.hpp"
#include "liqport/hjb/network.hpp"
#include "liqport/hjb/policy_iteration.hpp"
#include "liqport/hjb/report_io.hpp"
#include "liqport/hjb/residual.hpp"
#include "liqport/numerics/hyperdual.hpp"

using namespace liqport;
using namespace liqport::hjb;
using numerics::HyperDual;

namespace {

// Merton constant-volatility setup with omega* = 0.375.
constexpr double kGamma = 0.5, kR = 0.02, kMu = 0.05, kVar = 0.16;
constexpr double kGrowth = 0.0128125;  // (1 - g)(r + (mu - r)^2 / (2 g var))

double merton_value(double W, double t) { return std::pow(W, 1 - kGamma) / (1 - kGamma) * std::exp(kGrowth * (1 - t)); }

ChannelVector merton_derivatives(const market::MarketState& s) {
  const double e = std::exp(kGrowth * (1 - s.t));
  ChannelVector d{};
  d[kQt] = -kGrowth * merton_value(s.W, s.t);
  d[kQW] = std::pow(s.W, -kGamma) * e;
  d[kQWW] = -kGamma * std::pow(s.W, -kGamma - 1) * e;
  return d;
}

market::MarketState random_state(std::mt19937_64& rng, const Domain& d) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const auto pick = [&](std::array<double, 2> r) { return r[0] + (r[1] - r[0]) * u(rng); };
  return {pick(d.W), pick(d.v), pick(d.theta), pick(d.L), 0.02 + 0.96 * d.T * u(rng)};
}

StateBatch random_batch(std::mt19937_64& rng, const Domain& d, int n) {
  StateBatch X(kInputs, n);
  for (int i = 0; i < n; ++i) {
    const auto s = random_state(rng, d);
    X.col(i) << s.W, s.v, s.theta, s.L, s.t;
  }
  return X;
}

// HyperDual forward pass with all five inputs active.
HyperDual hyperdual_forward(const Mlp& m, const InputScaling& sc, const StateBatch& X, Eigen::Index i) {
  std::array<HyperDual, kInputs> x;
  for (int d = 0; d < kInputs; ++d) x[d] = HyperDual::variable(X(d, i), static_cast<std::size_t>(d), kInputs);
  return mlp_forward<HyperDual>(m, sc, std::span<const HyperDual>(x.data(), x.size()));
}

ChannelMask full_mask() {
  ChannelMask m;
  m.fill(true);
  return m;
}

SolverProblem merton_problem(std::size_t n_int, std::size_t n_term, std::uint64_t seed) {
  const Domain d = Domain::merton(kVar);
  return make_problem(sample_collocation(d, n_int, n_term, seed), market::ModelParams::merton(kR, kMu, 1.0),
                      utility::Power{kGamma});
}

SolverProblem full_problem(std::size_t n_int, std::size_t n_term, std::uint64_t seed) {
  return make_problem(sample_collocation(Domain{}, n_int, n_term, seed), market::ModelParams{},
                      utility::concavify(utility::SShaped{}));
}

}  // namespace

TEST(Network, ZeroParametersGiveZeroValueAndHalfPolicy) {
  NetworkParams n = init_networks(Domain{}, 8, 1);
  n.value.theta().setZero();
  n.policy.theta().setZero();
  for (const State& x : {State{1, 0.1, 0.2, 0.3, 0}, State{11, 0.5, 0.7, 0.9, 1}}) {
    EXPECT_EQ(value_net(n, x), 0.0);
    EXPECT_EQ(policy_net(n, x), 0.5);
  }
}

TEST(Network, PolicyStrictlyInsideUnitInterval) {
  NetworkParams n = init_networks(Domain{}, 16, 3, 40.0);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-50.0, 50.0);
  for (int i = 0; i < 2000; ++i) {
    const State x{u(rng), u(rng), u(rng), u(rng), u(rng)};
    const double w = policy_net(n, x);
    EXPECT_GT(w, 0.0);
    EXPECT_LT(w, 1.0);
    EXPECT_TRUE(std::isfinite(value_net(n, x)));
  }
}

TEST(Network, SeedDeterminesEveryOutputBitForBit) {
  const NetworkParams a = init_networks(Domain{}, 12, 99), b = init_networks(Domain{}, 12, 99);
  const NetworkParams c = init_networks(Domain{}, 12, 100);
  EXPECT_EQ(a.value.theta(), b.value.theta());
  EXPECT_EQ(a.policy.theta(), b.policy.theta());
  EXPECT_NE(a.value.theta(), c.value.theta());
  EXPECT_NE(a.value.theta(), a.policy.theta());
  const State x{5.5, 0.1, 0.2, 0.3, 0.5};
  EXPECT_EQ(value_net(a, x), value_net(b, x));
  EXPECT_EQ(policy_net(a, x), policy_net(b, x));
}

TEST(Network, InitialWeightsWithinAmplitude) {
  const NetworkParams n = init_networks(Domain{}, 10, 4);
  EXPECT_LE(n.value.theta().cwiseAbs().maxCoeff(), 0.1);
  EXPECT_LE(n.policy.theta().cwiseAbs().maxCoeff(), 0.1);
  EXPECT_EQ(n.value.size(), Mlp::size_for(10));
}

TEST(Network, RejectsWrongInputDimension) {
  const NetworkParams n = init_networks(Domain{}, 4, 1);
  const std::vector<double> x{1, 2, 3, 4};
  EXPECT_THROW(mlp_forward<double>(n.value, n.scaling, std::span<const double>(x)), std::invalid_argument);
  EXPECT_THROW(Mlp(0, OutputActivation::identity), std::invalid_argument);
  Mlp m(4, OutputActivation::identity);
  EXPECT_THROW(m.set_theta(Eigen::VectorXd::Zero(3)), std::invalid_argument);
}

TEST(Network, BatchForwardMatchesScalarForward) {
  const NetworkParams n = init_networks(Domain{}, 9, 7, 0.7);
  std::mt19937_64 rng(8);
  const StateBatch X = random_batch(rng, Domain{}, 50);
  const Eigen::RowVectorXd v = mlp_batch(n.value, n.scaling, X), p = mlp_batch(n.policy, n.scaling, X);
  for (int i = 0; i < 50; ++i) {
    const State x{X(0, i), X(1, i), X(2, i), X(3, i), X(4, i)};
    EXPECT_NEAR(v(i), value_net(n, x), 1e-13);
    EXPECT_NEAR(p(i), policy_net(n, x), 1e-13);
  }
}

TEST(Network, ExtrapolationIsFlaggedNotRefused) {
  const NetworkParams n = init_networks(Domain{}, 4, 1);
  EXPECT_FALSE(extrapolated(n, {5.5, 0.1, 0.2, 0.3, 0.5}));
  EXPECT_TRUE(extrapolated(n, {20.0, 0.1, 0.2, 0.3, 0.5}));
  EXPECT_TRUE(std::isfinite(value_net(n, {20.0, 0.1, 0.2, 0.3, 0.5})));
}

TEST(Domain, ValidationAndScaling) {
  Domain d;
  EXPECT_NO_THROW(d.validate());
  d.W = {3.0, 1.0};
  EXPECT_THROW(d.validate(), std::invalid_argument);
  d = Domain{};
  d.T = 0.0;
  EXPECT_THROW(d.validate(), std::invalid_argument);
  const Domain m = Domain::merton(kVar);
  EXPECT_TRUE(m.frozen(kInV));
  EXPECT_TRUE(m.frozen(kInL));
  EXPECT_FALSE(m.frozen(kInW));
  const InputScaling s = Domain{}.scaling();
  EXPECT_DOUBLE_EQ((12.0 - s.center[kInW]) / s.scale[kInW], 1.0);
  EXPECT_DOUBLE_EQ((0.5 - s.center[kInW]) / s.scale[kInW], -1.0);
  EXPECT_EQ(m.scaling().scale[kInV], 1.0);
}

TEST(Jet, MatchesHyperDualOnEveryChannel) {
  std::mt19937_64 rng(11);
  const Domain d;
  const Mlp m = init_mlp(7, OutputActivation::identity, 21, 0.9);
  const InputScaling sc = d.scaling();
  const StateBatch X = random_batch(rng, d, 9);
  const ChannelMask mask = full_mask();
  const JetSpec spec = jet_spec_for(mask);
  const auto rows = channel_rows(spec, mask);
  MlpJet jet;
  jet.forward(m, sc, X, spec);
  for (Eigen::Index i = 0; i < X.cols(); ++i) {
    const HyperDual h = hyperdual_forward(m, sc, X, i);
    EXPECT_NEAR(jet.output().value(i), h.value(), 1e-12);
    for (std::size_t f = 0; f < spec.first.size(); ++f)
      EXPECT_NEAR(jet.output().first(static_cast<Eigen::Index>(f), i), h.d(static_cast<std::size_t>(spec.first[f])),
                  1e-11 * (1 + std::abs(h.d(static_cast<std::size_t>(spec.first[f])))));
    for (std::size_t p = 0; p < spec.second.size(); ++p) {
      const double ref = h.dd(static_cast<std::size_t>(spec.second[p][0]), static_cast<std::size_t>(spec.second[p][1]));
      EXPECT_NEAR(jet.output().second(static_cast<Eigen::Index>(p), i), ref, 1e-10 * (1 + std::abs(ref)));
    }
  }
  for (int c = 0; c < kChannels; ++c) EXPECT_GE(rows[c], 0);
}

TEST(Jet, PartialSpecMatchesFullSpec) {
  std::mt19937_64 rng(12);
  const Domain d;
  const Mlp m = init_mlp(6, OutputActivation::identity, 2, 0.8);
  const StateBatch X = random_batch(rng, d, 6);
  ChannelMask partial{};
  partial[kQt] = partial[kQW] = partial[kQWW] = partial[kQWL] = true;
  const JetSpec ps = jet_spec_for(partial), fs = jet_spec_for(full_mask());
  const auto pr = channel_rows(ps, partial), fr = channel_rows(fs, full_mask());
  MlpJet a, b;
  a.forward(m, d.scaling(), X, ps);
  b.forward(m, d.scaling(), X, fs);
  const auto at = [](const MlpJet& j, const JetSpec& s, int row, Eigen::Index i) {
    const auto nf = static_cast<int>(s.first.size());
    return row < nf ? j.output().first(row, i) : j.output().second(row - nf, i);
  };
  for (int c : {kQt, kQW, kQWW, kQWL})
    for (Eigen::Index i = 0; i < X.cols(); ++i) EXPECT_NEAR(at(a, ps, pr[c], i), at(b, fs, fr[c], i), 1e-12);
  EXPECT_EQ(pr[kQvv], -1);
}

TEST(Jet, ParameterGradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(13);
  const Domain d;
  Mlp m = init_mlp(6, OutputActivation::identity, 5, 0.8);
  const StateBatch X = random_batch(rng, d, 7);
  const JetSpec spec = jet_spec_for(full_mask());
  const auto nf = static_cast<Eigen::Index>(spec.first.size()), ns = static_cast<Eigen::Index>(spec.second.size());
  std::normal_distribution<double> N(0.0, 1.0);
  Eigen::RowVectorXd dv(7);
  Eigen::MatrixXd df(nf, 7), dd(ns, 7);
  for (int i = 0; i < 7; ++i) dv(i) = N(rng);
  for (Eigen::Index r = 0; r < nf; ++r)
    for (int i = 0; i < 7; ++i) df(r, i) = N(rng);
  for (Eigen::Index r = 0; r < ns; ++r)
    for (int i = 0; i < 7; ++i) dd(r, i) = N(rng);
  const auto functional = [&](const Mlp& mm) {
    MlpJet j;
    j.forward(mm, d.scaling(), X, spec);
    return (dv.array() * j.output().value.array()).sum() + (df.array() * j.output().first.array()).sum() +
           (dd.array() * j.output().second.array()).sum();
  };
  MlpJet jet;
  jet.forward(m, d.scaling(), X, spec);
  Eigen::VectorXd g = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m.size()));
  jet.backward(dv, df, dd, g);
  for (Eigen::Index k = 0; k < g.size(); ++k) {
    const double h = 1e-6, keep = m.theta()(k);
    m.theta()(k) = keep + h;
    const double fp = functional(m);
    m.theta()(k) = keep - h;
    const double fm = functional(m);
    m.theta()(k) = keep;
    const double fd = (fp - fm) / (2 * h);
    EXPECT_NEAR(g(k), fd, 1e-5 * (1 + std::abs(fd))) << "parameter " << k;
  }
}

TEST(Jet, SigmoidValueGradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(14);
  const Domain d;
  Mlp m = init_mlp(5, OutputActivation::sigmoid, 6, 0.8);
  const StateBatch X = random_batch(rng, d, 5);
  const Eigen::RowVectorXd dv = Eigen::RowVectorXd::LinSpaced(5, -1.0, 2.0);
  const auto functional = [&](const Mlp& mm) { return (dv.array() * mlp_batch(mm, d.scaling(), X).array()).sum(); };
  MlpJet jet;
  jet.forward(m, d.scaling(), X, JetSpec{});
  Eigen::VectorXd g = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m.size()));
  jet.backward(dv, Eigen::MatrixXd(0, 5), Eigen::MatrixXd(0, 5), g);
  for (Eigen::Index k = 0; k < g.size(); ++k) {
    const double h = 1e-6, keep = m.theta()(k);
    m.theta()(k) = keep + h;
    const double fp = functional(m);
    m.theta()(k) = keep - h;
    const double fm = functional(m);
    m.theta()(k) = keep;
    EXPECT_NEAR(g(k), (fp - fm) / (2 * h), 1e-7);
  }
}

TEST(Jet, DerivativesOfSigmoidOutputRejected) {
  const Mlp m = init_mlp(3, OutputActivation::sigmoid, 1);
  StateBatch X = StateBatch::Ones(kInputs, 2);
  MlpJet jet;
  EXPECT_THROW(jet.forward(m, InputScaling{}, X, jet_spec_for(full_mask())), std::invalid_argument);
  JetSpec bad;
  bad.second.push_back({kInW, kInW});
  EXPECT_THROW(bad.validate(), std::invalid_argument);
}

TEST(Residual, ZeroNetworkGivesZeroResidual) {
  Mlp zero(8, OutputActivation::identity);
  std::mt19937_64 rng(15);
  const market::ModelParams p;
  for (int k = 0; k < 20; ++k) {
    const auto s = random_state(rng, Domain{});
    for (double w : {0.0, 0.3, 0.75, 1.0}) EXPECT_EQ(pde_residual(zero, Domain{}.scaling(), w, s, p), 0.0);
  }
}

TEST(Residual, MertonClosedFormSatisfiesEquation) {
  const market::ModelParams p = market::ModelParams::merton(kR, kMu, 1.0);
  std::mt19937_64 rng(16);
  const Domain d = Domain::merton(kVar);
  for (int k = 0; k < 200; ++k) {
    const auto s = random_state(rng, d);
    EXPECT_LT(std::abs(pde_residual(merton_derivatives(s), 0.375, s, p)), 1e-6);
  }
  // Any other allocation leaves a strictly negative residual.
  const market::MarketState s{5.0, kVar, kVar, 0.0, 0.5};
  EXPECT_LT(pde_residual(merton_derivatives(s), 0.2, s, p), -1e-4);
  EXPECT_NEAR(residual_quadratic(merton_derivatives(s), s, p).argmax(), 0.375, 1e-12);
}

TEST(Residual, QuadraticInAllocation) {
  const market::ModelParams p;
  std::mt19937_64 rng(17);
  const Mlp m = init_mlp(10, OutputActivation::identity, 9, 0.6);
  const InputScaling sc = Domain{}.scaling();
  const std::array<double, 5> ws{0.0, 0.2, 0.5, 0.8, 1.0};
  Eigen::Matrix<double, 5, 3> V;
  for (int j = 0; j < 5; ++j) V.row(j) << 1.0, ws[j], ws[j] * ws[j];
  for (int k = 0; k < 50; ++k) {
    const auto s = random_state(rng, Domain{});
    const ChannelVector dv = network_derivatives(m, sc, s);
    Eigen::Matrix<double, 5, 1> r;
    for (int j = 0; j < 5; ++j) r(j) = pde_residual(dv, ws[j], s, p);
    const Eigen::Vector3d c = V.colPivHouseholderQr().solve(r);
    EXPECT_LT((V * c - r).cwiseAbs().maxCoeff(), 1e-10);
    const OmegaQuadratic q = residual_quadratic(dv, s, p);
    for (int j = 0; j < 5; ++j) EXPECT_NEAR(q.at(ws[j]), r(j), 1e-10 * (1 + std::abs(r(j))));
  }
}

TEST(Residual, ParabolaArgmaxClipsToUnitInterval) {
  EXPECT_DOUBLE_EQ((OmegaQuadratic{0, 1, -1}).argmax(), 0.5);
  EXPECT_DOUBLE_EQ((OmegaQuadratic{0, 3, -1}).argmax(), 1.0);
  EXPECT_DOUBLE_EQ((OmegaQuadratic{0, -1, -1}).argmax(), 0.0);
  EXPECT_DOUBLE_EQ((OmegaQuadratic{0, -1, 3}).argmax(), 1.0);
  EXPECT_DOUBLE_EQ((OmegaQuadratic{0, 0.5, 0}).argmax(), 1.0);
}

TEST(Residual, MertonOperatorNeedsOnlyWealthAndTime) {
  const SolverProblem pr = merton_problem(50, 10, 1);
  for (int c = 0; c < kChannels; ++c) EXPECT_EQ(pr.ops.active[c], c == kQt || c == kQW || c == kQWW) << c;
  const SolverProblem full = full_problem(50, 10, 1);
  for (int c = 0; c < kChannels; ++c) EXPECT_TRUE(full.ops.active[c]) << c;
}

TEST(Collocation, FourToOneRatioAndTerminalTime) {
  const Domain d;
  const CollocationSet c = sample_collocation(d, 4000, 1000, 3);
  EXPECT_EQ(c.interior.cols(), 4000);
  EXPECT_EQ(c.terminal.cols(), 1000);
  EXPECT_DOUBLE_EQ(static_cast<double>(c.interior.cols()) / static_cast<double>(c.terminal.cols()), 4.0);
  for (Eigen::Index i = 0; i < c.terminal.cols(); ++i) {
    EXPECT_EQ(c.terminal(kInT, i), d.T);
    EXPECT_TRUE(d.contains({c.terminal(0, i), c.terminal(1, i), c.terminal(2, i), c.terminal(3, i), c.terminal(4, i)}));
  }
  for (Eigen::Index i = 0; i < c.interior.cols(); ++i) {
    EXPECT_GT(c.interior(kInT, i), 0.0);
    EXPECT_LT(c.interior(kInT, i), d.T);
    EXPECT_TRUE(d.contains({c.interior(0, i), c.interior(1, i), c.interior(2, i), c.interior(3, i), c.interior(4, i)}));
  }
  // Roughly uniform in wealth.
  EXPECT_NEAR(c.interior.row(kInW).mean(), 6.25, 0.25);
}

TEST(Collocation, SeedDeterminesPointSets) {
  const Domain d;
  const CollocationSet a = sample_collocation(d, 100, 25, 9), b = sample_collocation(d, 100, 25, 9);
  const CollocationSet c = sample_collocation(d, 100, 25, 10);
  EXPECT_EQ(a.interior, b.interior);
  EXPECT_EQ(a.terminal, b.terminal);
  EXPECT_NE(a.interior, c.interior);
  EXPECT_THROW(sample_collocation(d, 0, 25, 1), std::invalid_argument);
  EXPECT_THROW(sample_collocation(d, 10, 0, 1), std::invalid_argument);
}

TEST(Collocation, FrozenCoordinatesStayFixed) {
  const CollocationSet c = sample_collocation(Domain::merton(kVar), 200, 50, 2);
  EXPECT_TRUE((c.interior.row(kInV).array() == kVar).all());
  EXPECT_TRUE((c.interior.row(kInL).array() == 0.0).all());
}

TEST(Collocation, MonitoringGridShape) {
  const MonitoringGrid full = monitoring_grid(Domain{}, 5);
  EXPECT_EQ(full.points.cols(), 3125);
  const MonitoringGrid m = monitoring_grid(Domain::merton(kVar), 5);
  EXPECT_EQ(m.points.cols(), 25);
  int inner = 0;
  for (Eigen::Index i = 0; i < m.points.cols(); ++i)
    if (m.interior[static_cast<std::size_t>(i)]) {
      ++inner;
      EXPECT_GT(m.points(kInW, i), 0.5);
      EXPECT_LT(m.points(kInW, i), 12.0);
    }
  EXPECT_EQ(inner, 15);
  EXPECT_EQ(grid_nodes(0.0, 1.0, 5), (std::vector<double>{0.0, 0.25, 0.5, 0.75, 1.0}));
  EXPECT_THROW(monitoring_grid(Domain{}, 2), std::invalid_argument);
}

TEST(Loss, NonNegativeForRandomNetworks) {
  const SolverProblem pr = full_problem(300, 75, 4);
  for (std::uint64_t s = 0; s < 10; ++s) {
    const NetworkParams n = init_networks(Domain{}, 8, s, 0.5);
    const LossBreakdown l = evaluation_loss(n.value, n.scaling, interior_policy(n.policy, n.scaling, pr), pr);
    EXPECT_GE(l.pde, 0.0);
    EXPECT_GE(l.terminal, 0.0);
    EXPECT_DOUBLE_EQ(l.total, l.pde + l.terminal);
    EXPECT_EQ(l.excluded, 0u);
  }
}

TEST(Loss, MertonClosedFormWithOptimalPolicyIsNearZero) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const SolverProblem pr = merton_problem(2000, 500, seed);
    const LossBreakdown l = evaluation_loss([](const market::MarketState& s) { return merton_value(s.W, s.t); },
                                            merton_derivatives, [](const market::MarketState&) { return 0.375; }, pr);
    EXPECT_LT(l.total, 1e-8);
  }
}

TEST(Loss, TerminalTermVanishesAtAnExactFit) {
  const Domain d = Domain::merton(kVar);
  CollocationSet c = sample_collocation(d, 10, 1, 5);
  const SolverProblem pr = make_problem(c, market::ModelParams::merton(kR, kMu, 1.0), utility::Power{kGamma});
  NetworkParams n = init_networks(d, 6, 3);
  const double q = mlp_batch(n.value, n.scaling, c.terminal)(0);
  n.value.theta()(static_cast<Eigen::Index>(n.value.o_b3())) += pr.terminal_target(0) - q;
  const LossBreakdown l = evaluation_loss(n.value, n.scaling, Eigen::RowVectorXd::Constant(10, 0.4), pr);
  EXPECT_LT(l.terminal, 1e-24);
}

TEST(Loss, GradientMatchesFiniteDifferences) {
  const SolverProblem pr = full_problem(37, 11, 6);
  NetworkParams n = init_networks(Domain{}, 5, 7, 0.6);
  const Eigen::RowVectorXd w = interior_policy(n.policy, n.scaling, pr);
  Eigen::VectorXd g;
  g.resize(static_cast<Eigen::Index>(n.value.size()));
  evaluation_loss(n.value, n.scaling, w, pr, &g, 8);
  Mlp m = n.value;
  for (Eigen::Index k = 0; k < g.size(); ++k) {
    const double h = 1e-6, keep = m.theta()(k);
    m.theta()(k) = keep + h;
    const double fp = evaluation_loss(m, n.scaling, w, pr).total;
    m.theta()(k) = keep - h;
    const double fm = evaluation_loss(m, n.scaling, w, pr).total;
    m.theta()(k) = keep;
    const double fd = (fp - fm) / (2 * h);
    EXPECT_NEAR(g(k), fd, 1e-5 * (1 + std::abs(fd))) << k;
  }
}

TEST(Loss, ChunkSizeDoesNotChangeTheLoss) {
  const SolverProblem pr = full_problem(101, 29, 8);
  const NetworkParams n = init_networks(Domain{}, 6, 2, 0.5);
  const Eigen::RowVectorXd w = interior_policy(n.policy, n.scaling, pr);
  Eigen::VectorXd g1(static_cast<Eigen::Index>(n.value.size())), g2(g1.size());
  const double a = evaluation_loss(n.value, n.scaling, w, pr, &g1, 7).total;
  const double b = evaluation_loss(n.value, n.scaling, w, pr, &g2, 1024).total;
  EXPECT_NEAR(a, b, 1e-12 * (1 + std::abs(a)));
  EXPECT_LT((g1 - g2).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Loss, RawSShapedUtilityRejected) {
  const CollocationSet c = sample_collocation(Domain{}, 10, 5, 1);
  EXPECT_THROW(make_problem(c, market::ModelParams{}, utility::SShaped{}), std::invalid_argument);
  EXPECT_NO_THROW(make_problem(c, market::ModelParams{}, utility::concavify(utility::SShaped{})));
  EXPECT_THROW(policy_iteration(market::ModelParams{}, utility::SShaped{}, Domain{}, SolverConfig{}),
               std::invalid_argument);
}

TEST(Improvement, ObjectiveGradientMatchesFiniteDifferences) {
  const SolverProblem pr = full_problem(41, 10, 9);
  const NetworkParams n = init_networks(Domain{}, 5, 8, 0.6);
  const Eigen::MatrixXd J = interior_jets(n.value, n.scaling, pr);
  Mlp m = n.policy;
  Eigen::VectorXd g(static_cast<Eigen::Index>(m.size()));
  improvement_objective(m, n.scaling, J, pr, &g, 16);
  for (Eigen::Index k = 0; k < g.size(); ++k) {
    const double h = 1e-6, keep = m.theta()(k);
    m.theta()(k) = keep + h;
    const double fp = improvement_objective(m, n.scaling, J, pr);
    m.theta()(k) = keep - h;
    const double fm = improvement_objective(m, n.scaling, J, pr);
    m.theta()(k) = keep;
    const double fd = (fp - fm) / (2 * h);
    EXPECT_NEAR(g(k), fd, 1e-6 * (1 + std::abs(fd))) << k;
  }
}

namespace {

// Merton-operator jets whose per-point parabola peaks at target(W).
Eigen::MatrixXd jets_with_argmax(const SolverProblem& pr, double (*target)(double)) {
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(kChannels, pr.points.interior.cols());
  for (Eigen::Index i = 0; i < J.cols(); ++i) {
    const double W = pr.points.interior(kInW, i);
    J(kQW, i) = 1.0;
    J(kQWW, i) = -(kMu - kR) / (kVar * W * target(W));
  }
  return J;
}

double ramp_target(double W) { return 0.2 + 0.5 * (W - 0.5) / 11.5; }
double clipped_target(double W) { return 0.3 + 1.2 * (W - 0.5) / 11.5; }

}  // namespace

TEST(Improvement, ReachesPerStateParabolaArgmax) {
  const SolverProblem pr = merton_problem(1500, 10, 10);
  for (auto target : {&ramp_target, &clipped_target}) {
    NetworkParams n = init_networks(Domain::merton(kVar), 16, 4);
    const Eigen::MatrixXd J = jets_with_argmax(pr, target);
    numerics::OptimizerConfig cfg = SolverConfig::default_improvement_optimizer();
    cfg.max_iter = 400;
    const StepResult r = policy_improvement_step(n, pr, J, cfg);
    n.policy.set_theta(r.theta);
    for (double W : grid_nodes(1.0, 11.5, 12))
      for (double t : {0.1, 0.5, 0.9}) {
        const double w = policy_net(n, {W, kVar, kVar, 0.0, t});
        EXPECT_NEAR(w, std::clamp(target(W), 0.0, 1.0), 0.02) << "W=" << W << " t=" << t;
      }
  }
}

TEST(Improvement, ArgmaxPolicyIsAFixedPoint) {
  const SolverProblem pr = merton_problem(1500, 10, 11);
  NetworkParams n = init_networks(Domain::merton(kVar), 16, 4);
  const Eigen::MatrixXd J = jets_with_argmax(pr, &ramp_target);
  numerics::OptimizerConfig cfg = SolverConfig::default_improvement_optimizer();
  cfg.max_iter = 600;
  n.policy.set_theta(policy_improvement_step(n, pr, J, cfg).theta);
  const Eigen::RowVectorXd before = interior_policy(n.policy, n.scaling, pr);
  const StepResult again = policy_improvement_step(n, pr, J, SolverConfig::default_improvement_optimizer());
  Mlp after = n.policy;
  after.set_theta(again.theta);
  EXPECT_LT((interior_policy(after, n.scaling, pr) - before).cwiseAbs().maxCoeff(), 5e-3);
  EXPECT_GE(again.objective, improvement_objective(n.policy, n.scaling, J, pr) - 1e-12);
}

TEST(Evaluation, LossDecreasesMonotonicallyFromNearSolution) {
  const SolverProblem pr = merton_problem(800, 200, 12);
  NetworkParams n = init_networks(Domain::merton(kVar), 12, 5);
  n.policy.theta().setZero();
  n.policy.theta()(static_cast<Eigen::Index>(n.policy.o_b3())) = std::log(0.375 / 0.625);
  numerics::OptimizerConfig warm = SolverConfig::default_evaluation_optimizer();
  warm.max_iter = 300;
  n.value.set_theta(policy_evaluation_step(n, pr, warm).theta);
  const StepResult r = policy_evaluation_step(n, pr, SolverConfig::default_evaluation_optimizer());
  ASSERT_GE(r.optimizer.trace.size(), 2u);
  for (std::size_t k = 1; k < r.optimizer.trace.size(); ++k) EXPECT_LE(r.optimizer.trace[k], r.optimizer.trace[k - 1]);
  EXPECT_LT(r.objective, 1e-4);
}

namespace {

SolverConfig tiny_config() {
  SolverConfig c;
  c.hidden = 8;
  c.n_interior = 200;
  c.n_terminal = 50;
  c.max_outer = 3;
  c.seed = 42;
  c.evaluation.max_iter = 20;
  c.improvement.max_iter = 10;
  return c;
}

}  // namespace

TEST(PolicyIteration, IdenticalSeedsGiveIdenticalReports) {
  const SolverConfig c = tiny_config();
  const market::ModelParams p;
  const utility::UtilitySpec u = utility::concavify(utility::SShaped{});
  const SolveReport a = policy_iteration(p, u, Domain{}, c), b = policy_iteration(p, u, Domain{}, c);
  ASSERT_EQ(a.iterations.size(), b.iterations.size());
  for (std::size_t k = 0; k < a.iterations.size(); ++k) {
    EXPECT_EQ(a.iterations[k].evaluation_loss, b.iterations[k].evaluation_loss);
    EXPECT_EQ(a.iterations[k].max_relative_change, b.iterations[k].max_relative_change);
  }
  EXPECT_EQ(a.networks.value.theta(), b.networks.value.theta());
  EXPECT_EQ(a.networks.policy.theta(), b.networks.policy.theta());
  EXPECT_EQ(a.converged, b.converged);
}

TEST(PolicyIteration, ReportRespectsCapAndConvergenceFlag) {
  SolverConfig c = tiny_config();
  int calls = 0;
  c.on_iteration = [&](const IterationRecord&, const NetworkParams&) { ++calls; };
  const SolveReport r = policy_iteration(market::ModelParams::merton(kR, kMu, 1.0), utility::Power{kGamma},
                                         Domain::merton(kVar), c);
  EXPECT_LE(r.iterations.size(), 3u);
  EXPECT_EQ(calls, static_cast<int>(r.iterations.size()));
  EXPECT_EQ(r.converged, !r.iterations.empty() && r.iterations.back().max_relative_change < c.tolerance);
  for (const auto& it : r.iterations) {
    EXPECT_GE(it.evaluation_loss, 0.0);
    EXPECT_TRUE(std::isnan(it.reference_distance));
  }
  EXPECT_GT(r.wall_seconds, 0.0);
}

TEST(PolicyIteration, LooseToleranceStopsEarly) {
  SolverConfig c = tiny_config();
  c.tolerance = 1e9;
  const SolveReport r = policy_iteration(market::ModelParams::merton(kR, kMu, 1.0), utility::Power{kGamma},
                                         Domain::merton(kVar), c);
  EXPECT_TRUE(r.converged);
  EXPECT_EQ(r.iterations.size(), 1u);
}

TEST(PolicyIteration, ReferenceDistanceIsRecorded) {
  SolverConfig c = tiny_config();
  c.reference = [](const market::MarketState& s) { return merton_value(s.W, s.t); };
  const SolveReport r = policy_iteration(market::ModelParams::merton(kR, kMu, 1.0), utility::Power{kGamma},
                                         Domain::merton(kVar), c);
  for (const auto& it : r.iterations) EXPECT_GT(it.reference_distance, 0.0);
}

TEST(PolicyIteration, InvalidConfigRejected) {
  SolverConfig c = tiny_config();
  c.max_outer = 0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = tiny_config();
  c.tolerance = 0.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
}

TEST(ReportIo, JsonRoundTrip) {
  SolverConfig c = tiny_config();
  c.max_outer = 2;
  const SolveReport r = policy_iteration(market::ModelParams::merton(kR, kMu, 1.0), utility::Power{kGamma},
                                         Domain::merton(kVar), c);
  const SolveReport back = report_from_json(nlohmann::json::parse(to_json(r).dump()));
  EXPECT_EQ(back.networks.value.theta(), r.networks.value.theta());
  EXPECT_EQ(back.networks.policy.theta(), r.networks.policy.theta());
  EXPECT_EQ(back.networks.policy.output(), OutputActivation::sigmoid);
  EXPECT_EQ(back.iterations.size(), r.iterations.size());
  EXPECT_TRUE(std::isnan(back.iterations[0].reference_distance));
  EXPECT_EQ(back.networks.domain.v, r.networks.domain.v);
  const State x{4.0, kVar, kVar, 0.0, 0.3};
  EXPECT_EQ(value_net(back.networks, x), value_net(r.networks, x));
  const auto j = to_json(r.networks.value);
  EXPECT_EQ(j["layers"][1]["in"], 8);
  nlohmann::json broken = j;
  broken["theta"].erase(0);
  EXPECT_THROW(mlp_from_json(broken), std::invalid_argument);
}

TEST(ReportIo, SliceCsvRows) {
  const NetworkParams n = init_networks(Domain{}, 4, 1);
  std::ostringstream out;
  write_slice_csv(n, {5.5, 0.1, 0.2, 0.3, 0.5}, SliceAxis::time, {0.0, 0.5, 1.0}, out);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "t,value,omega");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, 3);
}
