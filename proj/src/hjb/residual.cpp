#include "liqport/hjb/residual.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace liqport::hjb {

namespace {

struct ChannelDef {
  int a;  // input of the first derivative, or first input of the pair
  int b;  // -1 for first derivatives
};

constexpr std::array<ChannelDef, kChannels> kDefs{{
    {kInT, -1},
    {kInW, -1},
    {kInV, -1},
    {kInTheta, -1},
    {kInL, -1},
    {kInW, kInW},
    {kInV, kInV},
    {kInTheta, kInTheta},
    {kInL, kInL},
    {kInW, kInV},
    {kInW, kInTheta},
    {kInW, kInL},
    {kInV, kInTheta},
}};

market::MarketState to_market(const StateBatch& X, Eigen::Index i) {
  return {X(kInW, i), X(kInV, i), X(kInTheta, i), X(kInL, i), X(kInT, i)};
}

ChannelMask all_channels() {
  ChannelMask m;
  m.fill(true);
  return m;
}

}  // namespace

ChannelVector channel_coefficients(const market::CoefficientBundle& c, bool with_time) {
  return {with_time ? 1.0 : 0.0, c.drift_W,  c.drift_v,  c.drift_theta, c.drift_L,  c.diff_WW,    c.diff_vv,
          c.diff_thetatheta,     c.diff_LL, c.cross_Wv, c.cross_Wtheta, c.cross_WL, c.cross_vtheta};
}

double apply_operator(const ChannelVector& d, const ChannelVector& k) {
  double r = 0.0;
  for (int c = 0; c < kChannels; ++c) r += k[c] * d[c];
  return r;
}

double pde_residual(const ChannelVector& derivatives, double omega, const market::MarketState& s,
                    const market::ModelParams& p) {
  return apply_operator(derivatives, channel_coefficients(market::hjb_coefficients(s, omega, p), true));
}

ChannelVector network_derivatives(const Mlp& value, const InputScaling& sc, const market::MarketState& s) {
  const ChannelMask mask = all_channels();
  const JetSpec spec = jet_spec_for(mask);
  const auto rows = channel_rows(spec, mask);
  StateBatch X(kInputs, 1);
  X << s.W, s.v, s.theta, s.L, s.t;
  MlpJet jet;
  jet.forward(value, sc, X, spec);
  const auto nf = static_cast<int>(spec.first.size());
  ChannelVector d{};
  for (int c = 0; c < kChannels; ++c)
    d[c] = rows[c] < nf ? jet.output().first(rows[c], 0) : jet.output().second(rows[c] - nf, 0);
  return d;
}

double pde_residual(const Mlp& value, const InputScaling& sc, double omega, const market::MarketState& s,
                    const market::ModelParams& p) {
  return pde_residual(network_derivatives(value, sc, s), omega, s, p);
}

double OmegaQuadratic::argmax() const {
  double best = 0.0, best_value = at(0.0);
  if (at(1.0) > best_value) {
    best = 1.0;
    best_value = at(1.0);
  }
  if (r2 < 0.0) {
    const double w = -r1 / (2.0 * r2);
    if (w > 0.0 && w < 1.0 && at(w) > best_value) best = w;
  }
  return best;
}

OmegaQuadratic residual_quadratic(const ChannelVector& derivatives, const market::MarketState& s,
                                  const market::ModelParams& p) {
  const market::OmegaExpansion e = market::hjb_coefficient_expansion(s, p);
  return {apply_operator(derivatives, channel_coefficients(e.constant, true)),
          apply_operator(derivatives, channel_coefficients(e.linear, false)),
          apply_operator(derivatives, channel_coefficients(e.quadratic, false))};
}

OperatorBatch operator_batch(const StateBatch& X, const market::ModelParams& p) {
  OperatorBatch ob;
  const Eigen::Index n = X.cols();
  ob.K0.resize(kChannels, n);
  ob.K1.resize(kChannels, n);
  ob.K2.resize(kChannels, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const market::OmegaExpansion e = market::hjb_coefficient_expansion(to_market(X, i), p);
    const ChannelVector k0 = channel_coefficients(e.constant, true);
    const ChannelVector k1 = channel_coefficients(e.linear, false);
    const ChannelVector k2 = channel_coefficients(e.quadratic, false);
    for (int c = 0; c < kChannels; ++c) {
      ob.K0(c, i) = k0[c];
      ob.K1(c, i) = k1[c];
      ob.K2(c, i) = k2[c];
    }
  }
  for (int c = 0; c < kChannels; ++c)
    ob.active[c] = n > 0 && (ob.K0.row(c).cwiseAbs().maxCoeff() > 0.0 || ob.K1.row(c).cwiseAbs().maxCoeff() > 0.0 ||
                             ob.K2.row(c).cwiseAbs().maxCoeff() > 0.0);
  return ob;
}

JetSpec jet_spec_for(const ChannelMask& mask) {
  JetSpec s;
  const auto need = [&s](int input) {
    if (s.first_slot(input) < 0) s.first.push_back(input);
  };
  for (int c = 0; c < kChannels; ++c) {
    if (!mask[c]) continue;
    need(kDefs[c].a);
    if (kDefs[c].b >= 0) need(kDefs[c].b);
  }
  for (int c = 0; c < kChannels; ++c)
    if (mask[c] && kDefs[c].b >= 0) s.second.push_back({kDefs[c].a, kDefs[c].b});
  return s;
}

std::array<int, kChannels> channel_rows(const JetSpec& spec, const ChannelMask& mask) {
  std::array<int, kChannels> rows;
  rows.fill(-1);
  const auto nf = static_cast<int>(spec.first.size());
  for (int c = 0; c < kChannels; ++c) {
    if (!mask[c]) continue;
    if (kDefs[c].b < 0) {
      rows[c] = spec.first_slot(kDefs[c].a);
    } else {
      for (std::size_t p = 0; p < spec.second.size(); ++p)
        if (spec.second[p][0] == kDefs[c].a && spec.second[p][1] == kDefs[c].b) rows[c] = nf + static_cast<int>(p);
    }
    if (rows[c] < 0) throw std::invalid_argument("jet spec does not provide a masked channel");
  }
  return rows;
}

}  // namespace liqport::hjb
