#pragma once

#include <array>
#include <cstddef>

#include <Eigen/Core>

#include "liqport/hjb/jet.hpp"
#include "liqport/hjb/network.hpp"
#include "liqport/market/dynamics.hpp"
#include "liqport/market/params.hpp"

namespace liqport::hjb {

/// Derivatives of Q entering the HJB operator, in this order.
enum Channel : int {
  kQt = 0,
  kQW,
  kQv,
  kQtheta,
  kQL,
  kQWW,
  kQvv,
  kQthth,
  kQLL,
  kQWv,
  kQWth,
  kQWL,
  kQvth,
};
inline constexpr int kChannels = 13;
using ChannelVector = std::array<double, kChannels>;
using ChannelMask = std::array<bool, kChannels>;

/// Coefficient multiplying each channel (dQ/dt gets 1 when with_time is set).
ChannelVector channel_coefficients(const market::CoefficientBundle& c, bool with_time);

/// dQ/dt + L^omega Q for the given derivatives.
double apply_operator(const ChannelVector& derivatives, const ChannelVector& coefficients);

/// Residual at one state for analytically supplied derivatives.
double pde_residual(const ChannelVector& derivatives, double omega, const market::MarketState& s,
                    const market::ModelParams& p);

/// Residual of the value network at one state.
double pde_residual(const Mlp& value, const InputScaling& sc, double omega, const market::MarketState& s,
                    const market::ModelParams& p);

/// All 13 channels of the network at one state.
ChannelVector network_derivatives(const Mlp& value, const InputScaling& sc, const market::MarketState& s);

/// Residual as r0 + r1 omega + r2 omega^2 at one state.
struct OmegaQuadratic {
  double r0 = 0.0;
  double r1 = 0.0;
  double r2 = 0.0;

  double at(double omega) const { return r0 + omega * (r1 + omega * r2); }
  /// Maximizer over [0, 1].
  double argmax() const;
};
OmegaQuadratic residual_quadratic(const ChannelVector& derivatives, const market::MarketState& s,
                                  const market::ModelParams& p);

/// Channel coefficients of every column of an interior batch, split by
/// powers of omega (K0 includes the dQ/dt coefficient).
struct OperatorBatch {
  Eigen::Matrix<double, kChannels, Eigen::Dynamic> K0, K1, K2;
  /// Channels with a nonzero coefficient anywhere in the batch.
  ChannelMask active{};
};
OperatorBatch operator_batch(const StateBatch& X, const market::ModelParams& p);

/// Jet directions needed to produce the masked channels.
JetSpec jet_spec_for(const ChannelMask& mask);

/// Row index in the jet output of every masked channel (first rows, then
/// second rows offset by the number of first rows); -1 when unmasked.
std::array<int, kChannels> channel_rows(const JetSpec& spec, const ChannelMask& mask);

}  // namespace liqport::hjb
