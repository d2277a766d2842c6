#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "liqport/hjb/network.hpp"

namespace liqport::hjb {

struct CollocationSet {
  /// Uniform over the box with t in (0, T).
  StateBatch interior;
  /// Uniform over the box with t = T exactly.
  StateBatch terminal;
};

/// Deterministic per seed. Throws std::invalid_argument for zero counts.
CollocationSet sample_collocation(const Domain& d, std::size_t n_interior, std::size_t n_terminal,
                                  std::uint64_t seed);

/// Tensor grid with `nodes` points per live coordinate (one point, the
/// frozen value, per frozen coordinate), t included.
struct MonitoringGrid {
  StateBatch points;
  /// Per column: true when no live coordinate sits on the box boundary.
  /// Time counts as live but t = 0 and t = T nodes do not make a point
  /// boundary.
  std::vector<bool> interior;
  std::size_t nodes = 0;
};
MonitoringGrid monitoring_grid(const Domain& d, std::size_t nodes = 5);

/// Evenly spaced nodes over [lo, hi] (one node when lo == hi).
std::vector<double> grid_nodes(double lo, double hi, std::size_t n);

}  // namespace liqport::hjb
