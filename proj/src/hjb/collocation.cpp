#include "liqport/hjb/collocation.hpp"

#include <random>
#include <stdexcept>

#include "liqport/numerics/random.hpp"

namespace liqport::hjb {

namespace {

void fill_uniform(StateBatch& X, const Domain& d, std::mt19937_64& rng, bool terminal) {
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  for (Eigen::Index i = 0; i < X.cols(); ++i) {
    for (int k = 0; k < kInputs; ++k) {
      const auto r = d.range(k);
      if (k == kInT) {
        if (terminal) {
          X(k, i) = d.T;
        } else {
          double t = 0.0;
          while (t <= 0.0 || t >= d.T) t = d.T * u01(rng);
          X(k, i) = t;
        }
      } else {
        X(k, i) = r[0] + (r[1] - r[0]) * u01(rng);
      }
    }
  }
}

}  // namespace

CollocationSet sample_collocation(const Domain& d, std::size_t n_interior, std::size_t n_terminal,
                                  std::uint64_t seed) {
  d.validate();
  if (n_interior == 0 || n_terminal == 0) throw std::invalid_argument("collocation counts must be > 0");
  CollocationSet c;
  c.interior.resize(kInputs, static_cast<Eigen::Index>(n_interior));
  c.terminal.resize(kInputs, static_cast<Eigen::Index>(n_terminal));
  std::mt19937_64 a(numerics::substream_seed(seed, 0)), b(numerics::substream_seed(seed, 1));
  fill_uniform(c.interior, d, a, false);
  fill_uniform(c.terminal, d, b, true);
  return c;
}

std::vector<double> grid_nodes(double lo, double hi, std::size_t n) {
  if (lo == hi || n <= 1) return {lo};
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  x.back() = hi;
  return x;
}

MonitoringGrid monitoring_grid(const Domain& d, std::size_t nodes) {
  d.validate();
  if (nodes < 3) throw std::invalid_argument("monitoring grid needs >= 3 nodes per coordinate");
  std::array<std::vector<double>, kInputs> axis;
  std::size_t total = 1;
  for (int k = 0; k < kInputs; ++k) {
    const auto r = d.range(k);
    axis[k] = grid_nodes(r[0], r[1], nodes);
    total *= axis[k].size();
  }
  MonitoringGrid g;
  g.nodes = nodes;
  g.points.resize(kInputs, static_cast<Eigen::Index>(total));
  g.interior.resize(total);
  std::array<std::size_t, kInputs> idx{};
  for (std::size_t col = 0; col < total; ++col) {
    bool inner = true;
    for (int k = 0; k < kInputs; ++k) {
      g.points(k, static_cast<Eigen::Index>(col)) = axis[k][idx[k]];
      if (k != kInT && axis[k].size() > 1 && (idx[k] == 0 || idx[k] + 1 == axis[k].size())) inner = false;
    }
    g.interior[col] = inner;
    for (int k = 0; k < kInputs; ++k) {
      if (++idx[k] < axis[k].size()) break;
      idx[k] = 0;
    }
  }
  return g;
}

}  // namespace liqport::hjb
