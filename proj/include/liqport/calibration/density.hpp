#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <vector>

#include "liqport/calibration/chain.hpp"
#include "liqport/calibration/smile.hpp"
#include "liqport/utility/utility.hpp"

namespace liqport::calibration {

class DensityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Piecewise-linear density on an increasing grid, unit trapezoidal mass.
struct DensityEstimate {
  std::vector<double> s;
  std::vector<double> density;
  /// Trapezoidal mass before renormalization.
  double normalization = 1.0;
  /// Mass removed by clipping negative values, as a fraction of the retained mass.
  double clipped_mass = 0.0;

  double lower() const { return s.front(); }
  double upper() const { return s.back(); }
  double mean() const;
  /// Exact integral of the interpolant from lower() to x, in [0, 1].
  double cdf(double x) const;
  /// Inverse of cdf for u in [0, 1].
  double quantile(double u) const;
};

/// Builds a unit-mass estimate from nonnegative values on an increasing grid.
DensityEstimate make_density(std::vector<double> s, std::vector<double> values);

struct DensityOptions {
  std::size_t n_points = 401;
  double delta_low = 0.001;
  double delta_high = 0.999;
  double max_clipped = 0.05;
  double min_mass = 0.98;
  double max_mass = 1.02;
};

/// Breeden-Litzenberger density: smile -> call prices on a uniform strike grid
/// spanning the strikes at forward deltas delta_high..delta_low, discounted
/// second differences, negatives clipped, renormalized. Throws DensityError
/// when clipping removes more than max_clipped or the raw mass falls outside
/// [min_mass, max_mass].
DensityEstimate rn_density(const CubicSpline& smile, const OptionChain& chain, const DensityOptions& opt = {});

/// Forward delta consistent with the smile at strike K (fixed point of
/// delta = N(d1(K, smile(delta)))).
double smile_delta(const CubicSpline& smile, const OptionChain& chain, double strike);

/// Q / U' renormalized. Throws std::domain_error if U' <= 0 on the grid.
DensityEstimate subjective_density(const DensityEstimate& q, const utility::UtilitySpec& u);

struct PitResult {
  std::vector<double> y;
  std::vector<bool> clamped;
  std::size_t n_clamped = 0;
};

/// y_t = CDF_t(X_t), clamped into [eps, 1 - eps] with a flag when the
/// realization falls outside the support (or rounds to 0 or 1).
PitResult pit_transform(std::span<const double> realizations, std::span<const DensityEstimate> densities,
                        double eps = 1e-6);

/// Trapezoidal L1 distance to a reference pdf over the grid, plus the
/// reference mass lying outside the grid (given as `outside_mass`).
double l1_distance(const DensityEstimate& d, const std::function<double(double)>& pdf, double outside_mass = 0.0);

/// CSV "s,q,p" for a risk-neutral and a subjective density on the same grid.
void write_density_csv(const DensityEstimate& q, const DensityEstimate& p, std::ostream& out);

}  // namespace liqport::calibration
