#include "test_support.hpp"

#include <algorithm>

#include "liqport/numerics/hyperdual.hpp"

namespace liqport::testing {

CompositionStats random_composition_check(int count, std::uint64_t seed) {
  using numerics::HyperDual;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::uniform_int_distribution<int> depth(3, 10);
  CompositionStats stats;
  const std::vector<std::size_t> active{0, 1, 2};
  for (int k = 0; k < count; ++k) {
    const RandomExpr e = RandomExpr::make(rng, 3, depth(rng));
    const std::vector<double> x{u(rng), u(rng), u(rng)};
    const auto r = numerics::eval_with_input_derivs(
        [&](std::span<const HyperDual> v) { return e.eval<HyperDual>(v); }, x, active);
    auto f = [&](std::vector<double> y) { return e.eval<double>(std::span<const double>(y)); };

    bool ok = true;
    auto check = [&](double exact, double fd) {
      const double err = std::abs(exact - fd) / std::max(std::abs(fd), 1e-3);
      stats.worst = std::max(stats.worst, err);
      if (err > 1e-4) ok = false;
    };
    const double h1 = 1e-6, h2 = 1e-4;
    for (std::size_t i = 0; i < 3; ++i) {
      std::vector<double> p = x, m = x;
      p[i] += h1;
      m[i] -= h1;
      check(r.gradient(static_cast<Eigen::Index>(i)), (f(p) - f(m)) / (2 * h1));
      for (std::size_t j = 0; j < 3; ++j) {
        auto at = [&](double di, double dj) {
          std::vector<double> y = x;
          y[i] += di;
          y[j] += dj;
          return f(y);
        };
        const double fd = i == j ? (at(h2, 0) - 2 * f(x) + at(-h2, 0)) / (h2 * h2)
                                 : (at(h2, h2) - at(h2, -h2) - at(-h2, h2) + at(-h2, -h2)) /
                                       (4 * h2 * h2);
        check(r.hessian(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)), fd);
      }
    }
    ++stats.total;
    if (!ok) ++stats.failures;
    if (r.hessian == r.hessian.transpose()) ++stats.symmetric;
  }
  return stats;
}

}  // namespace liqport::testing
