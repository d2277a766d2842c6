#pragma once

// Test-only oracles shared by the unit suites and the acceptance binary.

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace liqport::testing {

/// Random expression over the differentiable primitive set, evaluable on both
/// double (finite-difference oracle path) and HyperDual. Arguments of log,
/// sqrt and pow are kept positive by construction.
struct RandomExpr {
  struct Node {
    int op;  // 0 input, 1 add, 2 mul, 3 div, 4 exp, 5 log, 6 tanh, 7 sqrt, 8 pow, 9 sub
    int a = -1;
    int b = -1;
    double c = 0.0;
  };
  std::vector<Node> nodes;

  static RandomExpr make(std::mt19937_64& rng, int n_inputs, int depth) {
    RandomExpr e;
    for (int i = 0; i < n_inputs; ++i) e.nodes.push_back({0, i, -1, 0.0});
    std::uniform_int_distribution<int> op(1, 9);
    std::uniform_real_distribution<double> coef(0.3, 1.7);
    for (int k = 0; k < depth; ++k) {
      std::uniform_int_distribution<int> pick(0, static_cast<int>(e.nodes.size()) - 1);
      const int o = op(rng);
      const int a = pick(rng);
      const int b = pick(rng);
      e.nodes.push_back({o, a, b, coef(rng)});
    }
    return e;
  }

  template <class S>
  S eval(std::span<const S> x) const {
    using std::exp;
    using std::log;
    using std::pow;
    using std::sqrt;
    using std::tanh;
    std::vector<S> v;
    v.reserve(nodes.size());
    for (const Node& n : nodes) {
      const auto a = static_cast<std::size_t>(n.a);
      const auto b = static_cast<std::size_t>(n.b);
      switch (n.op) {
        case 0: v.push_back(x[a]); break;
        case 1: v.push_back(v[a] + v[b]); break;
        case 2: v.push_back(v[a] * v[b] * S(0.5)); break;
        case 3: v.push_back(v[a] / (S(1.5) + v[b] * v[b])); break;
        case 4: v.push_back(exp(tanh(v[a]) * S(n.c))); break;
        case 5: v.push_back(log(S(1.0) + v[a] * v[a])); break;
        case 6: v.push_back(tanh(v[a] * S(n.c))); break;
        case 7: v.push_back(sqrt(S(1.0) + v[a] * v[a])); break;
        case 8: v.push_back(pow(S(1.0) + v[a] * v[a], n.c)); break;
        default: v.push_back(v[a] - v[b] * S(n.c)); break;
      }
    }
    return v.back();
  }
};

struct CompositionStats {
  int total = 0;
  int failures = 0;
  int symmetric = 0;
  double worst = 0.0;
};

/// Draws `count` random compositions of 3 inputs, compares every first and
/// second derivative with central differences at relative 1e-4 (entries below
/// 1e-3 in magnitude are compared against that floor) and checks exact Hessian symmetry.
CompositionStats random_composition_check(int count, std::uint64_t seed);

}  // namespace liqport::testing
