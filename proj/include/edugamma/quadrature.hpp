#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <vector>

namespace edugamma::quadrature {

struct Rule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// n-point Gauss-Legendre rule on [0, 1]. Roots of P_n by Newton iteration
/// from the Chebyshev-like initial guesses.
inline Rule gauss_legendre_unit(std::size_t n) {
  Rule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  const std::size_t half = (n + 1) / 2;
  for (std::size_t i = 0; i < half; ++i) {
    double z = std::cos(std::numbers::pi * (static_cast<double>(i) + 0.75) /
                        (static_cast<double>(n) + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p1 = 1.0;
      double p2 = 0.0;
      for (std::size_t j = 1; j <= n; ++j) {
        const double p3 = p2;
        p2 = p1;
        p1 = ((2.0 * j - 1.0) * z * p2 - (j - 1.0) * p3) / static_cast<double>(j);
      }
      dp = static_cast<double>(n) * (z * p1 - p2) / (z * z - 1.0);
      const double dz = p1 / dp;
      z -= dz;
      if (std::fabs(dz) < 1e-16) break;
    }
    const double w = 2.0 / ((1.0 - z * z) * dp * dp);
    // map [-1, 1] -> [0, 1]
    rule.nodes[i] = 0.5 * (1.0 - z);
    rule.nodes[n - 1 - i] = 0.5 * (1.0 + z);
    rule.weights[i] = 0.5 * w;
    rule.weights[n - 1 - i] = 0.5 * w;
  }
  return rule;
}

/// The 256-node rule used for Lorenz-curve integrals, built once.
inline const Rule& gauss_legendre_256() {
  static const Rule rule = gauss_legendre_unit(256);
  return rule;
}

template <typename F>
double integrate_unit(const Rule& rule, F&& f) {
  double sum = 0.0;
  for (std::size_t i = 0; i < rule.nodes.size(); ++i) sum += rule.weights[i] * f(rule.nodes[i]);
  return sum;
}

}  // namespace edugamma::quadrature
