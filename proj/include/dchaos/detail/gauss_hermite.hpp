#pragma once

// Gauss-Hermite rules for the weight exp(-x^2), nodes by Newton iteration on
// the orthonormal Hermite recurrence.

#include <cmath>
#include <vector>

#include "dchaos/errors.hpp"

namespace dchaos::detail {

struct GaussHermiteRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

inline GaussHermiteRule gauss_hermite_rule(int n) {
  if (n < 1 || n > 200) throw ArgumentError("gauss_hermite_rule: node count must lie in [1,200]");
  constexpr double kPiM4 = 0.7511255444649425;  // pi^{-1/4}
  GaussHermiteRule rule;
  rule.nodes.assign(static_cast<std::size_t>(n), 0.0);
  rule.weights.assign(static_cast<std::size_t>(n), 0.0);
  auto& x = rule.nodes;
  auto& w = rule.weights;
  const int half = (n + 1) / 2;
  double z = 0.0;
  for (int i = 0; i < half; ++i) {
    if (i == 0) {
      z = std::sqrt(2.0 * n + 1.0) - 1.85575 * std::pow(2.0 * n + 1.0, -0.16667);
    } else if (i == 1) {
      z -= 1.14 * std::pow(static_cast<double>(n), 0.426) / z;
    } else if (i == 2) {
      z = 1.86 * z - 0.86 * x[0];
    } else if (i == 3) {
      z = 1.91 * z - 0.91 * x[1];
    } else {
      z = 2.0 * z - x[static_cast<std::size_t>(i - 2)];
    }
    double pp = 0.0;
    bool done = false;
    for (int it = 0; it < 100; ++it) {
      double p1 = kPiM4, p2 = 0.0;
      for (int j = 0; j < n; ++j) {
        const double p3 = p2;
        p2 = p1;
        p1 = z * std::sqrt(2.0 / (j + 1)) * p2 - std::sqrt(static_cast<double>(j) / (j + 1)) * p3;
      }
      pp = std::sqrt(2.0 * n) * p2;
      const double z1 = z;
      z = z1 - p1 / pp;
      if (std::abs(z - z1) <= 1e-15 * std::max(1.0, std::abs(z))) {
        done = true;
        break;
      }
    }
    if (!done) throw NumericalFailure("gauss_hermite_rule: Newton iteration did not converge");
    x[static_cast<std::size_t>(i)] = z;
    x[static_cast<std::size_t>(n - 1 - i)] = -z;
    w[static_cast<std::size_t>(i)] = w[static_cast<std::size_t>(n - 1 - i)] = 2.0 / (pp * pp);
  }
  return rule;
}

}  // namespace dchaos::detail
