#pragma once

// log of the regularized upper incomplete gamma function Q(a, x), computed in
// log space so that deep tails (Q ~ e^{-1500}) do not underflow.

#include <cmath>
#include <limits>

#include "dchaos/errors.hpp"

namespace dchaos::detail {

inline double log_gamma_q(double a, double x) {
  if (!(a > 0.0) || !(x >= 0.0)) throw ArgumentError("log_gamma_q: need a > 0 and x >= 0");
  if (x == 0.0) return 0.0;
  const double log_prefactor = -x + a * std::log(x) - std::lgamma(a);
  constexpr double eps = 1e-16;
  constexpr int max_iter = 1000000;
  if (x < a + 1.0) {
    // Series for P, then Q = 1 - P.
    double ap = a, del = 1.0 / a, sum = del;
    for (int i = 0; i < max_iter; ++i) {
      ap += 1.0;
      del *= x / ap;
      sum += del;
      if (std::abs(del) < std::abs(sum) * eps) {
        return std::log1p(-std::exp(log_prefactor + std::log(sum)));
      }
    }
    throw NumericalFailure("log_gamma_q: series did not converge");
  }
  // Modified Lentz continued fraction for Q.
  constexpr double tiny = std::numeric_limits<double>::min() / eps;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < max_iter; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < eps) return log_prefactor + std::log(h);
  }
  throw NumericalFailure("log_gamma_q: continued fraction did not converge");
}

}  // namespace dchaos::detail
