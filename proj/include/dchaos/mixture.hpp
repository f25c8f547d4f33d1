#pragma once

// Even spherical mixture  xi(x) = sum_p beta_p^2 x^{2p}  together with the
// external field h. A single MixtureSpec defines the model (xi, h).

#include <cmath>
#include <cstdint>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "dchaos/errors.hpp"

namespace dchaos {

struct MixtureTerm {
  int p = 1;             // monomial x^{2p}
  double beta_sq = 0.0;  // beta_p^2
};

struct MixtureSpec {
  std::vector<MixtureTerm> terms;
  double h = 0.0;

  MixtureSpec() = default;
  MixtureSpec(std::vector<MixtureTerm> t, double field = 0.0)
      : terms(std::move(t)), h(field) {}
};

struct ValidationReport {
  bool valid = true;
  std::vector<std::string> issues;
};

namespace detail {

inline constexpr double kRangeSlack = 1e-12;

// d^order/dx^order of x^{deg}
inline double monomial_derivative(int deg, int order, double x) {
  if (order > deg) return 0.0;
  double coef = 1.0;
  for (int i = 0; i < order; ++i) coef *= static_cast<double>(deg - i);
  const int rest = deg - order;
  double power = 1.0;
  for (int i = 0; i < rest; ++i) power *= x;
  return coef * power;
}

}  // namespace detail

/// Returns xi^{(order)}(x) for order in {0,1,2,3} by direct monomial summation.
inline double xi_eval(const MixtureSpec& spec, double x, int order) {
  if (order < 0 || order > 3) {
    throw ArgumentError("xi_eval: derivative order must be in {0,1,2,3}, got " +
                        std::to_string(order));
  }
  if (!(std::abs(x) <= 1.0 + detail::kRangeSlack)) {
    throw ArgumentError("xi_eval: |x| must be <= 1, got " + std::to_string(x));
  }
  double acc = 0.0;
  for (const auto& term : spec.terms) {
    acc += term.beta_sq * detail::monomial_derivative(2 * term.p, order, x);
  }
  return acc;
}

inline double xi(const MixtureSpec& spec, double x) { return xi_eval(spec, x, 0); }
inline double xi_d1(const MixtureSpec& spec, double x) { return xi_eval(spec, x, 1); }
inline double xi_d2(const MixtureSpec& spec, double x) { return xi_eval(spec, x, 2); }
inline double xi_d3(const MixtureSpec& spec, double x) { return xi_eval(spec, x, 3); }

/// theta(q) = q xi'(q) - xi(q); nondecreasing on [0,1] with theta' = q xi''.
inline double theta_eval(const MixtureSpec& spec, double q) {
  if (!(q >= -detail::kRangeSlack && q <= 1.0 + detail::kRangeSlack)) {
    throw ArgumentError("theta_eval: q must lie in [0,1], got " + std::to_string(q));
  }
  return q * xi_d1(spec, q) - xi(spec, q);
}

/// True when xi vanishes identically (pure external field model).
inline bool is_degenerate(const MixtureSpec& spec) {
  for (const auto& term : spec.terms) {
    if (term.beta_sq != 0.0) return false;
  }
  return true;
}

inline ValidationReport validate(const MixtureSpec& spec) {
  ValidationReport report;
  auto fail = [&](std::string msg) {
    report.valid = false;
    report.issues.push_back(std::move(msg));
  };
  std::set<int> seen;
  for (const auto& term : spec.terms) {
    if (term.p < 1) fail("degree p must be >= 1 (got " + std::to_string(term.p) + ")");
    if (!seen.insert(term.p).second) {
      fail("duplicate degree p=" + std::to_string(term.p));
    }
    if (!std::isfinite(term.beta_sq)) {
      fail("non-finite coefficient for p=" + std::to_string(term.p));
    } else if (term.beta_sq < 0.0) {
      fail("negative coefficient beta_sq=" + std::to_string(term.beta_sq) +
           " for p=" + std::to_string(term.p));
    }
  }
  if (!std::isfinite(spec.h)) fail("non-finite external field h");
  if (!report.valid) return report;

  // Structural hypotheses, checked numerically on a grid.
  const bool nontrivial = !is_degenerate(spec);
  for (int i = 0; i <= 200; ++i) {
    const double x = i / 200.0;
    const double d2 = xi_d2(spec, x);
    const double d3 = xi_d3(spec, x);
    if (d2 < 0.0 || (nontrivial && x > 0.0 && !(d2 > 0.0))) {
      fail("xi'' not positive at x=" + std::to_string(x));
      break;
    }
    if (d3 < 0.0) {
      fail("xi''' negative at x=" + std::to_string(x));
      break;
    }
  }
  return report;
}

/// Canonical text form of (xi, h), used to tag reports.
inline std::string digest(const MixtureSpec& spec) {
  std::ostringstream os;
  os.precision(17);
  for (const auto& term : spec.terms) os << "p" << term.p << "=" << term.beta_sq << ";";
  os << "h=" << spec.h;
  return os.str();
}

}  // namespace dchaos
