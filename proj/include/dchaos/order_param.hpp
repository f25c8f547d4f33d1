#pragma once

// Step-function functional order parameter x(q) and the exact piecewise
// integrals built on it:
//
//   d(q)      = int_q^1 xi''(s) x(s) ds
//   weighted  = int_0^1 q xi''(q) x(q) dq   (theta telescoping)
//   log-int   = int_lo^hi xi''(s) / (b - shift - E(s)) ds,  E in {d, phi}
//
// All three are evaluated in closed form piece by piece; no quadrature.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "dchaos/errors.hpp"
#include "dchaos/mixture.hpp"

namespace dchaos {

struct Breakpoint {
  double q = 0.0;
  double m = 0.0;

  friend bool operator==(const Breakpoint&, const Breakpoint&) = default;
};

/// x(q) = m_l on [q_l, q_{l+1}), with q_0 = 0, q_{k+1} = 1 implicit and x(1) = 1.
class StepOrderParameter {
 public:
  explicit StepOrderParameter(std::vector<Breakpoint> pieces) : pieces_(std::move(pieces)) {
    check();
  }

  /// x == m on [0,1).
  static StepOrderParameter constant(double m) { return StepOrderParameter({{0.0, m}}); }

  const std::vector<Breakpoint>& pieces() const noexcept { return pieces_; }
  std::size_t levels() const noexcept { return pieces_.size(); }
  double q(std::size_t l) const { return pieces_[l].q; }
  double m(std::size_t l) const { return pieces_[l].m; }
  /// Right end of piece l (q_{l+1}, or 1 for the top piece).
  double upper(std::size_t l) const {
    return l + 1 < pieces_.size() ? pieces_[l + 1].q : 1.0;
  }

  double value(double s) const {
    if (s >= 1.0) return 1.0;
    double out = pieces_.front().m;
    for (const auto& bp : pieces_) {
      if (bp.q <= s) out = bp.m;
      else break;
    }
    return out;
  }

  friend bool operator==(const StepOrderParameter&, const StepOrderParameter&) = default;

 private:
  void check() const {
    if (pieces_.empty()) throw ArgumentError("StepOrderParameter: no pieces");
    if (pieces_.front().q != 0.0) throw ArgumentError("StepOrderParameter: q_0 must be 0");
    double prev_q = 0.0;
    double prev_m = 0.0;
    for (const auto& bp : pieces_) {
      if (!(bp.q >= prev_q && bp.q <= 1.0)) {
        throw ArgumentError("StepOrderParameter: breakpoints must be nondecreasing in [0,1]");
      }
      if (!(bp.m >= prev_m && bp.m <= 1.0)) {
        throw ArgumentError("StepOrderParameter: levels must be nondecreasing in [0,1]");
      }
      prev_q = bp.q;
      prev_m = bp.m;
    }
  }

  std::vector<Breakpoint> pieces_;
};

/// d(q) = int_q^1 xi''(s) x(s) ds, exact.
inline double d_eval(const StepOrderParameter& x, const MixtureSpec& spec, double q) {
  double acc = 0.0;
  for (std::size_t l = 0; l < x.levels(); ++l) {
    const double hi = x.upper(l);
    const double m = x.m(l);
    if (hi <= q || m == 0.0) continue;
    const double lo = std::max(q, x.q(l));
    acc += m * (xi_d1(spec, hi) - xi_d1(spec, lo));
  }
  return acc;
}

/// sum_l m_l (theta(q_{l+1}) - theta(q_l)) = int_0^1 q xi''(q) x(q) dq.
inline double weighted_integral(const StepOrderParameter& x, const MixtureSpec& spec) {
  double acc = 0.0;
  for (std::size_t l = 0; l < x.levels(); ++l) {
    if (x.m(l) == 0.0) continue;
    acc += x.m(l) * (theta_eval(spec, x.upper(l)) - theta_eval(spec, x.q(l)));
  }
  return acc;
}

/// Denominator envelope: either d itself, or the shrunk envelope
/// phi(s) = d(u) + (1-t)/(1+t) (d(s) - d(u)) around |u|.
struct Envelope {
  enum class Kind { tail, shrunk };
  Kind kind = Kind::tail;
  double t = 1.0;
  double u_abs = 0.0;

  static Envelope tail() { return {}; }
  static Envelope shrunk(double t, double u_abs) { return {Kind::shrunk, t, u_abs}; }

  /// Factor multiplying -d'(s) in the envelope's derivative.
  double coefficient() const { return kind == Kind::tail ? 1.0 : (1.0 - t) / (1.0 + t); }
};

inline double envelope_eval(const StepOrderParameter& x, const MixtureSpec& spec,
                            const Envelope& env, double s) {
  if (env.kind == Envelope::Kind::tail) return d_eval(x, spec, s);
  const double du = d_eval(x, spec, env.u_abs);
  return du + env.coefficient() * (d_eval(x, spec, s) - du);
}

/// int_lo^hi xi''(s) / (b - shift - E(s)) ds in closed form.
///
/// On a piece where E has slope c*m*xi'' the integrand is a logarithmic
/// derivative; where c*m == 0 the denominator is constant.
inline double log_integral(const StepOrderParameter& x, const MixtureSpec& spec, double b,
                           double shift, double lo, double hi, const Envelope& env) {
  if (!(lo >= 0.0 && hi <= 1.0 && lo <= hi)) {
    throw ArgumentError("log_integral: need 0 <= lo <= hi <= 1");
  }
  if (lo == hi) return 0.0;
  const double base = b - shift;
  // E is nonincreasing, so the denominator is smallest at lo.
  const double d_lo = base - envelope_eval(x, spec, env, lo);
  if (!(d_lo > 0.0)) {
    throw AdmissibilityError("log_integral: denominator b - shift - E(s) = " +
                                 std::to_string(d_lo) + " <= 0 at s=" + std::to_string(lo),
                             lo);
  }
  const double c = env.coefficient();
  double acc = 0.0;
  for (std::size_t l = 0; l < x.levels(); ++l) {
    const double a = std::max(lo, x.q(l));
    const double e = std::min(hi, x.upper(l));
    if (e <= a) continue;
    const double slope = c * x.m(l);
    const double denom = base - envelope_eval(x, spec, env, a);
    const double dxi = xi_d1(spec, e) - xi_d1(spec, a);
    if (slope == 0.0) {
      acc += dxi / denom;
    } else {
      acc += std::log1p(slope * dxi / denom) / slope;
    }
  }
  return acc;
}

/// Smallest point of the support of x: first q_l with m_l > tol (1 if none).
inline double support_min(const StepOrderParameter& x, double tol = 1e-12) {
  for (const auto& bp : x.pieces()) {
    if (bp.m > tol) return bp.q;
  }
  return 1.0;
}

/// Equivalent step function whose breakpoint list contains q. q = 1 is always
/// an implicit breakpoint, so it leaves x unchanged.
inline StepOrderParameter insert_breakpoint(const StepOrderParameter& x, double q) {
  if (!(q >= 0.0 && q <= 1.0)) throw ArgumentError("insert_breakpoint: q must lie in [0,1]");
  if (q == 1.0) return x;
  auto pieces = x.pieces();
  for (const auto& bp : pieces) {
    if (bp.q == q) return x;
  }
  auto it = std::upper_bound(pieces.begin(), pieces.end(), q,
                             [](double v, const Breakpoint& bp) { return v < bp.q; });
  const double level = std::prev(it)->m;
  pieces.insert(it, Breakpoint{q, level});
  return StepOrderParameter(std::move(pieces));
}

/// Canonical form: breakpoints closer than q_tol are merged keeping the larger
/// level, and adjacent pieces with equal levels are fused.
inline StepOrderParameter canonicalize(const StepOrderParameter& x, double q_tol = 1e-12) {
  std::vector<Breakpoint> out;
  for (const auto& bp : x.pieces()) {
    if (!out.empty() && bp.q - out.back().q <= q_tol) {
      out.back().m = std::max(out.back().m, bp.m);
      continue;
    }
    if (!out.empty() && bp.m == out.back().m) continue;
    out.push_back(bp);
  }
  out.front().q = 0.0;
  // A top piece squeezed against q = 1 has no mass.
  while (out.size() > 1 && 1.0 - out.back().q <= q_tol) out.pop_back();
  return StepOrderParameter(std::move(out));
}

}  // namespace dchaos
