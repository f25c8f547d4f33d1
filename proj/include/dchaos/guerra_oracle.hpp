#pragma once

// Brute-force checks of the replica-symmetry-breaking recursion behind the
// coupled upper bound:
//
//   * RSB schedules (k, m, q, tau, n) with correlated Gaussian increments,
//   * the scalar identity (1/n) log E exp (n/2L)(y + sqrt(v) z)^2,
//   * the recursive functionals J^1, J^2 by nested Gauss-Hermite quadrature
//     versus their explicit log-ratio sums,
//   * tau_N^b = -N^{-1} log P(chi^2_N >= N b) and its limit (b - 1 - log b)/2.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "dchaos/detail/gauss_hermite.hpp"
#include "dchaos/detail/incomplete_gamma.hpp"
#include "dchaos/detail/parallel.hpp"
#include "dchaos/detail/rng.hpp"
#include "dchaos/errors.hpp"
#include "dchaos/mixture.hpp"
#include "dchaos/order_param.hpp"

namespace dchaos {

/// Discrete RSB data: 0 = m_0 <= ... <= m_k <= 1, 0 = q_0 <= ... <= q_{k+1} = 1,
/// q_tau = |u|, and the rescaled sequence n.
struct RSBSchedule {
  int k = 0;
  std::vector<double> m;  // m_0..m_k
  std::vector<double> q;  // q_0..q_{k+1}
  int tau = 0;
  std::vector<double> n;  // n_0..n_k
  double t = 1.0;
  int eta = 1;

  /// Builds n from (m, q, tau, t) and validates the schedule.
  static RSBSchedule make(std::vector<double> m, std::vector<double> q, int tau, double t, int eta) {
    RSBSchedule s;
    s.k = static_cast<int>(m.size()) - 1;
    s.m = std::move(m);
    s.q = std::move(q);
    s.tau = tau;
    s.t = t;
    s.eta = eta;
    s.validate();
    s.n.assign(s.m.size(), 0.0);
    for (int l = 1; l <= s.k; ++l) {
      s.n[static_cast<std::size_t>(l)] = l < s.tau ? s.m[static_cast<std::size_t>(l)] / (1.0 + s.t)
                                                   : s.m[static_cast<std::size_t>(l)];
    }
    return s;
  }

  double u() const { return eta * q[static_cast<std::size_t>(tau)]; }

  /// E (y_p^j)^2 = xi'(q_{p+1}) - xi'(q_p).
  double increment_variance(const MixtureSpec& spec, int p) const {
    return xi_d1(spec, q[static_cast<std::size_t>(p) + 1]) - xi_d1(spec, q[static_cast<std::size_t>(p)]);
  }

  /// E y_p^1 y_p^2: eta t v_p below tau, 0 from tau on.
  double cross_covariance(const MixtureSpec& spec, int p) const {
    return p < tau ? eta * t * increment_variance(spec, p) : 0.0;
  }

  /// Variance of (y_p^1 + s y_p^2)/sqrt(2) for s = +1 (branch 1) or -1 (branch 2).
  double rotated_variance(const MixtureSpec& spec, int p, int branch) const {
    const double sign = branch == 1 ? 1.0 : -1.0;
    const double v = increment_variance(spec, p);
    return p < tau ? (1.0 + sign * eta * t) * v : v;
  }

 private:
  void validate() const {
    if (k < 0) throw ArgumentError("RSBSchedule: need at least one level");
    if (q.size() != m.size() + 1) throw ArgumentError("RSBSchedule: q must have k+2 entries");
    if (m.front() != 0.0) throw ArgumentError("RSBSchedule: m_0 must be 0");
    for (std::size_t i = 1; i < m.size(); ++i) {
      if (!(m[i] >= m[i - 1] && m[i] <= 1.0)) throw ArgumentError("RSBSchedule: m must be nondecreasing in [0,1]");
    }
    if (q.front() != 0.0 || q.back() != 1.0) throw ArgumentError("RSBSchedule: need q_0 = 0 and q_{k+1} = 1");
    for (std::size_t i = 1; i < q.size(); ++i) {
      if (!(q[i] >= q[i - 1])) throw ArgumentError("RSBSchedule: q must be nondecreasing");
    }
    if (tau < 0 || tau > k + 1) throw ArgumentError("RSBSchedule: tau must lie in [0, k+1]");
    if (!(t > 0.0 && t <= 1.0)) throw ArgumentError("RSBSchedule: t must lie in (0,1]");
    if (eta != 1 && eta != -1) throw ArgumentError("RSBSchedule: eta must be +1 or -1");
  }
};

/// Schedule for the step function x at overlap u: |u| becomes a breakpoint
/// q_tau, and a zero-width level with m_0 = 0 is prepended when x(0) > 0.
inline RSBSchedule make_schedule(const StepOrderParameter& x, double u, double t) {
  if (!(std::abs(u) <= 1.0)) throw ArgumentError("make_schedule: u must lie in [-1,1]");
  const double ua = std::abs(u);
  const auto refined = insert_breakpoint(x, ua);
  std::vector<double> m, q;
  if (refined.m(0) > 0.0) {
    m.push_back(0.0);
    q.push_back(0.0);
  }
  for (const auto& bp : refined.pieces()) {
    m.push_back(bp.m);
    q.push_back(bp.q);
  }
  q.push_back(1.0);
  int tau = static_cast<int>(q.size()) - 1;
  for (std::size_t i = 0; i < q.size(); ++i) {
    if (q[i] == ua) {
      tau = static_cast<int>(i);
      break;
    }
  }
  return RSBSchedule::make(std::move(m), std::move(q), tau, t, u < 0.0 ? -1 : 1);
}

/// (1/n) log E exp (n/2L)(y + sqrt(v) z)^2 for standard Gaussian z.
inline double gaussian_exp_identity(double n, double L, double v, double y) {
  if (!(n >= 0.0) || !(v >= 0.0)) throw ArgumentError("gaussian_exp_identity: need n >= 0 and v >= 0");
  if (!(L > 0.0)) throw ArgumentError("gaussian_exp_identity: need L > 0");
  if (n == 0.0) return y * y / (2.0 * L) + v / (2.0 * L);
  if (!(n * v < L)) throw DivergenceError("gaussian_exp_identity: n v >= L, the moment is infinite");
  return y * y / (2.0 * (L - n * v)) - std::log1p(-n * v / L) / (2.0 * n);
}

namespace detail {

// L_p for one branch: b -/+ lambda minus the accumulated n_l s_l from level p up.
inline std::vector<double> branch_denominators(const RSBSchedule& s, const MixtureSpec& spec, double b,
                                               double lambda, int branch) {
  const double sign = branch == 1 ? 1.0 : -1.0;
  std::vector<double> L(static_cast<std::size_t>(s.k) + 2);
  L[static_cast<std::size_t>(s.k) + 1] = b - sign * lambda;
  for (int p = s.k; p >= 0; --p) {
    L[static_cast<std::size_t>(p)] =
        L[static_cast<std::size_t>(p) + 1] - s.n[static_cast<std::size_t>(p)] * s.rotated_variance(spec, p, branch);
  }
  return L;
}

inline void check_branch(int branch) {
  if (branch != 1 && branch != 2) throw ArgumentError("J: branch must be 1 or 2");
}

}  // namespace detail

/// E J_1^branch(h + y_0^1, h + y_0^2, lambda) from the explicit log-ratio sums.
inline double closed_form_J(const RSBSchedule& s, const MixtureSpec& spec, double b, double lambda, int branch) {
  detail::check_branch(branch);
  const double sign = branch == 1 ? 1.0 : -1.0;
  const double base = b - sign * lambda;
  const double c = 1.0 + sign * s.eta * s.t;
  const auto K = static_cast<std::size_t>(s.k);
  const auto tau = static_cast<std::size_t>(s.tau);

  std::vector<double> v(K + 1);
  for (std::size_t p = 0; p <= K; ++p) v[p] = s.increment_variance(spec, static_cast<int>(p));
  // d'_p = sum_{p <= l <= tau-1} n_l v_l,  d_p = sum_{p <= l <= k} n_l v_l (p >= tau).
  std::vector<double> dprime(K + 2, 0.0), dtail(K + 2, 0.0);
  for (std::size_t p = K + 1; p-- > 0;) {
    if (p >= tau) dtail[p] = dtail[p + 1] + s.n[p] * v[p];
  }
  for (std::size_t p = tau; p-- > 0;) dprime[p] = dprime[p + 1] + s.n[p] * v[p];

  auto L = [&](std::size_t p) { return p <= tau ? base - (dtail[tau] + c * dprime[p]) : base - dtail[p]; };
  for (std::size_t p = 0; p <= K + 1; ++p) {
    if (!(L(p) > 0.0)) {
      throw DivergenceError("closed_form_J: denominator L_" + std::to_string(p) + " <= 0 (b - |lambda| too small)");
    }
  }

  double out = branch == 1 ? 2.0 * spec.h * spec.h / (2.0 * L(0)) : 0.0;
  for (std::size_t p = 0; p <= K; ++p) {
    const double np = s.n[p];
    if (np > 0.0) {
      out += 0.5 / np * std::log(L(p + 1) / L(p));
    } else {
      const double sp = (p < tau ? c : 1.0) * v[p];
      out += 0.5 * sp / L(p + 1);
    }
  }
  return out;
}

struct RecursiveJSettings {
  double tol = 1e-9;  // agreement between paired rules
  int max_levels = 4; // quadrature levels with nonzero variance
};

namespace detail {

struct RawRule {
  std::vector<double> x;
  std::vector<double> log_w;  // log w_i + x_i^2
};

inline RawRule raw_rule(int nodes) {
  const auto gh = gauss_hermite_rule(nodes);
  RawRule r;
  for (std::size_t i = 0; i < gh.nodes.size(); ++i) {
    r.x.push_back(gh.nodes[i]);
    r.log_w.push_back(std::log(gh.weights[i]) + gh.nodes[i] * gh.nodes[i]);
  }
  return r;
}

// E g(z), z ~ N(0,1), on nodes z_i = mu + sigma sqrt(2) x_i. The placement is
// chosen to follow the exponential tilt exp(n J_{p+1}) of the Gaussian.
struct NestedJ {
  const RSBSchedule& s;
  std::vector<double> sd;  // rotated increment standard deviations
  std::vector<double> L;   // branch denominators, used for node placement only
  double spread;
  const RawRule& rule;

  double operator()(int p, double w) const {
    if (p == s.k + 1) return w * w / (2.0 * L.back());
    const auto i = static_cast<std::size_t>(p);
    const double sdp = sd[i];
    if (sdp == 0.0) return (*this)(p + 1, w);
    const double np = s.n[i];
    const double mu = np * sdp * w / L[i];
    const double sigma = spread * std::sqrt(L[i + 1] / L[i]);
    const double log_norm = std::log(sigma) - 0.5 * std::log(std::numbers::pi);
    const std::size_t m = rule.x.size();
    std::vector<double> terms(m);
    double top = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < m; ++j) {
      const double z = mu + sigma * std::numbers::sqrt2 * rule.x[j];
      const double lw = rule.log_w[j] + log_norm - 0.5 * z * z;
      const double next = (*this)(p + 1, w + sdp * z);
      terms[j] = np == 0.0 ? lw : lw + np * next;
      if (np == 0.0) terms[j] = std::exp(lw) * next;
      else top = std::max(top, terms[j]);
    }
    if (np == 0.0) {
      double acc = 0.0;
      for (double tv : terms) acc += tv;
      return acc;
    }
    // (1/n) log sum_j exp(terms_j), with max subtraction.
    double acc = 0.0;
    for (double tv : terms) acc += std::exp(tv - top);
    return (top + std::log(acc)) / np;
  }
};

}  // namespace detail

/// E J_1^branch by nested Gauss-Hermite quadrature over the rotated increments
/// (y^1 +/- y^2)/sqrt(2). Rules of 32 and 48 nodes must agree to settings.tol;
/// otherwise the node spread is widened and the rule size doubled.
inline double recursive_J(const RSBSchedule& s, const MixtureSpec& spec, double b, double lambda, int branch,
                          const RecursiveJSettings& settings = {}) {
  detail::check_branch(branch);
  const auto L = detail::branch_denominators(s, spec, b, lambda, branch);
  for (std::size_t p = 0; p < L.size(); ++p) {
    if (!(L[p] > 0.0)) {
      throw DivergenceError("recursive_J: n_p v_p exhausts b -/+ lambda at level " + std::to_string(p));
    }
  }
  std::vector<double> sd(static_cast<std::size_t>(s.k) + 1);
  int active = 0;
  for (int p = 0; p <= s.k; ++p) {
    const double var = s.rotated_variance(spec, p, branch);
    sd[static_cast<std::size_t>(p)] = std::sqrt(std::max(var, 0.0));
    if (var > 0.0) ++active;
  }
  if (active > settings.max_levels) {
    throw ArgumentError("recursive_J: too many quadrature levels (" + std::to_string(active) + ")");
  }
  const double w0 = branch == 1 ? std::numbers::sqrt2 * spec.h : 0.0;

  constexpr std::array<double, 3> spreads{1.25, 1.6, 2.2};
  constexpr std::array<std::pair<int, int>, 2> sizes{{{32, 48}, {64, 96}}};
  double last = std::numeric_limits<double>::quiet_NaN();
  for (const auto& [n1, n2] : sizes) {
    const auto r1 = detail::raw_rule(n1);
    const auto r2 = detail::raw_rule(n2);
    for (double spread : spreads) {
      const double v1 = detail::NestedJ{s, sd, L, spread, r1}(0, w0);
      const double v2 = detail::NestedJ{s, sd, L, spread, r2}(0, w0);
      last = v2;
      if (std::isfinite(v1) && std::isfinite(v2) && std::abs(v1 - v2) <= settings.tol * (1.0 + std::abs(v2))) {
        return v2;
      }
    }
  }
  throw NumericalFailure("recursive_J: quadrature did not converge (last value " + std::to_string(last) + ")");
}

/// log sqrt(b^2/(b^2 - lambda^2)) + E J_1^1 + E J_1^2, i.e. N^{-1} E B_1.
inline double assemble_B(const RSBSchedule& s, const MixtureSpec& spec, double b, double lambda) {
  if (!(b > std::abs(lambda))) throw DivergenceError("assemble_B: need b > |lambda|");
  return -0.5 * std::log1p(-(lambda / b) * (lambda / b)) + closed_form_J(s, spec, b, lambda, 1) +
         closed_form_J(s, spec, b, lambda, 2);
}

/// (1+t) sum_{p<tau} n_p dtheta_p + sum_{p>=tau} n_p dtheta_p.
inline double theta_sum(const RSBSchedule& s, const MixtureSpec& spec) {
  double acc = 0.0;
  for (int p = 0; p <= s.k; ++p) {
    const auto i = static_cast<std::size_t>(p);
    const double dtheta = theta_eval(spec, s.q[i + 1]) - theta_eval(spec, s.q[i]);
    acc += (p < s.tau ? 1.0 + s.t : 1.0) * s.n[i] * dtheta;
  }
  return acc;
}

/// Right-hand side of the coupled bound after N -> infinity:
/// -lambda u + (b - 1 - log b) + N^{-1} E B_1 - theta_sum.
inline double guerra_bound(const RSBSchedule& s, const MixtureSpec& spec, double b, double lambda) {
  return -lambda * s.u() + b - 1.0 - std::log(b) + assemble_B(s, spec, b, lambda) - theta_sum(s, spec);
}

/// -N^{-1} log P(chi^2_N >= N b).
inline double tau_chi(long long N, double b) {
  if (N < 1) throw ArgumentError("tau_chi: N must be >= 1");
  if (!(b > 0.0)) throw ArgumentError("tau_chi: b must be positive");
  const double a = 0.5 * static_cast<double>(N);
  return -detail::log_gamma_q(a, a * b) / static_cast<double>(N);
}

/// Large-deviation limit (b - 1 - log b)/2.
inline double tau_limit(double b) { return 0.5 * (b - 1.0 - std::log(b)); }

// ---------------------------------------------------------------------------
// Random admissible cases for the recursion-vs-closed-form suite.

struct OracleCase {
  MixtureSpec spec;
  RSBSchedule schedule;
  double b = 1.0;
  double lambda = 0.0;
};

struct OracleCaseResult {
  std::array<double, 2> closed{};
  std::array<double, 2> recursive{};
  double abs_error = 0.0;  // max over branches
};

/// k in {0,1,2}; b exceeds d(0) + |lambda| by a margin in [0.3, 2].
inline OracleCase random_oracle_case(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  OracleCase c;
  c.spec.terms.push_back({1, 0.2 + 1.3 * unif(rng)});
  if (unif(rng) < 0.5) c.spec.terms.push_back({2, unif(rng)});
  c.spec.h = 2.0 * unif(rng) - 1.0;

  const int k = static_cast<int>(unif(rng) * 3.0) % 3;
  std::vector<double> qs(static_cast<std::size_t>(k));
  for (auto& v : qs) v = unif(rng);
  std::sort(qs.begin(), qs.end());
  std::vector<double> q{0.0};
  q.insert(q.end(), qs.begin(), qs.end());
  q.push_back(1.0);
  std::vector<double> ms(static_cast<std::size_t>(k));
  for (auto& v : ms) v = unif(rng);
  std::sort(ms.begin(), ms.end());
  if (k > 0 && unif(rng) < 0.5) ms.back() = 1.0;
  std::vector<double> m{0.0};
  m.insert(m.end(), ms.begin(), ms.end());

  const int tau = static_cast<int>(unif(rng) * (k + 2)) % (k + 2);
  const double t = 0.05 + 0.9 * unif(rng);
  int eta = unif(rng) < 0.5 ? -1 : 1;
  if (q[static_cast<std::size_t>(tau)] == 0.0) eta = 1;
  c.schedule = RSBSchedule::make(std::move(m), std::move(q), tau, t, eta);

  // d(0) = sum_l m_l v_l for the underlying step function.
  double d0 = 0.0;
  for (int p = 0; p <= k; ++p) d0 += c.schedule.m[static_cast<std::size_t>(p)] * c.schedule.increment_variance(c.spec, p);
  c.lambda = 2.0 * unif(rng) - 1.0;
  c.b = d0 + std::abs(c.lambda) + 0.3 + 1.7 * unif(rng);
  return c;
}

inline OracleCaseResult run_oracle_case(const OracleCase& c, const RecursiveJSettings& settings = {}) {
  OracleCaseResult r;
  for (int branch = 1; branch <= 2; ++branch) {
    const auto i = static_cast<std::size_t>(branch - 1);
    r.closed[i] = closed_form_J(c.schedule, c.spec, c.b, c.lambda, branch);
    r.recursive[i] = recursive_J(c.schedule, c.spec, c.b, c.lambda, branch, settings);
    r.abs_error = std::max(r.abs_error, std::abs(r.closed[i] - r.recursive[i]));
  }
  return r;
}

/// Generates `count` cases from `seed` and evaluates both routes on each.
inline std::vector<std::pair<OracleCase, OracleCaseResult>> run_oracle_suite(int count, std::uint64_t seed) {
  auto rng = detail::make_engine(seed, 0x6f7261636c65ULL);
  std::vector<std::pair<OracleCase, OracleCaseResult>> out;
  for (int i = 0; i < count; ++i) out.push_back({random_oracle_case(rng), {}});
  detail::parallel_for(out.size(), [&](std::size_t i) { out[i].second = run_oracle_case(out[i].first); });
  return out;
}

}  // namespace dchaos
