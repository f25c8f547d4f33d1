#pragma once

// Coupled two-system functional P_u(x,b,lambda), the fixed-point function
// f(u) = (h^2 + t xi'(u))/(b - d(0))^2 - u, its root u*, and the chaos gap
//
//   Delta(u) = 2 P(x,b) - min_lambda P_u(x,b,lambda)
//
// evaluated at the Crisanti-Sommers optimizer (x,b).

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "dchaos/cs_functional.hpp"
#include "dchaos/detail/parallel.hpp"
#include "dchaos/errors.hpp"
#include "dchaos/mixture.hpp"
#include "dchaos/order_param.hpp"

namespace dchaos {

struct ChaosPoint {
  double t = 0.5;
  double u = 0.0;
  int eta = 1;  // u = eta |u|, eta = +1 at u = 0
  double lambda = 0.0;
  double b = 1.0;

  static ChaosPoint make(double t, double u, double lambda, double b) {
    return {t, u, u < 0.0 ? -1 : 1, lambda, b};
  }
};

/// phi(q) = d(|u|) + (1-t)/(1+t) (d(q) - d(|u|)).
inline double phi_eval(const StepOrderParameter& x, const MixtureSpec& spec, double t, double u_abs,
                       double q) {
  return envelope_eval(x, spec, Envelope::shrunk(t, u_abs), q);
}

namespace detail {

inline void check_chaos_point(const ChaosPoint& pt) {
  if (!(pt.t > 0.0 && pt.t <= 1.0)) throw ArgumentError("ChaosPoint: t must lie in (0,1]");
  if (!(std::abs(pt.u) <= 1.0)) throw ArgumentError("ChaosPoint: u must lie in [-1,1]");
  if (pt.eta != 1 && pt.eta != -1) throw ArgumentError("ChaosPoint: eta must be +1 or -1");
  if ((pt.u < 0.0 && pt.eta != -1) || (pt.u >= 0.0 && pt.eta != 1)) {
    throw ArgumentError("ChaosPoint: eta inconsistent with sign of u");
  }
}

template <class Fn>
double labelled(const char* term, Fn&& fn) {
  try {
    return fn();
  } catch (const AdmissibilityError& e) {
    throw AdmissibilityError(std::string("coupled_value: ") + term + ": " + e.what(), e.location());
  }
}

}  // namespace detail

/// P_u(x,b,lambda), every integral in closed form.
inline double coupled_value(const MixtureSpec& spec, const StepOrderParameter& x, const ChaosPoint& pt) {
  detail::check_chaos_point(pt);
  const double t = pt.t, b = pt.b, lam = pt.lambda, eta = pt.eta;
  const double ua = std::abs(pt.u);
  if (!(b > std::abs(lam))) {
    throw AdmissibilityError("coupled_value: log term needs b > |lambda|", 0.0);
  }
  const auto tail = Envelope::tail();
  const auto shrunk = Envelope::shrunk(t, ua);

  const double field_env = pt.u >= 0.0 ? d_eval(x, spec, 0.0) : phi_eval(x, spec, t, ua, 0.0);
  const double field_den = b - lam - field_env;
  if (!(field_den > 0.0)) {
    throw AdmissibilityError("coupled_value: field term denominator b - lambda - E(0) <= 0 at s=0", 0.0);
  }

  double v = -0.5 * std::log1p(-(lam / b) * (lam / b));
  v += spec.h * spec.h / field_den;
  v += 0.5 * (1.0 + t) *
       detail::labelled("(1+t)/2 integral over [0,|u|]",
                        [&] { return log_integral(x, spec, b, eta * lam, 0.0, ua, tail); });
  v += 0.5 * (1.0 - t) *
       detail::labelled("(1-t)/2 integral over [0,|u|]",
                        [&] { return log_integral(x, spec, b, -eta * lam, 0.0, ua, shrunk); });
  v += 0.5 * detail::labelled("b-lambda integral over [|u|,1]",
                              [&] { return log_integral(x, spec, b, lam, ua, 1.0, tail); });
  v += 0.5 * detail::labelled("b+lambda integral over [|u|,1]",
                              [&] { return log_integral(x, spec, b, -lam, ua, 1.0, tail); });
  v += -lam * pt.u + b - 1.0 - std::log(b) - weighted_integral(x, spec);
  return v;
}

/// f(u) = (h^2 + t xi'(u))/(b - d(0))^2 - u, xi' odd.
inline double f_eval(const MixtureSpec& spec, const StepOrderParameter& x, double b, double t, double u) {
  const double gap = b - d_eval(x, spec, 0.0);
  return (spec.h * spec.h + t * xi_d1(spec, u)) / (gap * gap) - u;
}

/// Unique root of f on [-u_x, u_x]; 0 exactly when h = 0.
inline double solve_u_star(const MixtureSpec& spec, const StepOrderParameter& x, double b, double t,
                           double tol = 1e-13) {
  if (!(t > 0.0 && t < 1.0)) throw ArgumentError("solve_u_star: t must lie in (0,1)");
  if (spec.h == 0.0) return 0.0;
  const double ux = support_min(x);
  auto f = [&](double u) { return f_eval(spec, x, b, t, u); };

  // No root on [-u_x, 0): f stays positive there.
  constexpr int scan = 200;
  for (int i = 0; i < scan; ++i) {
    const double u = -ux + ux * i / scan;
    if (!(f(u) > 0.0)) {
      throw PreconditionError("solve_u_star: f has a root in [-u_x, 0); (x,b) is not the optimizer");
    }
  }
  const double f0 = f(0.0);
  const double fu = f(ux);
  if (!(f0 > 0.0)) throw PreconditionError("solve_u_star: f(0) <= 0");
  if (std::abs(fu) <= tol) return ux;
  if (fu > 0.0) {
    throw PreconditionError("solve_u_star: no sign change on [0,u_x] (f(u_x) = " + std::to_string(fu) +
                            "); (x,b) is not the optimizer");
  }
  double lo = 0.0, hi = ux;
  double mid = 0.5 * (lo + hi);
  for (int it = 0; it < 400; ++it) {
    mid = 0.5 * (lo + hi);
    const double fm = f(mid);
    if (fm == 0.0) return mid;
    if (fm > 0.0) lo = mid;
    else hi = mid;
    if (hi - lo <= 4 * std::numeric_limits<double>::epsilon() * std::max(1e-300, hi)) break;
  }
  mid = 0.5 * (lo + hi);
  if (std::abs(f(mid)) > std::max(tol, 1e-15)) {
    throw NumericalFailure("solve_u_star: bisection did not reach |f| <= tol");
  }
  return mid;
}

/// max |d^2/dlambda^2 P_u| over |lambda| <= (b - d(0))/2 (21-point probe).
inline double curvature_bound(const MixtureSpec& spec, const StepOrderParameter& x, double b, double t,
                              double u) {
  const double half = 0.5 * (b - d_eval(x, spec, 0.0));
  const double h = 1e-4 * half;
  double worst = 0.0;
  for (int i = 0; i <= 20; ++i) {
    const double lam = -half + 2.0 * half * i / 20.0;
    const double lo = std::clamp(lam - h, -half, half);
    const double hi = std::clamp(lam + h, -half, half);
    const double mid = 0.5 * (lo + hi);
    const double step = 0.5 * (hi - lo);
    const double c = (coupled_value(spec, x, ChaosPoint::make(t, u, hi, b)) -
                      2.0 * coupled_value(spec, x, ChaosPoint::make(t, u, mid, b)) +
                      coupled_value(spec, x, ChaosPoint::make(t, u, lo, b))) /
                     (step * step);
    worst = std::max(worst, std::abs(c));
  }
  return worst;
}

struct ChaosGap {
  double gap = 0.0;
  double lambda_star = 0.0;
  double two_p = 0.0;
  bool boundary = false;  // minimizer within 1e-4 of the admissible edge
  std::vector<std::string> warnings;
};

struct ChaosGapSettings {
  double margin = 1e-6;
  double lambda_resolution = 1e-8;
  int grid_points = 201;
  double agreement_tol = 1e-7;
};

/// Delta(u) and the minimizing lambda. t must lie in (0,1).
inline ChaosGap chaos_gap(const MixtureSpec& spec, const StepOrderParameter& x, double b, double t, double u,
                          const ChaosGapSettings& cfg = {}) {
  if (!(t > 0.0 && t < 1.0)) {
    throw ArgumentError("chaos_gap: t must lie strictly inside (0,1); the gap is only certified for decoupled disorder");
  }
  if (!(std::abs(u) <= 1.0)) throw ArgumentError("chaos_gap: u must lie in [-1,1]");
  ChaosGap out;
  out.two_p = 2.0 * cs_value(spec, x, b);
  const double half = b - d_eval(x, spec, 0.0);
  const double lo = -half + cfg.margin;
  const double hi = half - cfg.margin;
  auto value = [&](double lam) { return coupled_value(spec, x, ChaosPoint::make(t, u, lam, b)); };

  auto golden = [&](double a, double c) {
    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double x1 = c - inv_phi * (c - a);
    double x2 = a + inv_phi * (c - a);
    double f1 = value(x1), f2 = value(x2);
    while (c - a > cfg.lambda_resolution) {
      if (f1 <= f2) {
        c = x2;
        x2 = x1;
        f2 = f1;
        x1 = c - inv_phi * (c - a);
        f1 = value(x1);
      } else {
        a = x1;
        x1 = x2;
        f1 = f2;
        x2 = a + inv_phi * (c - a);
        f2 = value(x2);
      }
    }
    return f1 <= f2 ? std::pair{x1, f1} : std::pair{x2, f2};
  };

  auto [lam_best, v_best] = golden(lo, hi);
  const double v0 = value(0.0);
  if (v0 < v_best) {
    lam_best = 0.0;
    v_best = v0;
  }

  // Dense-grid guard against multimodality.
  double grid_lam = lo, grid_val = std::numeric_limits<double>::infinity();
  const int n = std::max(cfg.grid_points, 3);
  for (int i = 0; i < n; ++i) {
    const double lam = lo + (hi - lo) * i / (n - 1);
    const double v = value(lam);
    if (v < grid_val) {
      grid_val = v;
      grid_lam = lam;
    }
  }
  if (v_best > grid_val + cfg.agreement_tol) {
    out.warnings.push_back("chaos_gap: golden-section and grid minima disagree at u=" + std::to_string(u));
    const double w = (hi - lo) / (n - 1);
    auto refined = golden(std::max(lo, grid_lam - w), std::min(hi, grid_lam + w));
    lam_best = refined.first;
    v_best = refined.second;
    if (grid_val < v_best) {
      lam_best = grid_lam;
      v_best = grid_val;
    }
  }
  out.lambda_star = lam_best;
  out.gap = out.two_p - v_best;
  out.boundary = std::abs(lam_best) > half - 1e-4;
  if (out.boundary) {
    out.warnings.push_back("chaos_gap: minimizing lambda hugs the admissible boundary at u=" + std::to_string(u));
  }
  return out;
}

struct ChaosGapCurve {
  std::vector<double> grid;
  std::vector<double> gaps;
  std::vector<double> lambda_star;
  std::vector<bool> boundary;
  double u_star = 0.0;
  double u_x = 0.0;
  double two_p = 0.0;
  double t = 0.5;
  CSOptimum optimum;
  std::vector<std::string> warnings;

  /// Smallest gap over grid points with |u - u*| >= radius (+inf if none).
  double min_gap_off(double radius) const {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < grid.size(); ++i) {
      if (std::abs(grid[i] - u_star) >= radius - 1e-12) best = std::min(best, gaps[i]);
    }
    return best;
  }
};

/// Uniform grid on [-1,1] with the given spacing (endpoints included).
inline std::vector<double> uniform_u_grid(double step = 0.05) {
  if (!(step > 0.0 && step <= 2.0)) throw ArgumentError("uniform_u_grid: step must lie in (0,2]");
  const int n = static_cast<int>(std::llround(2.0 / step));
  std::vector<double> g;
  for (int i = 0; i <= n; ++i) g.push_back(std::clamp(-1.0 + 2.0 * i / n, -1.0, 1.0));
  return g;
}

/// Sweeps chaos_gap over `grid` (augmented with +-u_x and u*) at a given optimizer.
inline ChaosGapCurve chaos_curve(const MixtureSpec& spec, const CSOptimum& opt, double t,
                                 std::vector<double> grid, const ChaosGapSettings& cfg = {}) {
  ChaosGapCurve curve;
  curve.t = t;
  curve.optimum = opt;
  curve.u_x = support_min(opt.x_star);
  curve.u_star = solve_u_star(spec, opt.x_star, opt.b_star, t);
  curve.two_p = 2.0 * cs_value(spec, opt.x_star, opt.b_star);
  grid.push_back(curve.u_x);
  grid.push_back(-curve.u_x);
  grid.push_back(curve.u_star);
  for (double u : grid) {
    if (!(std::abs(u) <= 1.0)) throw ArgumentError("chaos_curve: grid values must lie in [-1,1]");
  }
  std::sort(grid.begin(), grid.end());
  std::vector<double> uniq;
  for (double u : grid) {
    if (uniq.empty() || u - uniq.back() > 1e-12) uniq.push_back(u);
    else if (u == curve.u_star || u == curve.u_x || u == -curve.u_x) uniq.back() = u;
  }
  curve.grid = std::move(uniq);
  const std::size_t n = curve.grid.size();
  std::vector<ChaosGap> gaps(n);
  detail::parallel_for(n, [&](std::size_t i) {
    gaps[i] = chaos_gap(spec, opt.x_star, opt.b_star, t, curve.grid[i], cfg);
  });
  for (auto& g : gaps) {
    curve.gaps.push_back(g.gap);
    curve.lambda_star.push_back(g.lambda_star);
    curve.boundary.push_back(g.boundary);
    for (auto& w : g.warnings) curve.warnings.push_back(std::move(w));
  }
  return curve;
}

/// Runs optimize_cs once, then sweeps the grid.
inline ChaosGapCurve chaos_curve(const MixtureSpec& spec, double t, std::vector<double> grid,
                                 const OptimizerSettings& settings = {}, const ChaosGapSettings& cfg = {}) {
  return chaos_curve(spec, optimize_cs(spec, settings), t, std::move(grid), cfg);
}

}  // namespace dchaos
