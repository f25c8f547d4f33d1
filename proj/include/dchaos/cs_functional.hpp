#pragma once

// Crisanti-Sommers functional
//
//   P(x,b) = 1/2 ( h^2/(b-d(0)) + int_0^1 xi''(q)/(b-d(q)) dq
//                  + b - 1 - log b - int_0^1 q xi''(q) x(q) dq )
//
// and its minimization over step order parameters with at most k_max levels.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "dchaos/detail/nelder_mead.hpp"
#include "dchaos/detail/parallel.hpp"
#include "dchaos/detail/rng.hpp"
#include "dchaos/errors.hpp"
#include "dchaos/mixture.hpp"
#include "dchaos/order_param.hpp"

namespace dchaos {

struct OptimizerSettings {
  int k_max = 6;
  double tol_k = 1e-9;
  double grad_tol = 1e-6;
  int random_starts = 4;
  std::uint64_t seed = 20140613;
  std::size_t max_evals = 400000;  // per Nelder-Mead run
};

struct CSOptimum {
  StepOrderParameter x_star = StepOrderParameter::constant(1.0);
  double b_star = 1.0;
  double value = 0.0;
  int k_used = 0;
  std::vector<double> stationarity_residuals;  // interior coordinates only
  std::vector<std::string> residual_labels;
  double support_residual = 0.0;
  double u_x = 0.0;
  /// Which lower bound on b is larger at the optimum: "1" or "d(0)".
  std::string binding_lower_bound = "1";
  /// Best value found for each k = 0..k_used+1 (last entry is the refinement
  /// that failed to improve, when the loop stopped on tol_k).
  std::vector<double> values_by_k;
};

/// Optimization did not meet its stationarity target; carries the incumbent.
class OptimizationFailure : public NumericalFailure {
 public:
  OptimizationFailure(const std::string& what, CSOptimum best)
      : NumericalFailure(what), best_(std::move(best)) {}
  const CSOptimum& best() const noexcept { return best_; }

 private:
  CSOptimum best_;
};

namespace detail {

// Unchecked evaluation; NaN when (x,b) is not admissible.
inline double cs_value_raw(const MixtureSpec& spec, const StepOrderParameter& x, double b) {
  const double d0 = d_eval(x, spec, 0.0);
  if (!(b > d0) || !(b >= 1.0)) return std::numeric_limits<double>::quiet_NaN();
  const double integral = log_integral(x, spec, b, 0.0, 0.0, 1.0, Envelope::tail());
  return 0.5 * (spec.h * spec.h / (b - d0) + integral + b - 1.0 - std::log(b) -
                weighted_integral(x, spec));
}

}  // namespace detail

/// P(x,b). Requires b > d(0) and b >= 1 (b = 1 is the closed limit point).
inline double cs_value(const MixtureSpec& spec, const StepOrderParameter& x, double b) {
  const double d0 = d_eval(x, spec, 0.0);
  if (!(b >= 1.0)) {
    throw AdmissibilityError("cs_value: constraint b >= 1 violated (b=" + std::to_string(b) + ")", 0.0);
  }
  if (!(b > d0)) {
    throw AdmissibilityError("cs_value: constraint b > d(0) violated (b=" + std::to_string(b) +
                                 ", d(0)=" + std::to_string(d0) + ")",
                             0.0);
  }
  return detail::cs_value_raw(spec, x, b);
}

/// Residual of the support equation (h^2 + xi'(u_x))/(b - d(0))^2 - u_x.
inline double support_residual(const MixtureSpec& spec, const StepOrderParameter& x, double b,
                               double support_tol = 1e-12) {
  const double ux = support_min(x, support_tol);
  const double gap = b - d_eval(x, spec, 0.0);
  return (spec.h * spec.h + xi_d1(spec, ux)) / (gap * gap) - ux;
}

namespace detail {

inline double sigmoid(double a) {
  a = std::clamp(a, -40.0, 40.0);
  return 1.0 / (1.0 + std::exp(-a));
}

inline double logit(double p) {
  p = std::clamp(p, 1e-9, 1.0 - 1e-9);
  return std::log(p / (1.0 - p));
}

// Step order parameters with k+1 levels and top level m_k = 1, optionally with
// m_0 pinned at 0 (support bounded away from the origin). Free coordinates,
// all unconstrained:
//   q_1..q_k        stick-breaking logits,  q_{l+1} = q_l + (1-q_l) sigmoid(a)
//   m_0..m_{k-1}    stick-breaking logits  (m_0 omitted when pinned)
//   b               log(b - max{1, d(0)})
struct LevelFamily {
  int k = 0;
  bool zero_floor = false;

  std::size_t dim() const {
    return static_cast<std::size_t>(k) + static_cast<std::size_t>(zero_floor ? k - 1 : k) + 1;
  }

  struct Point {
    std::vector<Breakpoint> pieces;
    double b = 1.0;
  };

  Point decode(const MixtureSpec& spec, const std::vector<double>& theta) const {
    Point pt;
    pt.pieces.resize(static_cast<std::size_t>(k) + 1);
    std::size_t i = 0;
    double q = 0.0;
    pt.pieces[0].q = 0.0;
    for (int l = 1; l <= k; ++l) {
      q = q + (1.0 - q) * sigmoid(theta[i++]);
      pt.pieces[static_cast<std::size_t>(l)].q = std::min(q, 1.0);
    }
    double m = 0.0;
    for (int l = 0; l < k; ++l) {
      if (l == 0 && zero_floor) {
        m = 0.0;
      } else {
        m = m + (1.0 - m) * sigmoid(theta[i++]);
      }
      pt.pieces[static_cast<std::size_t>(l)].m = std::min(m, 1.0);
    }
    pt.pieces[static_cast<std::size_t>(k)].m = 1.0;
    const StepOrderParameter x(pt.pieces);
    const double lb = std::max(1.0, d_eval(x, spec, 0.0));
    pt.b = lb + std::exp(std::clamp(theta[i], -700.0, 50.0));
    return pt;
  }

  // Inverse of decode; levels must already have this family's shape.
  std::vector<double> encode(const MixtureSpec& spec, const std::vector<Breakpoint>& pieces,
                             double b) const {
    std::vector<double> theta;
    theta.reserve(dim());
    double q = 0.0;
    for (int l = 1; l <= k; ++l) {
      const double next = pieces[static_cast<std::size_t>(l)].q;
      theta.push_back(logit(q < 1.0 ? (next - q) / (1.0 - q) : 0.5));
      q = next;
    }
    double m = 0.0;
    for (int l = 0; l < k; ++l) {
      const double next = pieces[static_cast<std::size_t>(l)].m;
      if (!(l == 0 && zero_floor)) theta.push_back(logit(m < 1.0 ? (next - m) / (1.0 - m) : 0.5));
      m = l == 0 && zero_floor ? 0.0 : next;
    }
    const StepOrderParameter x(pieces);
    const double lb = std::max(1.0, d_eval(x, spec, 0.0));
    theta.push_back(std::log(std::max(b - lb, 1e-12)));
    return theta;
  }

  double objective(const MixtureSpec& spec, const std::vector<double>& theta) const {
    const Point pt = decode(spec, theta);
    const double v = cs_value_raw(spec, StepOrderParameter(pt.pieces), pt.b);
    return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
  }
};

// Splits piece `at` of a (k)-level point into two equal-valued pieces, giving a
// (k+1)-level point representing the same function.
inline std::vector<Breakpoint> split_piece(const std::vector<Breakpoint>& pieces, std::size_t at) {
  std::vector<Breakpoint> out = pieces;
  const double lo = pieces[at].q;
  const double hi = at + 1 < pieces.size() ? pieces[at + 1].q : 1.0;
  out.insert(out.begin() + static_cast<std::ptrdiff_t>(at) + 1, Breakpoint{0.5 * (lo + hi), pieces[at].m});
  return out;
}

// Shape a point to a family: top level forced to 1, floor pinned if requested.
inline std::vector<Breakpoint> conform(std::vector<Breakpoint> pieces, const LevelFamily& fam) {
  if (pieces.size() != static_cast<std::size_t>(fam.k) + 1) return {};
  pieces.back().m = 1.0;
  if (fam.zero_floor) pieces.front().m = 0.0;
  return pieces;
}

struct FamilyResult {
  LevelFamily family;
  std::vector<Breakpoint> pieces;
  double b = 1.0;
  double value = std::numeric_limits<double>::infinity();
};

inline FamilyResult optimize_family(const MixtureSpec& spec, const LevelFamily& fam,
                                    const std::vector<std::vector<double>>& seeds,
                                    const OptimizerSettings& settings) {
  NelderMeadOptions opt;
  opt.max_evals = settings.max_evals;
  std::vector<NelderMeadResult> runs(seeds.size());
  parallel_for(seeds.size(), [&](std::size_t i) {
    runs[i] = nelder_mead([&](const std::vector<double>& th) { return fam.objective(spec, th); },
                          seeds[i], opt);
  });
  FamilyResult out;
  out.family = fam;
  for (const auto& r : runs) {
    if (r.value < out.value) {
      out.value = r.value;
      const auto pt = fam.decode(spec, r.x);
      out.pieces = pt.pieces;
      out.b = pt.b;
    }
  }
  return out;
}

inline std::vector<std::vector<double>> family_seeds(const MixtureSpec& spec, const LevelFamily& fam,
                                                     const std::vector<Breakpoint>* previous,
                                                     double previous_b,
                                                     const OptimizerSettings& settings) {
  std::vector<std::vector<double>> seeds;
  if (previous != nullptr) {
    if (previous->size() == static_cast<std::size_t>(fam.k) + 1) {
      auto shaped = conform(*previous, fam);
      if (!shaped.empty()) seeds.push_back(fam.encode(spec, shaped, previous_b));
    } else {
      for (std::size_t at = 0; at < previous->size(); ++at) {
        auto shaped = conform(split_piece(*previous, at), fam);
        if (!shaped.empty()) seeds.push_back(fam.encode(spec, shaped, previous_b));
      }
    }
  }
  auto rng = make_engine(settings.seed,
                         static_cast<std::uint64_t>(fam.k) * 2 + (fam.zero_floor ? 1 : 0));
  std::normal_distribution<double> normal(0.0, 1.5);
  for (int r = 0; r < settings.random_starts; ++r) {
    std::vector<double> th(fam.dim());
    for (auto& v : th) v = normal(rng);
    th.back() = 0.5 * normal(rng);
    seeds.push_back(std::move(th));
  }
  return seeds;
}

// Central-difference partial derivatives of P in natural coordinates.
inline void stationarity(const MixtureSpec& spec, CSOptimum& opt) {
  opt.stationarity_residuals.clear();
  opt.residual_labels.clear();
  const auto& pieces = opt.x_star.pieces();
  const std::size_t levels = pieces.size();
  constexpr double step = 1e-6;
  constexpr double margin = 4 * step;
  auto eval = [&](const std::vector<Breakpoint>& p, double b) {
    return cs_value_raw(spec, StepOrderParameter(p), b);
  };
  auto record = [&](std::string label, double plus, double minus) {
    opt.residual_labels.push_back(std::move(label));
    opt.stationarity_residuals.push_back((plus - minus) / (2 * step));
  };
  for (std::size_t l = 1; l < levels; ++l) {
    const double lo = pieces[l - 1].q;
    const double hi = l + 1 < levels ? pieces[l + 1].q : 1.0;
    if (pieces[l].q - lo <= margin || hi - pieces[l].q <= margin) continue;
    if (pieces[l].m == pieces[l - 1].m) continue;
    auto p = pieces;
    p[l].q += step;
    const double plus = eval(p, opt.b_star);
    p[l].q -= 2 * step;
    record("q" + std::to_string(l), plus, eval(p, opt.b_star));
  }
  for (std::size_t l = 0; l + 1 < levels; ++l) {
    const double lo = l > 0 ? pieces[l - 1].m : 0.0;
    const double hi = pieces[l + 1].m;
    if (pieces[l].m - lo <= margin || hi - pieces[l].m <= margin) continue;
    const double width = pieces[l + 1].q - pieces[l].q;
    if (width <= margin) continue;
    auto p = pieces;
    p[l].m += step;
    const double plus = eval(p, opt.b_star);
    p[l].m -= 2 * step;
    record("m" + std::to_string(l), plus, eval(p, opt.b_star));
  }
  const double lb = std::max(1.0, d_eval(opt.x_star, spec, 0.0));
  if (opt.b_star - lb > margin) {
    record("b", eval(pieces, opt.b_star + step), eval(pieces, opt.b_star - step));
  }
}

inline CSOptimum finalize(const MixtureSpec& spec, const FamilyResult& fr) {
  CSOptimum opt;
  opt.x_star = canonicalize(StepOrderParameter(fr.pieces));
  opt.b_star = fr.b;
  opt.value = cs_value(spec, opt.x_star, opt.b_star);
  opt.k_used = fr.family.k;
  opt.u_x = support_min(opt.x_star);
  opt.support_residual = support_residual(spec, opt.x_star, opt.b_star);
  opt.binding_lower_bound = d_eval(opt.x_star, spec, 0.0) > 1.0 ? "d(0)" : "1";
  stationarity(spec, opt);
  return opt;
}

// Degenerate xi == 0: P is independent of x, only b is optimized.
inline CSOptimum optimize_field_only(const MixtureSpec& spec) {
  const auto x = StepOrderParameter::constant(1.0);
  auto value = [&](double b) { return cs_value_raw(spec, x, b); };
  double lo = 1.0;
  double hi = 2.0 + 2.0 * std::abs(spec.h);
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = hi - inv_phi * (hi - lo);
  double d = lo + inv_phi * (hi - lo);
  double fc = value(c);
  double fd = value(d);
  while (hi - lo > 1e-12) {
    if (fc <= fd) {
      hi = d;
      d = c;
      fd = fc;
      c = hi - inv_phi * (hi - lo);
      fc = value(c);
    } else {
      lo = c;
      c = d;
      fc = fd;
      d = lo + inv_phi * (hi - lo);
      fd = value(d);
    }
  }
  double b = 0.5 * (lo + hi);
  if (value(1.0) <= value(b)) b = 1.0;
  CSOptimum opt;
  opt.x_star = x;
  opt.b_star = b;
  opt.value = value(b);
  opt.k_used = 0;
  opt.u_x = 0.0;
  opt.support_residual = support_residual(spec, x, b);
  opt.binding_lower_bound = "1";
  if (b > 1.0 + 1e-6) {
    constexpr double step = 1e-6;
    opt.residual_labels = {"b"};
    opt.stationarity_residuals = {(value(b + step) - value(b - step)) / (2 * step)};
  }
  opt.values_by_k = {opt.value};
  return opt;
}

inline FamilyResult optimize_level(const MixtureSpec& spec, int k, const FamilyResult* previous,
                                   const OptimizerSettings& settings) {
  FamilyResult best;
  const std::vector<Breakpoint>* prev_pieces = previous ? &previous->pieces : nullptr;
  const double prev_b = previous ? previous->b : 1.0;
  if (k == 0) {
    const LevelFamily fam{0, false};
    return optimize_family(spec, fam, family_seeds(spec, fam, prev_pieces, prev_b, settings), settings);
  }
  const LevelFamily pinned{k, true};
  const LevelFamily free_floor{k, false};
  auto a = optimize_family(spec, pinned, family_seeds(spec, pinned, prev_pieces, prev_b, settings), settings);
  auto b = optimize_family(spec, free_floor, family_seeds(spec, free_floor, prev_pieces, prev_b, settings),
                           settings);
  // Prefer the pinned floor (exact support edge) unless the free floor is
  // genuinely better.
  return a.value <= b.value + settings.tol_k ? a : b;
}

}  // namespace detail

/// Best CS value over step order parameters with exactly k+1 levels (top level 1).
inline CSOptimum optimize_cs_fixed_k(const MixtureSpec& spec, int k, const OptimizerSettings& settings = {}) {
  if (k < 0) throw ArgumentError("optimize_cs_fixed_k: k must be >= 0");
  if (is_degenerate(spec)) return detail::optimize_field_only(spec);
  detail::FamilyResult prev;
  bool have_prev = false;
  for (int j = 0; j <= k; ++j) {
    auto cur = detail::optimize_level(spec, j, have_prev ? &prev : nullptr, settings);
    if (!std::isfinite(cur.value)) throw NumericalFailure("optimize_cs: no admissible b found");
    prev = std::move(cur);
    have_prev = true;
  }
  auto opt = detail::finalize(spec, prev);
  opt.values_by_k = {prev.value};
  return opt;
}

/// Minimizes P over (x,b): k = 0,1,2,... levels until the improvement drops
/// below settings.tol_k or k_max is reached.
inline CSOptimum optimize_cs(const MixtureSpec& spec, const OptimizerSettings& settings = {}) {
  const auto report = validate(spec);
  if (!report.valid) throw ArgumentError("optimize_cs: invalid mixture: " + report.issues.front());
  if (is_degenerate(spec)) return detail::optimize_field_only(spec);

  auto best = detail::optimize_level(spec, 0, nullptr, settings);
  if (!std::isfinite(best.value)) throw NumericalFailure("optimize_cs: no admissible b found");
  std::vector<double> values{best.value};
  for (int k = 1; k <= settings.k_max; ++k) {
    auto cand = detail::optimize_level(spec, k, &best, settings);
    values.push_back(cand.value);
    if (!(best.value - cand.value >= settings.tol_k)) break;
    best = std::move(cand);
  }
  auto opt = detail::finalize(spec, best);
  opt.values_by_k = std::move(values);

  double worst = 0.0;
  for (double r : opt.stationarity_residuals) worst = std::max(worst, std::abs(r));
  if (worst > settings.grad_tol) {
    throw OptimizationFailure("optimize_cs: stationarity residual " + std::to_string(worst) +
                                  " exceeds grad_tol",
                              opt);
  }
  return opt;
}

}  // namespace dchaos
