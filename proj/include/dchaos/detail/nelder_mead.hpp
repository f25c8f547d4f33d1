#pragma once

// Derivative-free Nelder-Mead simplex minimization with restarts from the
// incumbent. Infinite objective values mark infeasible points.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <vector>

namespace dchaos::detail {

struct NelderMeadOptions {
  double initial_step = 0.5;
  double ftol = 1e-15;   // absolute spread of simplex values
  double xtol = 1e-11;   // simplex diameter
  std::size_t max_evals = 200000;
  int max_restarts = 8;
};

struct NelderMeadResult {
  std::vector<double> x;
  double value = std::numeric_limits<double>::infinity();
  std::size_t evals = 0;
  bool converged = false;
};

namespace nm_impl {

inline double diameter(const std::vector<std::vector<double>>& simplex) {
  double worst = 0.0;
  for (std::size_t i = 1; i < simplex.size(); ++i) {
    for (std::size_t j = 0; j < simplex[i].size(); ++j) {
      worst = std::max(worst, std::abs(simplex[i][j] - simplex[0][j]));
    }
  }
  return worst;
}

}  // namespace nm_impl

template <class Objective>
NelderMeadResult nelder_mead_once(Objective&& f, std::vector<double> start, double step,
                                  const NelderMeadOptions& opt, std::size_t budget) {
  const std::size_t n = start.size();
  NelderMeadResult res;
  if (n == 0) {
    res.x = start;
    res.value = f(start);
    res.evals = 1;
    res.converged = true;
    return res;
  }
  std::vector<std::vector<double>> pts(n + 1, start);
  std::vector<double> vals(n + 1);
  for (std::size_t i = 0; i < n; ++i) pts[i + 1][i] += step;
  for (std::size_t i = 0; i <= n; ++i) vals[i] = f(pts[i]);
  res.evals = n + 1;

  std::vector<std::size_t> order(n + 1);
  std::vector<double> centroid(n), trial(n), trial2(n);
  auto at = [&](double coef, std::vector<double>& out, const std::vector<double>& worst) {
    for (std::size_t j = 0; j < n; ++j) out[j] = centroid[j] + coef * (worst[j] - centroid[j]);
  };

  while (res.evals < budget) {
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return vals[a] < vals[b];
    });
    {
      std::vector<std::vector<double>> p2(n + 1);
      std::vector<double> v2(n + 1);
      for (std::size_t i = 0; i <= n; ++i) {
        p2[i] = std::move(pts[order[i]]);
        v2[i] = vals[order[i]];
      }
      pts = std::move(p2);
      vals = std::move(v2);
    }
    const double spread = vals[n] - vals[0];
    if (std::isfinite(vals[n]) && spread <= opt.ftol * (1.0 + std::abs(vals[0])) &&
        nm_impl::diameter(pts) <= opt.xtol) {
      res.converged = true;
      break;
    }
    if (std::isfinite(vals[n]) && spread == 0.0 && nm_impl::diameter(pts) <= 1e-8) {
      res.converged = true;
      break;
    }

    std::fill(centroid.begin(), centroid.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) centroid[j] += pts[i][j];
    }
    for (auto& c : centroid) c /= static_cast<double>(n);

    at(-1.0, trial, pts[n]);
    const double fr = f(trial);
    ++res.evals;
    if (fr < vals[0]) {
      at(-2.0, trial2, pts[n]);
      const double fe = f(trial2);
      ++res.evals;
      if (fe < fr) {
        pts[n] = trial2;
        vals[n] = fe;
      } else {
        pts[n] = trial;
        vals[n] = fr;
      }
      continue;
    }
    if (fr < vals[n - 1]) {
      pts[n] = trial;
      vals[n] = fr;
      continue;
    }
    const bool outside = fr < vals[n];
    at(outside ? -0.5 : 0.5, trial2, pts[n]);
    const double fc = f(trial2);
    ++res.evals;
    if (fc < (outside ? fr : vals[n])) {
      pts[n] = trial2;
      vals[n] = fc;
      continue;
    }
    // Shrink toward the best vertex.
    for (std::size_t i = 1; i <= n; ++i) {
      for (std::size_t j = 0; j < n; ++j) pts[i][j] = pts[0][j] + 0.5 * (pts[i][j] - pts[0][j]);
      vals[i] = f(pts[i]);
      ++res.evals;
    }
  }
  const auto best = static_cast<std::size_t>(
      std::min_element(vals.begin(), vals.end()) - vals.begin());
  res.x = pts[best];
  res.value = vals[best];
  return res;
}

/// Runs Nelder-Mead, then restarts from the incumbent with a fresh simplex
/// until a restart no longer improves the value.
template <class Objective>
NelderMeadResult nelder_mead(Objective&& f, std::vector<double> start,
                             const NelderMeadOptions& opt = {}) {
  NelderMeadResult best = nelder_mead_once(f, std::move(start), opt.initial_step, opt, opt.max_evals);
  std::size_t used = best.evals;
  double step = opt.initial_step;
  for (int r = 0; r < opt.max_restarts && used < opt.max_evals; ++r) {
    step = std::max(step * 0.3, 1e-4);
    auto next = nelder_mead_once(f, best.x, step, opt, opt.max_evals - used);
    used += next.evals;
    const bool improved = next.value < best.value - 1e-15 * (1.0 + std::abs(best.value));
    if (next.value <= best.value) {
      next.evals = used;
      best = std::move(next);
    }
    if (!improved) break;
  }
  best.evals = used;
  return best;
}

}  // namespace dchaos::detail
