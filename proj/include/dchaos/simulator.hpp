#pragma once

// Finite-N Monte Carlo for two spherical mixed even-spin systems whose
// disorders have cross-covariance t N xi(R):
//
//   X^j(sigma) = sum_p beta_p N^{-(2p-1)/2} sum_{i_1..i_2p} g^{j,(p)}_{i_1..i_2p} sigma_{i_1}..sigma_{i_2p},
//   g^{j,(p)} = sqrt(t) shared + sqrt(1-t) private_j,
//
// Metropolis sampling of both Gibbs measures on the sphere of radius sqrt(N),
// the overlap law under E<.>, its concentration trend in N, and an empirical
// check of Gaussian concentration for log-partition functions.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "dchaos/detail/parallel.hpp"
#include "dchaos/detail/rng.hpp"
#include "dchaos/errors.hpp"
#include "dchaos/mixture.hpp"

namespace dchaos {

/// Default per-tensor entry budget: 32^4.
inline constexpr std::size_t kDefaultTensorBudget = std::size_t{1} << 20;

struct CoefficientTensor {
  int p = 1;
  double scale = 0.0;              // beta_p N^{-(2p-1)/2}
  std::vector<double> system[2];   // combined tensors for systems 1 and 2
};

struct DisorderRealization {
  MixtureSpec spec;
  int N = 0;
  double t = 1.0;
  std::uint64_t seed = 0;
  std::vector<CoefficientTensor> tensors;
  // Entry-level z-scores: mean and variance of each combined tensor, and the
  // shared/private cross-correlation against t.
  std::vector<double> self_test_z;

  double max_self_test_z() const {
    double worst = 0.0;
    for (double z : self_test_z) worst = std::max(worst, std::abs(z));
    return worst;
  }
};

namespace detail {

inline std::size_t checked_power(int N, int r, std::size_t budget) {
  std::size_t out = 1;
  for (int i = 0; i < r; ++i) {
    if (out > budget / static_cast<std::size_t>(N)) {
      throw ConfigError("build_disorder: tensor of rank " + std::to_string(r) + " and side " +
                        std::to_string(N) + " exceeds the memory budget of " + std::to_string(budget) +
                        " entries");
    }
    out *= static_cast<std::size_t>(N);
  }
  return out;
}

inline void self_test(const std::vector<double>& a, const std::vector<double>& b, double t, std::vector<double>& z) {
  const double n = static_cast<double>(a.size());
  for (const auto* g : {&a, &b}) {
    double mean = 0.0, sq = 0.0;
    for (double v : *g) {
      mean += v;
      sq += v * v;
    }
    mean /= n;
    z.push_back(mean * std::sqrt(n));
    z.push_back((sq / n - 1.0) * std::sqrt(n / 2.0));
  }
  double cross = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) cross += a[i] * b[i];
  cross /= n;
  // Var(g1 g2) = 1 + t^2 for jointly Gaussian unit entries with correlation t.
  const double se = std::sqrt((1.0 + t * t) / n);
  z.push_back(se > 0.0 ? (cross - t) / se : 0.0);
}

// sum over all index tuples of g_{i_1..i_r} sigma_{i_1}..sigma_{i_r}
inline double contract(const std::vector<double>& g, int rank, const std::vector<double>& sigma,
                       std::vector<double>& buf) {
  const std::size_t N = sigma.size();
  std::size_t len = g.size();
  const double* src = g.data();
  buf.resize(len / N);
  std::vector<double> tmp;
  for (int level = 0; level < rank; ++level) {
    const std::size_t out_len = len / N;
    std::vector<double>& dst = level % 2 == 0 ? buf : tmp;
    dst.resize(out_len);
    for (std::size_t i = 0; i < out_len; ++i) {
      const double* row = src + i * N;
      double acc = 0.0;
      for (std::size_t j = 0; j < N; ++j) acc += row[j] * sigma[j];
      dst[i] = acc;
    }
    src = dst.data();
    len = out_len;
  }
  return src[0];
}

}  // namespace detail

/// Draws the shared and private Gaussian tensors for every term. The
/// self-test z-scores are stored on the realization; a value beyond 6 means
/// the generator is broken and throws.
inline DisorderRealization build_disorder(const MixtureSpec& spec, int N, double t, std::uint64_t seed,
                                          std::size_t budget = kDefaultTensorBudget) {
  if (N < 2) throw ArgumentError("build_disorder: N must be >= 2");
  if (!(t >= 0.0 && t <= 1.0)) throw ArgumentError("build_disorder: t must lie in [0,1]");
  DisorderRealization real;
  real.spec = spec;
  real.N = N;
  real.t = t;
  real.seed = seed;
  const double a = std::sqrt(t), c = std::sqrt(1.0 - t);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (std::size_t term = 0; term < spec.terms.size(); ++term) {
    const auto& tm = spec.terms[term];
    if (tm.beta_sq == 0.0) continue;
    const std::size_t entries = detail::checked_power(N, 2 * tm.p, budget);
    CoefficientTensor ct;
    ct.p = tm.p;
    ct.scale = std::sqrt(tm.beta_sq) * std::pow(static_cast<double>(N), -(2.0 * tm.p - 1.0) / 2.0);
    auto eng_shared = detail::make_engine(seed, 3 * term);
    auto eng_one = detail::make_engine(seed, 3 * term + 1);
    auto eng_two = detail::make_engine(seed, 3 * term + 2);
    ct.system[0].resize(entries);
    ct.system[1].resize(entries);
    for (std::size_t i = 0; i < entries; ++i) {
      const double s = gauss(eng_shared);
      ct.system[0][i] = a * s + c * gauss(eng_one);
      ct.system[1][i] = a * s + c * gauss(eng_two);
    }
    if (t == 1.0) ct.system[1] = ct.system[0];
    detail::self_test(ct.system[0], ct.system[1], t, real.self_test_z);
    real.tensors.push_back(std::move(ct));
  }
  if (real.max_self_test_z() > 6.0) {
    throw NumericalFailure("build_disorder: covariance self-test failed (|z| = " +
                           std::to_string(real.max_self_test_z()) + ")");
  }
  return real;
}

/// X^system(sigma), without the field.
inline double disorder_energy(const DisorderRealization& real, int system, const std::vector<double>& sigma) {
  if (system != 1 && system != 2) throw ArgumentError("disorder_energy: system must be 1 or 2");
  if (sigma.size() != static_cast<std::size_t>(real.N)) throw ArgumentError("disorder_energy: wrong dimension");
  std::vector<double> buf;
  double acc = 0.0;
  for (const auto& ct : real.tensors) {
    acc += ct.scale * detail::contract(ct.system[system - 1], 2 * ct.p, sigma, buf);
  }
  return acc;
}

/// -H(sigma) = X^system(sigma) + h sum_i sigma_i.
inline double hamiltonian_eval(const DisorderRealization& real, int system, const std::vector<double>& sigma) {
  const double field = real.spec.h * std::accumulate(sigma.begin(), sigma.end(), 0.0);
  return disorder_energy(real, system, sigma) + field;
}

/// Uniform point on the sphere of radius sqrt(N).
inline std::vector<double> random_sphere_point(int N, std::mt19937_64& eng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<double> s(static_cast<std::size_t>(N));
  double norm = 0.0;
  do {
    norm = 0.0;
    for (auto& v : s) {
      v = gauss(eng);
      norm += v * v;
    }
  } while (norm == 0.0);
  const double k = std::sqrt(static_cast<double>(N) / norm);
  for (auto& v : s) v *= k;
  return s;
}

struct ChainState {
  std::vector<double> sigma;
  double minus_h = 0.0;  // cached -H(sigma)
  double delta = 0.0;
  std::size_t accepted = 0;
  std::size_t proposed = 0;

  double acceptance() const { return proposed ? static_cast<double>(accepted) / static_cast<double>(proposed) : 0.0; }
};

struct MetropolisSettings {
  double burn_in_fraction = 0.2;
  int thin = 5;                // sweeps between recorded samples
  double initial_delta = 0.5;
  double accept_low = 0.3;
  double accept_high = 0.6;
};

struct ChainResult {
  std::vector<ChainState> samples;
  double final_delta = 0.0;
  double acceptance = 0.0;  // post burn-in
};

/// sigma' = sqrt(N)(sigma + delta zeta)/|sigma + delta zeta|.
inline void propose(const std::vector<double>& sigma, double delta, std::mt19937_64& eng,
                    std::vector<double>& out) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  out.resize(sigma.size());
  double norm = 0.0;
  for (std::size_t i = 0; i < sigma.size(); ++i) {
    out[i] = sigma[i] + delta * gauss(eng);
    norm += out[i] * out[i];
  }
  const double k = std::sqrt(static_cast<double>(sigma.size()) / norm);
  for (auto& v : out) v *= k;
}

/// Metropolis chain for G^system. One sweep is N proposals; the step size is
/// tuned during burn-in and frozen afterwards.
inline ChainResult metropolis_chain(const DisorderRealization& real, int system, int sweeps, std::uint64_t seed,
                                    const MetropolisSettings& cfg = {}) {
  if (sweeps < 1) throw ArgumentError("metropolis_chain: sweeps must be >= 1");
  if (cfg.thin < 1) throw ArgumentError("metropolis_chain: thin must be >= 1");
  auto eng = detail::make_engine(seed, 0x636861696eULL);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const int N = real.N;
  ChainState st;
  st.sigma = random_sphere_point(N, eng);
  st.minus_h = hamiltonian_eval(real, system, st.sigma);
  st.delta = cfg.initial_delta;
  const int burn = static_cast<int>(std::floor(cfg.burn_in_fraction * sweeps));

  ChainResult res;
  std::vector<double> trial;
  std::size_t post_acc = 0, post_prop = 0;
  for (int sweep = 0; sweep < sweeps; ++sweep) {
    std::size_t acc = 0;
    for (int k = 0; k < N; ++k) {
      propose(st.sigma, st.delta, eng, trial);
      const double e = hamiltonian_eval(real, system, trial);
      const double log_ratio = e - st.minus_h;
      if (log_ratio >= 0.0 || unif(eng) < std::exp(log_ratio)) {
        st.sigma.swap(trial);
        st.minus_h = e;
        ++acc;
      }
    }
    st.accepted += acc;
    st.proposed += static_cast<std::size_t>(N);
    const double rate = static_cast<double>(acc) / N;
    if (sweep < burn) {
      if (rate < cfg.accept_low) st.delta *= 0.8;
      else if (rate > cfg.accept_high) st.delta = std::min(st.delta * 1.25, 10.0);
      continue;
    }
    post_acc += acc;
    post_prop += static_cast<std::size_t>(N);
    if ((sweep - burn + 1) % cfg.thin == 0) res.samples.push_back(st);
  }
  res.final_delta = st.delta;
  res.acceptance = post_prop ? static_cast<double>(post_acc) / static_cast<double>(post_prop) : 0.0;
  return res;
}

struct OverlapReport {
  int N = 0;
  double t = 1.0;
  double h = 0.0;
  std::string spec_digest;
  double u_star = 0.0;
  static constexpr int kBins = 100;
  static constexpr double kBinWidth = 0.02;
  std::vector<double> histogram = std::vector<double>(kBins, 0.0);
  double mean = 0.0;
  double variance = 0.0;
  std::vector<double> eps;
  std::vector<double> tails;         // P(|R - u*| > eps)
  std::vector<double> tail_stderr;   // across replicas
  int replicas = 0;
  std::size_t effective_samples = 0;
  double acceptance = 0.0;

  static double bin_center(int i) { return -1.0 + (i + 0.5) * kBinWidth; }
  /// Mass of bins whose centers lie in |R| <= r.
  double central_mass(double r) const {
    double m = 0.0;
    for (int i = 0; i < kBins; ++i) {
      if (std::abs(bin_center(i)) <= r) m += histogram[static_cast<std::size_t>(i)];
    }
    return m;
  }
};

struct SimulationSettings {
  int replicas = 50;
  int sweeps = 1000;
  std::uint64_t base_seed = 1;
  std::vector<double> eps{0.1, 0.2, 0.3};
  MetropolisSettings chain{};
};

inline int overlap_bin(double r) {
  const int i = static_cast<int>(std::floor((r + 1.0) / OverlapReport::kBinWidth));
  return std::clamp(i, 0, OverlapReport::kBins - 1);
}

/// E<.> of the overlap law: one disorder per replica, two independent chains
/// (one per system), paired thinned samples, equal replica weights.
inline OverlapReport overlap_experiment(const MixtureSpec& spec, int N, double t, double u_star,
                                        const SimulationSettings& cfg) {
  if (!(t > 0.0 && t <= 1.0)) throw ArgumentError("overlap_experiment: t must lie in (0,1]");
  if (cfg.replicas < 1) throw ArgumentError("overlap_experiment: replicas must be >= 1");
  struct PerReplica {
    std::vector<double> hist = std::vector<double>(OverlapReport::kBins, 0.0);
    double mean = 0.0, second = 0.0, acceptance = 0.0;
    std::vector<double> tails;
    std::size_t samples = 0;
  };
  std::vector<PerReplica> per(static_cast<std::size_t>(cfg.replicas));
  detail::parallel_for(per.size(), [&](std::size_t r) {
    const std::uint64_t rs = detail::mix_seed(cfg.base_seed ^ (static_cast<std::uint64_t>(N) << 32) ^ r);
    const auto real = build_disorder(spec, N, t, rs);
    const auto c1 = metropolis_chain(real, 1, cfg.sweeps, detail::mix_seed(rs + 1), cfg.chain);
    const auto c2 = metropolis_chain(real, 2, cfg.sweeps, detail::mix_seed(rs + 2), cfg.chain);
    auto& out = per[r];
    out.tails.assign(cfg.eps.size(), 0.0);
    const std::size_t n = std::min(c1.samples.size(), c2.samples.size());
    out.samples = n;
    out.acceptance = 0.5 * (c1.acceptance + c2.acceptance);
    if (n == 0) return;
    for (std::size_t s = 0; s < n; ++s) {
      const auto& a = c1.samples[s].sigma;
      const auto& b = c2.samples[s].sigma;
      const double R = std::inner_product(a.begin(), a.end(), b.begin(), 0.0) / N;
      out.hist[static_cast<std::size_t>(overlap_bin(R))] += 1.0;
      out.mean += R;
      out.second += R * R;
      for (std::size_t e = 0; e < cfg.eps.size(); ++e) {
        if (std::abs(R - u_star) > cfg.eps[e]) out.tails[e] += 1.0;
      }
    }
    const double inv = 1.0 / static_cast<double>(n);
    for (auto& v : out.hist) v *= inv;
    out.mean *= inv;
    out.second *= inv;
    for (auto& v : out.tails) v *= inv;
  });

  OverlapReport rep;
  rep.N = N;
  rep.t = t;
  rep.h = spec.h;
  rep.spec_digest = digest(spec);
  rep.u_star = u_star;
  rep.eps = cfg.eps;
  rep.replicas = cfg.replicas;
  rep.tails.assign(cfg.eps.size(), 0.0);
  rep.tail_stderr.assign(cfg.eps.size(), 0.0);
  const double w = 1.0 / cfg.replicas;
  double second = 0.0;
  for (const auto& r : per) {
    for (int i = 0; i < OverlapReport::kBins; ++i) rep.histogram[static_cast<std::size_t>(i)] += w * r.hist[static_cast<std::size_t>(i)];
    rep.mean += w * r.mean;
    second += w * r.second;
    rep.acceptance += w * r.acceptance;
    rep.effective_samples += r.samples;
    for (std::size_t e = 0; e < cfg.eps.size(); ++e) rep.tails[e] += w * r.tails[e];
  }
  rep.variance = std::max(0.0, second - rep.mean * rep.mean);
  if (cfg.replicas > 1) {
    for (std::size_t e = 0; e < cfg.eps.size(); ++e) {
      double ss = 0.0;
      for (const auto& r : per) ss += (r.tails[e] - rep.tails[e]) * (r.tails[e] - rep.tails[e]);
      rep.tail_stderr[e] = std::sqrt(ss / (cfg.replicas - 1) / cfg.replicas);
    }
  }
  return rep;
}

struct ConcentrationTrend {
  double eps = 0.0;
  double slope = 0.0;          // d log tail / dN
  bool all_zero = false;       // every tail estimate vanished; slope = -inf
  bool partial = false;        // some N had zero tail and were left out of the fit
  std::vector<OverlapReport> reports;
  std::vector<double> tails;
};

/// Least-squares slope of log tail against N over the nonzero tails.
inline ConcentrationTrend fit_trend(std::vector<OverlapReport> reports, double eps) {
  ConcentrationTrend out;
  out.eps = eps;
  std::vector<double> xs, ys;
  for (const auto& rep : reports) {
    const auto it = std::find(rep.eps.begin(), rep.eps.end(), eps);
    if (it == rep.eps.end()) throw ArgumentError("fit_trend: eps not present in every report");
    const double tail = rep.tails[static_cast<std::size_t>(it - rep.eps.begin())];
    out.tails.push_back(tail);
    if (tail > 0.0) {
      xs.push_back(rep.N);
      ys.push_back(std::log(tail));
    }
  }
  out.reports = std::move(reports);
  out.partial = xs.size() < out.reports.size();
  if (xs.size() < 2) {
    out.all_zero = xs.empty();
    out.slope = -std::numeric_limits<double>::infinity();
    return out;
  }
  const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
  const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / static_cast<double>(ys.size());
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
  }
  out.slope = sxy / sxx;
  return out;
}

/// Overlap experiments over N_list, then the log-tail slope at eps.
inline ConcentrationTrend concentration_trend(const MixtureSpec& spec, double t, const std::vector<int>& N_list,
                                              double eps, double u_star, SimulationSettings cfg) {
  if (N_list.size() < 3) throw ArgumentError("concentration_trend: need at least three system sizes");
  if (!std::is_sorted(N_list.begin(), N_list.end())) throw ArgumentError("concentration_trend: N_list must be ascending");
  if (std::find(cfg.eps.begin(), cfg.eps.end(), eps) == cfg.eps.end()) cfg.eps.push_back(eps);
  std::vector<OverlapReport> reports;
  for (int N : N_list) reports.push_back(overlap_experiment(spec, N, t, u_star, cfg));
  return fit_trend(std::move(reports), eps);
}

struct LogZRow {
  double s = 0.0;
  double exceedance = 0.0;  // fraction of draws with |X - mean| > s
  double bound = 0.0;       // 2 exp(-s^2/(4a))
  double three_sigma = 0.0; // 3 sqrt(bound (1 - bound) / draws)
};

struct LogZTable {
  double a = 0.0;
  double mean = 0.0;
  double sd = 0.0;
  std::vector<LogZRow> rows;
};

/// X = log (1/M) sum_i exp X_N(z_i) over M fixed sphere points, drawn `draws`
/// times; exceedance against 2 exp(-s^2/(4a)) with a = a_scale N xi(1), at
/// s = s_factor sqrt(N xi(1)). The mean is the sample mean over draws.
inline LogZTable logz_concentration_check(const MixtureSpec& spec, int N, int M, int draws, std::uint64_t seed,
                                          std::vector<double> s_factors = {0.5, 1.0, 2.0}, double a_scale = 1.0) {
  if (M < 1 || draws < 2) throw ArgumentError("logz_concentration_check: need M >= 1 and draws >= 2");
  auto eng = detail::make_engine(seed, 0x706f696e7473ULL);
  std::vector<std::vector<double>> pts;
  for (int i = 0; i < M; ++i) pts.push_back(random_sphere_point(N, eng));
  std::vector<double> X(static_cast<std::size_t>(draws));
  detail::parallel_for(X.size(), [&](std::size_t d) {
    const auto real = build_disorder(spec, N, 1.0, detail::mix_seed(seed ^ (0xd1ce0000ULL + d)));
    std::vector<double> g(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) g[i] = disorder_energy(real, 1, pts[i]);
    const double top = *std::max_element(g.begin(), g.end());
    double acc = 0.0;
    for (double v : g) acc += std::exp(v - top);
    X[d] = top + std::log(acc / static_cast<double>(M));
  });
  LogZTable tab;
  const double nxi = N * xi(spec, 1.0);
  tab.a = a_scale * nxi;
  tab.mean = std::accumulate(X.begin(), X.end(), 0.0) / draws;
  double ss = 0.0;
  for (double v : X) ss += (v - tab.mean) * (v - tab.mean);
  tab.sd = std::sqrt(ss / (draws - 1));
  for (double f : s_factors) {
    LogZRow row;
    row.s = f * std::sqrt(nxi);
    int hits = 0;
    for (double v : X) hits += std::abs(v - tab.mean) > row.s ? 1 : 0;
    row.exceedance = static_cast<double>(hits) / draws;
    row.bound = tab.a > 0.0 ? std::min(1.0, 2.0 * std::exp(-row.s * row.s / (4.0 * tab.a))) : 0.0;
    row.three_sigma = 3.0 * std::sqrt(row.bound * (1.0 - row.bound) / draws);
    tab.rows.push_back(row);
  }
  return tab;
}

}  // namespace dchaos
