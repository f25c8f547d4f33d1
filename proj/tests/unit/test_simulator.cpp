#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <numeric>

#include "dchaos/simulator.hpp"
#include "oracles.hpp"

using namespace dchaos;
using Catch::Approx;

namespace {

double correlation(const std::vector<double>& a, const std::vector<double>& b) {
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

std::vector<double> unit_point(int N, std::uint64_t seed) {
  auto eng = detail::make_engine(seed);
  return random_sphere_point(N, eng);
}

const MixtureSpec sk({{1, 1.0}});

}  // namespace

TEST_CASE("disorder: coupled tensors have the requested correlation") {
  const MixtureSpec spec({{2, 1.0}});
  const auto one = build_disorder(spec, 12, 1.0, 5);
  CHECK(one.tensors[0].system[0] == one.tensors[0].system[1]);
  const auto zero = build_disorder(spec, 12, 0.0, 5);
  const auto half = build_disorder(spec, 12, 0.5, 5);
  const double n = static_cast<double>(half.tensors[0].system[0].size());
  CHECK(std::abs(correlation(zero.tensors[0].system[0], zero.tensors[0].system[1])) <= 5.0 / std::sqrt(n));
  CHECK(std::abs(correlation(half.tensors[0].system[0], half.tensors[0].system[1]) - 0.5) <= 5.0 * std::sqrt(1.25 / n));
  CHECK(half.max_self_test_z() < 6.0);
  CHECK(half.tensors[0].scale == Approx(std::pow(12.0, -1.5)));
}

TEST_CASE("disorder: energy covariance is N t xi(R)") {
  const MixtureSpec spec({{1, 0.6}, {2, 0.3}});
  const int N = 8, draws = 4000;
  const auto s1 = unit_point(N, 1), s2 = unit_point(N, 2);
  const double R = std::inner_product(s1.begin(), s1.end(), s2.begin(), 0.0) / N;
  std::vector<double> a(draws), b(draws), c(draws);
  for (int d = 0; d < draws; ++d) {
    const auto real = build_disorder(spec, N, 0.4, 1000 + static_cast<std::uint64_t>(d));
    a[static_cast<std::size_t>(d)] = disorder_energy(real, 1, s1);
    b[static_cast<std::size_t>(d)] = disorder_energy(real, 2, s1);
    c[static_cast<std::size_t>(d)] = disorder_energy(real, 1, s2);
  }
  auto cov = [&](const std::vector<double>& x, const std::vector<double>& y) {
    double acc = 0.0;
    for (int d = 0; d < draws; ++d) acc += x[static_cast<std::size_t>(d)] * y[static_cast<std::size_t>(d)];
    return acc / draws;
  };
  const double var = N * oracle::xi0(spec, 1.0);
  CHECK(cov(a, a) == Approx(var).epsilon(0.1));
  CHECK(cov(a, b) == Approx(0.4 * var).margin(0.1 * var));
  CHECK(cov(a, c) == Approx(N * oracle::xi0(spec, R)).margin(0.1 * var));
}

TEST_CASE("disorder: tensor budget is enforced") {
  CHECK_THROWS_AS(build_disorder(MixtureSpec({{3, 1.0}}), 30, 0.5, 1), ConfigError);
  CHECK_THROWS_AS(build_disorder(sk, 1, 0.5, 1), ArgumentError);
  CHECK_THROWS_AS(build_disorder(sk, 8, 1.5, 1), ArgumentError);
}

TEST_CASE("hamiltonian: explicit contractions") {
  const MixtureSpec spec({{1, 0.7}, {2, 0.2}}, 0.3);
  const int N = 4;
  const auto real = build_disorder(spec, N, 0.6, 11);
  const auto s = unit_point(N, 3);
  std::vector<double> neg(s);
  for (auto& v : neg) v = -v;
  for (int sys : {1, 2}) {
    CHECK(disorder_energy(real, sys, neg) == Approx(disorder_energy(real, sys, s)).epsilon(1e-13));
    const auto& g1 = real.tensors[0].system[sys - 1];
    const auto& g2 = real.tensors[1].system[sys - 1];
    double e1 = 0.0, e2 = 0.0;
    for (int i = 0; i < N; ++i) {
      for (int j = 0; j < N; ++j) {
        e1 += g1[static_cast<std::size_t>(i * N + j)] * s[i] * s[j];
        for (int k = 0; k < N; ++k) {
          for (int l = 0; l < N; ++l) {
            e2 += g2[static_cast<std::size_t>(((i * N + j) * N + k) * N + l)] * s[i] * s[j] * s[k] * s[l];
          }
        }
      }
    }
    const double expect = std::sqrt(0.7) / std::pow(N, 0.5) * e1 + std::sqrt(0.2) / std::pow(N, 1.5) * e2;
    CHECK(disorder_energy(real, sys, s) == Approx(expect).epsilon(1e-12));
    const double sum = std::accumulate(s.begin(), s.end(), 0.0);
    CHECK(hamiltonian_eval(real, sys, s) == Approx(expect + 0.3 * sum).epsilon(1e-12));
  }
  const auto empty = build_disorder(MixtureSpec({}, 0.8), N, 0.5, 1);
  CHECK(hamiltonian_eval(empty, 1, s) == Approx(0.8 * std::accumulate(s.begin(), s.end(), 0.0)).epsilon(1e-15));
  CHECK_THROWS_AS(disorder_energy(real, 3, s), ArgumentError);
}

TEST_CASE("sampler: stays on the sphere") {
  const auto real = build_disorder(sk, 10, 0.5, 2);
  const auto res = metropolis_chain(real, 1, 200, 9);
  REQUIRE(!res.samples.empty());
  CHECK(res.samples.size() == 32);
  for (const auto& st : res.samples) {
    const double norm = std::inner_product(st.sigma.begin(), st.sigma.end(), st.sigma.begin(), 0.0);
    CHECK(norm == Approx(10.0).epsilon(1e-12));
  }
  CHECK(res.acceptance > 0.2);
  CHECK(res.acceptance < 0.7);
}

TEST_CASE("sampler: uniform measure without disorder or field") {
  const auto real = build_disorder(MixtureSpec(), 6, 1.0, 1);
  const auto res = metropolis_chain(real, 1, 20000, 3);
  double m1 = 0.0, m2 = 0.0;
  for (const auto& st : res.samples) {
    m1 += st.sigma[0];
    m2 += st.sigma[0] * st.sigma[0];
  }
  const double n = static_cast<double>(res.samples.size());
  CHECK(std::abs(m1 / n) < 0.05);
  CHECK(m2 / n == Approx(1.0).margin(0.05));
}

TEST_CASE("sampler: magnetization in a pure field") {
  const int N = 32, chains = 20;
  const auto real = build_disorder(MixtureSpec({}, 1.0), N, 1.0, 1);
  std::vector<double> means;
  for (int c = 0; c < chains; ++c) {
    const auto res = metropolis_chain(real, 1, 2000, 100 + static_cast<std::uint64_t>(c));
    double acc = 0.0;
    for (const auto& st : res.samples) acc += std::accumulate(st.sigma.begin(), st.sigma.end(), 0.0) / N;
    means.push_back(acc / static_cast<double>(res.samples.size()));
  }
  const double mean = std::accumulate(means.begin(), means.end(), 0.0) / chains;
  double ss = 0.0;
  for (double m : means) ss += (m - mean) * (m - mean);
  const double se = std::sqrt(ss / (chains - 1) / chains);
  CHECK(std::abs(mean - oracle::sphere_field_mean(N, 1.0)) <= 3.0 * se + 1e-3);
  CHECK(std::abs(mean - (std::sqrt(5.0) - 1.0) / 2.0) < 0.05);
}

TEST_CASE("sampler: N = 2 chain matches the Gibbs weights on a circle") {
  const MixtureSpec spec({{1, 1.0}}, 0.3);
  const auto real = build_disorder(spec, 2, 1.0, 21);
  constexpr int grid = 360, bins = 36;
  const double r = std::numbers::sqrt2;
  std::vector<double> exact(bins, 0.0);
  double z = 0.0;
  for (int k = 0; k < grid; ++k) {
    const double th = 2.0 * std::numbers::pi * (k + 0.5) / grid;
    const double w = std::exp(hamiltonian_eval(real, 1, {r * std::cos(th), r * std::sin(th)}));
    exact[static_cast<std::size_t>(k / (grid / bins))] += w;
    z += w;
  }
  for (auto& e : exact) e /= z;

  MetropolisSettings cfg;
  cfg.thin = 1;
  const auto res = metropolis_chain(real, 1, 100000, 4, cfg);
  std::vector<double> seen(bins, 0.0);
  for (const auto& st : res.samples) {
    double th = std::atan2(st.sigma[1], st.sigma[0]);
    if (th < 0.0) th += 2.0 * std::numbers::pi;
    const int b = std::min(bins - 1, static_cast<int>(th / (2.0 * std::numbers::pi) * bins));
    seen[static_cast<std::size_t>(b)] += 1.0;
  }
  double tv = 0.0;
  for (int b = 0; b < bins; ++b) {
    tv += 0.5 * std::abs(seen[static_cast<std::size_t>(b)] / static_cast<double>(res.samples.size()) -
                         exact[static_cast<std::size_t>(b)]);
  }
  CHECK(tv < 0.03);
}

TEST_CASE("overlap experiment: histogram, symmetry and determinism") {
  SimulationSettings cfg;
  cfg.replicas = 16;
  cfg.sweeps = 200;
  const auto rep = overlap_experiment(sk, 16, 1.0, 0.0, cfg);
  CHECK(std::accumulate(rep.histogram.begin(), rep.histogram.end(), 0.0) == Approx(1.0).epsilon(1e-12));
  CHECK(std::abs(rep.mean) < 0.15);
  CHECK(rep.replicas == 16);
  CHECK(rep.tails.size() == 3);
  for (std::size_t i = 1; i < rep.tails.size(); ++i) CHECK(rep.tails[i] <= rep.tails[i - 1]);
  const auto again = overlap_experiment(sk, 16, 1.0, 0.0, cfg);
  CHECK(again.histogram == rep.histogram);
  CHECK(again.tails == rep.tails);
  CHECK(again.mean == rep.mean);
  CHECK(overlap_bin(-1.0) == 0);
  CHECK(overlap_bin(1.0) == OverlapReport::kBins - 1);
}

TEST_CASE("overlap experiment: decorrelated disorder concentrates the overlap") {
  SimulationSettings cfg;
  cfg.replicas = 30;
  cfg.sweeps = 300;
  const auto chaotic = overlap_experiment(sk, 16, 0.3, 0.0, cfg);
  const auto coupled = overlap_experiment(sk, 16, 1.0, 0.0, cfg);
  CHECK(chaotic.central_mass(0.2) > coupled.central_mass(0.2));
  CHECK(chaotic.variance < coupled.variance);
}

TEST_CASE("fit_trend flags vanished tails") {
  SimulationSettings cfg;
  cfg.replicas = 4;
  cfg.sweeps = 50;
  cfg.eps = {0.3, 2.0};
  const auto tr = concentration_trend(sk, 0.5, {8, 10, 12}, 2.0, 0.0, cfg);
  CHECK(tr.all_zero);
  CHECK(std::isinf(tr.slope));
  CHECK(tr.slope < 0.0);
  CHECK_THROWS_AS(concentration_trend(sk, 0.5, {8, 10}, 0.3, 0.0, cfg), ArgumentError);
  CHECK_THROWS_AS(concentration_trend(sk, 0.5, {12, 10, 8}, 0.3, 0.0, cfg), ArgumentError);
}

TEST_CASE("log-partition concentration check") {
  const auto none = logz_concentration_check(MixtureSpec(), 8, 50, 20, 1);
  CHECK(none.a == 0.0);
  for (const auto& row : none.rows) {
    CHECK(row.exceedance == 0.0);
    CHECK(row.bound == 0.0);
  }
  const auto tab = logz_concentration_check(sk, 8, 200, 400, 3);
  REQUIRE(tab.rows.size() == 3);
  CHECK(tab.a == Approx(8.0));
  for (const auto& row : tab.rows) CHECK(row.exceedance <= row.bound + row.three_sigma);
  const auto twice = logz_concentration_check(sk, 8, 200, 400, 3, {0.5, 1.0, 2.0}, 2.0);
  CHECK(twice.a == Approx(2.0 * tab.a));
  CHECK(twice.mean == tab.mean);
  for (std::size_t i = 0; i < tab.rows.size(); ++i) CHECK(twice.rows[i].bound >= tab.rows[i].bound);
}
