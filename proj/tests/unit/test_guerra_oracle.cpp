#include <catch_amalgamated.hpp>

#include <cmath>

#include "dchaos/chaos.hpp"
#include "dchaos/guerra_oracle.hpp"
#include "oracles.hpp"

using namespace dchaos;
using Catch::Approx;

TEST_CASE("gaussian_exp_identity matches quadrature") {
  for (double n : {0.0, 0.1, 0.5, 0.9}) {
    for (double y : {0.0, 0.7, -1.3}) {
      const double L = 2.0, v = 1.5;
      CHECK(gaussian_exp_identity(n, L, v, y) == Approx(oracle::gaussian_exp(n, L, v, y)).margin(1e-8));
    }
  }
  CHECK(gaussian_exp_identity(0.5, 1.0, 0.0, 2.0) == Approx(2.0).margin(1e-15));
}

TEST_CASE("gaussian_exp_identity is continuous as n -> 0") {
  const double at0 = gaussian_exp_identity(0.0, 1.7, 0.8, 0.4);
  CHECK(std::abs(gaussian_exp_identity(1e-9, 1.7, 0.8, 0.4) - at0) <= 1e-8);
  CHECK(std::abs(gaussian_exp_identity(1e-6, 1.7, 0.8, 0.4) - at0) <= 1e-5);
}

TEST_CASE("gaussian_exp_identity diverges when n v >= L") {
  CHECK_THROWS_AS(gaussian_exp_identity(0.5, 1.0, 2.0, 0.0), DivergenceError);
  CHECK_THROWS_AS(gaussian_exp_identity(1.0, 1.0, 1.5, 0.3), DivergenceError);
  CHECK_THROWS_AS(gaussian_exp_identity(-0.1, 1.0, 0.5, 0.0), ArgumentError);
}

TEST_CASE("RSBSchedule construction and validation") {
  const auto s = RSBSchedule::make({0.0, 0.4, 0.8}, {0.0, 0.2, 0.5, 1.0}, 2, 0.5, 1);
  CHECK(s.k == 2);
  CHECK(s.n[0] == 0.0);
  CHECK(s.n[1] == Approx(0.4 / 1.5));
  CHECK(s.n[2] == Approx(0.8));
  CHECK(s.u() == 0.5);
  const MixtureSpec spec({{1, 1.0}});
  CHECK(s.cross_covariance(spec, 0) == Approx(0.5 * 0.4));
  CHECK(s.cross_covariance(spec, 2) == 0.0);
  CHECK(s.rotated_variance(spec, 1, 1) == Approx(1.5 * 0.6));
  CHECK(s.rotated_variance(spec, 1, 2) == Approx(0.5 * 0.6));

  CHECK_THROWS_AS(RSBSchedule::make({0.1, 0.4}, {0.0, 0.5, 1.0}, 1, 0.5, 1), ArgumentError);
  CHECK_THROWS_AS(RSBSchedule::make({0.0, 0.4}, {0.0, 0.5, 0.9}, 1, 0.5, 1), ArgumentError);
  CHECK_THROWS_AS(RSBSchedule::make({0.0, 0.4}, {0.0, 0.5, 1.0}, 3, 0.5, 1), ArgumentError);
  CHECK_THROWS_AS(RSBSchedule::make({0.0, 0.6, 0.4}, {0.0, 0.2, 0.5, 1.0}, 1, 0.5, 1), ArgumentError);
  CHECK_THROWS_AS(RSBSchedule::make({0.0, 0.4}, {0.0, 0.5, 1.0}, 1, 0.0, 1), ArgumentError);
  CHECK_THROWS_AS(RSBSchedule::make({0.0, 0.4}, {0.0, 0.5, 1.0}, 1, 0.5, 0), ArgumentError);
}

TEST_CASE("make_schedule places |u| at q_tau") {
  const StepOrderParameter x({{0.0, 0.3}, {0.4, 0.9}});
  const auto s = make_schedule(x, -0.25, 0.5);
  CHECK(s.eta == -1);
  CHECK(s.q[static_cast<std::size_t>(s.tau)] == 0.25);
  CHECK(s.m.front() == 0.0);
  CHECK(s.q.back() == 1.0);
  CHECK(s.u() == -0.25);
  CHECK(make_schedule(x, 1.0, 0.5).tau == make_schedule(x, 1.0, 0.5).k + 1);
}

TEST_CASE("recursive_J agrees with closed_form_J") {
  const MixtureSpec spec({{1, 0.8}, {2, 0.5}}, 0.4);
  const auto s = RSBSchedule::make({0.0, 0.3, 0.7}, {0.0, 0.25, 0.6, 1.0}, 1, 0.6, 1);
  for (double lam : {-0.4, 0.0, 0.4}) {
    for (int branch : {1, 2}) {
      const double closed = closed_form_J(s, spec, 4.0, lam, branch);
      CHECK(recursive_J(s, spec, 4.0, lam, branch) == Approx(closed).margin(1e-8));
    }
  }
  const auto neg = RSBSchedule::make({0.0, 0.3, 0.7}, {0.0, 0.25, 0.6, 1.0}, 2, 0.6, -1);
  for (int branch : {1, 2}) {
    CHECK(recursive_J(neg, spec, 4.0, 0.3, branch) == Approx(closed_form_J(neg, spec, 4.0, 0.3, branch)).margin(1e-8));
  }
  CHECK_THROWS_AS(closed_form_J(s, spec, 4.0, 0.0, 3), ArgumentError);
  CHECK_THROWS_AS(recursive_J(s, spec, 0.5, 0.0, 1), DivergenceError);
}

TEST_CASE("tau = 0 makes the two branches independent copies") {
  const MixtureSpec spec({{1, 1.0}});
  const auto s = RSBSchedule::make({0.0, 0.5}, {0.0, 0.4, 1.0}, 0, 0.5, 1);
  CHECK(closed_form_J(s, spec, 3.0, 0.0, 1) == Approx(closed_form_J(s, spec, 3.0, 0.0, 2)).epsilon(1e-14));
  CHECK(s.cross_covariance(spec, 0) == 0.0);
}

TEST_CASE("guerra_bound reconciles with coupled_value") {
  const MixtureSpec spec({{1, 0.7}, {2, 0.4}}, 0.3);
  const StepOrderParameter x({{0.0, 0.1}, {0.3, 0.5}, {0.7, 0.8}});
  const double b = d_eval(x, spec, 0.0) + 0.6;
  for (double t : {0.3, 1.0}) {
    for (double u : {-0.9, -0.5, 0.0, 0.2, 0.3, 0.75, 1.0}) {
      for (double lam : {-0.25, 0.0, 0.15}) {
        const double direct = coupled_value(spec, x, ChaosPoint::make(t, u, lam, b));
        CHECK(std::abs(guerra_bound(make_schedule(x, u, t), spec, b, lam) - direct) <= 1e-10);
      }
    }
  }
}

TEST_CASE("random oracle suite") {
  const auto suite = run_oracle_suite(100, 7);
  REQUIRE(suite.size() == 100);
  double worst = 0.0;
  for (const auto& [c, r] : suite) worst = std::max(worst, r.abs_error);
  CHECK(worst <= 1e-8);
}

TEST_CASE("tau_chi matches an independent incomplete gamma") {
  for (long long N : {1LL, 10LL, 100LL, 1000LL, 10000LL}) {
    for (double b : {1.2, 2.0, 3.5}) {
      CHECK(tau_chi(N, b) == Approx(oracle::tau_chi(N, b)).epsilon(1e-10));
    }
  }
  CHECK(tau_limit(2.0) == Approx(0.5 * (1.0 - std::log(2.0))).epsilon(1e-15));
  CHECK_THROWS_AS(tau_chi(0, 2.0), ArgumentError);
  CHECK_THROWS_AS(tau_chi(10, 0.0), ArgumentError);
}

TEST_CASE("tau_chi approaches its limit at rate at least N^-0.8") {
  const double lim = tau_limit(2.0);
  std::vector<double> logN, logE;
  for (long long N : {100LL, 1000LL, 10000LL, 100000LL}) {
    const double e = tau_chi(N, 2.0) - lim;
    CHECK(e > 0.0);
    logN.push_back(std::log(static_cast<double>(N)));
    logE.push_back(std::log(e));
  }
  for (std::size_t i = 1; i < logN.size(); ++i) {
    CHECK(logE[i] < logE[i - 1]);
    CHECK(-(logE[i] - logE[i - 1]) / (logN[i] - logN[i - 1]) >= 0.8);
  }
}
