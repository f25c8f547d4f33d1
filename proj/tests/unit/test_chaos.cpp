#include <catch_amalgamated.hpp>

#include <cmath>

#include "dchaos/chaos.hpp"
#include "oracles.hpp"

using namespace dchaos;
using Catch::Approx;

namespace {

const MixtureSpec two_spin({{1, 1.0}});

const CSOptimum& optimum(double h) {
  static const CSOptimum zero = optimize_cs(MixtureSpec({{1, 1.0}}, 0.0));
  static const CSOptimum half = optimize_cs(MixtureSpec({{1, 1.0}}, 0.5));
  return h == 0.0 ? zero : half;
}

}  // namespace

TEST_CASE("phi_eval examples") {
  const StepOrderParameter x({{0.0, 0.2}, {0.4, 0.9}});
  CHECK(phi_eval(x, two_spin, 0.5, 0.3, 0.3) == Approx(d_eval(x, two_spin, 0.3)).epsilon(1e-15));
  for (double q : {0.0, 0.2, 0.9}) CHECK(phi_eval(x, two_spin, 1.0, 0.3, q) == Approx(d_eval(x, two_spin, 0.3)));
  const StepOrderParameter z({{0.0, 0.0}, {0.6, 1.0}});
  CHECK(phi_eval(z, two_spin, 0.5, 0.5, 0.1) == Approx(d_eval(z, two_spin, 0.1)).epsilon(1e-15));
}

TEST_CASE("coupled_value matches quadrature of every integral") {
  const auto x = StepOrderParameter::constant(1.0);
  const double closed = coupled_value(two_spin, x, ChaosPoint::make(0.5, 0.3, 0.1, 3.0));
  CHECK(closed == Approx(oracle::coupled_value(two_spin, x, 0.5, 0.3, 0.1, 3.0)).margin(1e-8));

  const MixtureSpec s({{1, 0.7}, {2, 0.4}}, 0.3);
  const StepOrderParameter y({{0.0, 0.1}, {0.3, 0.5}, {0.7, 0.8}});
  const double b = d_eval(y, s, 0.0) + 0.6;
  for (double u : {-0.8, -0.35, 0.0, 0.3, 0.5, 1.0}) {
    for (double lam : {-0.3, 0.2}) {
      CHECK(coupled_value(s, y, ChaosPoint::make(0.4, u, lam, b)) ==
            Approx(oracle::coupled_value(s, y, 0.4, u, lam, b)).margin(1e-8));
    }
  }
}

TEST_CASE("coupled_value symmetry and identities") {
  const auto& opt = optimum(0.0);
  for (double u : {0.1, 0.25, 0.6}) {
    for (double lam : {0.05, 0.3}) {
      CHECK(coupled_value(two_spin, opt.x_star, ChaosPoint::make(0.5, u, lam, opt.b_star)) ==
            Approx(coupled_value(two_spin, opt.x_star, ChaosPoint::make(0.5, -u, -lam, opt.b_star))).epsilon(1e-13));
    }
  }
  const double two_p = 2.0 * cs_value(two_spin, opt.x_star, opt.b_star);
  for (double u : {0.0, 0.1, -0.2, opt.u_x}) {
    CHECK(std::abs(coupled_value(two_spin, opt.x_star, ChaosPoint::make(0.5, u, 0.0, opt.b_star)) - two_p) <= 1e-12);
  }
}

TEST_CASE("coupled_value admissibility errors name the term") {
  const auto x = StepOrderParameter::constant(1.0);
  CHECK_THROWS_AS(coupled_value(two_spin, x, ChaosPoint::make(0.5, 0.3, 2.5, 3.0)), AdmissibilityError);
  try {
    (void)coupled_value(two_spin, x, ChaosPoint::make(0.5, 0.3, 1.5, 3.0));
    FAIL("expected AdmissibilityError");
  } catch (const AdmissibilityError& e) {
    CHECK(std::string(e.what()).find("coupled_value") != std::string::npos);
  }
  CHECK_THROWS_AS(coupled_value(two_spin, x, ChaosPoint{0.5, 0.3, -1, 0.0, 3.0}), ArgumentError);
  CHECK_THROWS_AS(coupled_value(two_spin, x, ChaosPoint::make(0.0, 0.3, 0.0, 3.0)), ArgumentError);
}

TEST_CASE("f_eval examples") {
  const auto& opt = optimum(0.0);
  CHECK(f_eval(two_spin, opt.x_star, opt.b_star, 0.5, 0.0) == 0.0);
  CHECK(f_eval(two_spin, opt.x_star, opt.b_star, 0.5, opt.u_x) < 0.0);
  const MixtureSpec s({{1, 1.0}}, 0.5);
  const auto& o = optimum(0.5);
  const double d0 = oracle::d(o.x_star, s, 0.0);
  const double direct = (0.25 + 0.5 * oracle::xi1(s, 0.2)) / ((o.b_star - d0) * (o.b_star - d0)) - 0.2;
  CHECK(f_eval(s, o.x_star, o.b_star, 0.5, 0.2) == Approx(direct).margin(1e-12));
}

TEST_CASE("f is convex on [0,u_x] and concave on [-u_x,0]") {
  const MixtureSpec s({{1, 0.5}, {2, 0.7}}, 0.3);
  const auto opt = optimize_cs(s);
  const double ux = opt.u_x;
  REQUIRE(ux > 0.0);
  const double h = ux / 100.0;
  for (int i = 1; i < 100; ++i) {
    const double u = i * h;
    auto f = [&](double v) { return f_eval(s, opt.x_star, opt.b_star, 0.5, v); };
    CHECK(f(u + h) - 2 * f(u) + f(u - h) >= -1e-14);
    CHECK(f(-u + h) - 2 * f(-u) + f(-u - h) <= 1e-14);
  }
}

TEST_CASE("solve_u_star examples") {
  const auto& opt0 = optimum(0.0);
  CHECK(solve_u_star(two_spin, opt0.x_star, opt0.b_star, 0.5) == 0.0);
  const MixtureSpec s({{1, 1.0}}, 0.5);
  const auto& opt = optimum(0.5);
  for (double t : {0.1, 0.5, 0.9}) {
    const double us = solve_u_star(s, opt.x_star, opt.b_star, t);
    CHECK(us > 0.0);
    CHECK(us < opt.u_x);
    CHECK(std::abs(f_eval(s, opt.x_star, opt.b_star, t, us)) <= 1e-13);
  }
  // Two-spin at t = 1/2: (h^2 + u)/g^2 = u.
  const double g = opt.b_star - oracle::d(opt.x_star, s, 0.0);
  CHECK(solve_u_star(s, opt.x_star, opt.b_star, 0.5) == Approx(0.25 / (g * g - 1.0)).margin(1e-9));

  const double b = (1.0 + std::sqrt(5.0)) / 2.0;
  const double ux = 1.0 / (b * b);
  const MixtureSpec field({}, 1.0);
  CHECK(solve_u_star(field, StepOrderParameter({{0.0, 0.0}, {ux, 1.0}}), b, 0.5) == Approx(0.381966).margin(1e-6));

  CHECK_THROWS_AS(solve_u_star(field, StepOrderParameter({{0.0, 0.0}, {0.1, 1.0}}), b, 0.5), PreconditionError);
  CHECK_THROWS_AS(solve_u_star(s, opt.x_star, opt.b_star, 1.0), ArgumentError);
}

TEST_CASE("chaos_gap examples") {
  const auto& opt = optimum(0.0);
  const auto g = chaos_gap(two_spin, opt.x_star, opt.b_star, 0.5, 0.5);
  CHECK(g.gap > 0.0);
  // Dense lambda-grid oracle.
  const double half = opt.b_star - d_eval(opt.x_star, two_spin, 0.0);
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i <= 20000; ++i) {
    const double lam = -half + 1e-6 + (2 * half - 2e-6) * i / 20000.0;
    best = std::min(best, coupled_value(two_spin, opt.x_star, ChaosPoint::make(0.5, 0.5, lam, opt.b_star)));
  }
  CHECK(std::abs(g.gap - (g.two_p - best)) <= 1e-7);
  CHECK(chaos_gap(two_spin, opt.x_star, opt.b_star, 0.5, -0.5).gap == Approx(g.gap).margin(1e-10));
  CHECK(std::abs(chaos_gap(two_spin, opt.x_star, opt.b_star, 0.5, 0.0).gap) <= 1e-6);
  CHECK_THROWS_AS(chaos_gap(two_spin, opt.x_star, opt.b_star, 1.0, 0.3), ArgumentError);
}

TEST_CASE("curvature bound is finite") {
  const auto& opt = optimum(0.5);
  const double L = curvature_bound(MixtureSpec({{1, 1.0}}, 0.5), opt.x_star, opt.b_star, 0.5, 0.2);
  CHECK(std::isfinite(L));
  CHECK(L > 0.0);
}

TEST_CASE("chaos_curve: symmetric at h = 0, minimum at u* for h != 0") {
  const auto curve0 = chaos_curve(two_spin, optimum(0.0), 0.5, uniform_u_grid(0.05));
  CHECK(curve0.u_star == 0.0);
  for (std::size_t i = 0; i < curve0.grid.size(); ++i) {
    CHECK(curve0.gaps[i] >= -1e-10);
    const std::size_t j = curve0.grid.size() - 1 - i;
    CHECK(curve0.grid[j] == Approx(-curve0.grid[i]).margin(1e-12));
    CHECK(curve0.gaps[j] == Approx(curve0.gaps[i]).margin(1e-9));
  }
  CHECK(curve0.min_gap_off(0.05) > 0.0);

  const MixtureSpec s({{1, 1.0}}, 0.5);
  const auto curve = chaos_curve(s, optimum(0.5), 0.5, uniform_u_grid(0.05));
  CHECK(curve.u_star > 0.0);
  CHECK(curve.u_star < curve.u_x);
  const auto imin = std::min_element(curve.gaps.begin(), curve.gaps.end()) - curve.gaps.begin();
  CHECK(curve.grid[static_cast<std::size_t>(imin)] == curve.u_star);
  CHECK(curve.min_gap_off(0.05) > 0.0);
  CHECK(curve.warnings.empty());
}
