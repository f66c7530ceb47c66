#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "greenfn/periodic_oracle.hpp"
#include "greenfn/quadrature.hpp"
#include "test_helpers.hpp"

using Catch::Approx;
using namespace greenfn;
using namespace greenfn::periodic;

TEST_CASE("two-point kernel closed-form values") {
  CHECK(oracle_g(0.5, 0.25, 1.0) == Approx(1.2320446981105537).margin(1e-15));
  CHECK(oracle_g(0.25, 0.5, 1.0) == Approx(0.7472728835404464).margin(1e-15));
  CHECK(oracle_g(0.5, 0.5, 1.0, TieBranch::t_ge_s) ==
        Approx(1.5819767068693265).margin(1e-15));
  CHECK(oracle_g(0.5, 0.5, 1.0, TieBranch::t_lt_s) ==
        Approx(0.5819767068693265).margin(1e-15));
}

TEST_CASE("unit jump across the diagonal") {
  for (double s : {0.1, 0.5, 0.9})
    for (double m : {-2.0, 0.5, 1.0, 3.0})
      CHECK(oracle_g(s, s, m, TieBranch::t_ge_s) - oracle_g(s, s, m, TieBranch::t_lt_s) ==
            Approx(1.0).margin(1e-13));
}

TEST_CASE("omega closed form and its defining property") {
  CHECK(oracle_omega1(0.0, 1.0) == Approx(1.5819767068693265).margin(1e-15));
  CHECK(oracle_omega1(1.0, 1.0) == Approx(0.5819767068693265).margin(1e-15));
  for (double m : {-1.5, 0.3, 2.0})
    CHECK(oracle_omega1(0.0, m) - oracle_omega1(1.0, m) == Approx(1.0).margin(1e-12));
  // int_0^1 omega_1 = 1/M
  auto out = integrate_adaptive([](double t) { return oracle_omega1(t, 2.0); }, 0.0, 1.0,
                                1e-12);
  CHECK(out.value == Approx(0.5).margin(1e-11));
}

TEST_CASE("perturbed kernel closed-form values") {
  CHECK(oracle_G(0.5, 0.25, {1.0, 0.5}) == Approx(2.1915620737780257).margin(1e-14));
  CHECK(oracle_G(0.0, 0.5, {1.0, -0.3}) == Approx(0.5944458279283966).margin(1e-14));
  // delta -> 0 recovers g
  CHECK(oracle_G(0.5, 0.25, {1.0, 0.0}) == Approx(1.2320446981105537).margin(1e-15));
  // M = 0 degenerate branch
  CHECK(oracle_G(0.7, 0.4, {0.0, 0.5}) == Approx(-1.6).margin(1e-15));
  CHECK(oracle_G(0.4, 0.7, {0.0, 0.5}) == Approx(-2.3).margin(1e-15));
}

TEST_CASE("exponential slice structure: G e^{Mt} constant per branch") {
  const PeriodicParams p{1.3, -0.4};
  for (double s : {0.3, 0.7}) {
    const double below = oracle_G(0.0, s, p) * 1.0;  // e^{M*0}
    for (double t : linspace(0.0, s - 0.05, 10))
      CHECK(oracle_G(t, s, p) * std::exp(p.shift * t) == Approx(below).margin(1e-10));
    const double above = oracle_G(1.0, s, p) * std::exp(p.shift);
    for (double t : linspace(s + 0.05, 1.0, 10))
      CHECK(oracle_G(t, s, p) * std::exp(p.shift * t) == Approx(above).margin(1e-10));
  }
}

TEST_CASE("boundary identity G(0,s) - G(1,s) = delta int_0^1 G dt") {
  for (const PeriodicParams p : {PeriodicParams{1.0, 0.5}, {2.0, -0.7}, {-1.5, 0.3},
                                 {0.0, 0.5}, {0.0, -0.8}}) {
    for (double s : {0.2, 0.5, 0.8}) {
      const double lhs = oracle_G(0.0, s, p) - oracle_G(1.0, s, p);
      const double integral = oracle_G_time_integral(s, p);
      CHECK(lhs == Approx(p.delta * integral).margin(1e-10));
    }
    // the slice integral collapses to 1/(M - delta) (-1/delta at M = 0)
    const double expected =
        std::abs(p.shift) < kShiftSwitch ? -1.0 / p.delta : 1.0 / (p.shift - p.delta);
    CHECK(oracle_G_time_integral(0.37, p) == Approx(expected).margin(1e-12));
  }
}

TEST_CASE("kernel solves u' + Mu = 0 off the diagonal") {
  const PeriodicParams p{1.7, 0.6};
  const double h = 1e-6;
  for (double s : {0.31, 0.74})
    for (double t : {0.1, 0.55, 0.9}) {
      if (std::abs(t - s) < 0.05) continue;
      const double dG = (oracle_G(t + h, s, p) - oracle_G(t - h, s, p)) / (2 * h);
      CHECK(dG + p.shift * oracle_G(t, s, p) == Approx(0.0).margin(1e-6));
    }
}

TEST_CASE("symmetry residual vanishes off and on the diagonal") {
  auto gen = testing::rng(3);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (const PeriodicParams p : {PeriodicParams{1.0, 0.5}, {2.0, 3.0}, {0.5, -0.3},
                                 {0.0, 0.6}}) {
    for (int i = 0; i < 30; ++i) {
      double t = unit(gen), s = unit(gen);
      CHECK(std::abs(symmetry_residual(t, s, p)) <= 1e-12);
    }
    CHECK(std::abs(symmetry_residual(0.4, 0.4, p)) <= 1e-12);  // mirrored branches
    // same branch on both sides leaves the unit jump
    const double same = oracle_G(0.4, 0.4, p, TieBranch::t_ge_s) +
                        oracle_G(0.6, 0.6, {-p.shift, -p.delta}, TieBranch::t_ge_s);
    CHECK(std::abs(same) == Approx(1.0).margin(1e-12));
  }
}

TEST_CASE("sign boundaries") {
  auto b1 = sign_boundaries(1.0);
  CHECK(b1.positive_min == Approx(-0.5819767068693265).margin(1e-15));
  CHECK(b1.spectrum == 1.0);
  CHECK(b1.negative_max == Approx(1.5819767068693265).margin(1e-15));
  auto b0 = sign_boundaries(0.0);
  CHECK(b0.positive_min == -1.0);
  CHECK(b0.spectrum == 0.0);
  CHECK(b0.negative_max == 1.0);
  auto bm1 = sign_boundaries(-1.0);
  CHECK(bm1.positive_min == Approx(-1.5819767068693265).margin(1e-15));
  CHECK(bm1.negative_max == Approx(0.5819767068693265).margin(1e-15));
  auto b3 = sign_boundaries(3.0);
  CHECK(b3.positive_min == Approx(-0.15718708947376786).margin(1e-15));
  CHECK(b3.negative_max == Approx(3.157187089473768).margin(1e-14));
  // boundaries are continuous through M = 0
  auto btiny = sign_boundaries(1e-9);
  CHECK(btiny.positive_min == Approx(-1.0).margin(1e-8));
  CHECK(btiny.negative_max == Approx(1.0).margin(1e-8));
}

TEST_CASE("degenerate boundary deltas touch zero at one corner only") {
  // At delta = M/(1-e^M) the kernel is nonnegative and vanishes exactly at
  // (0, 0) on the t < s branch; at delta = M e^M/(e^M - 1) it is nonpositive
  // and vanishes exactly at (1, 1) on the t >= s branch.
  for (double m : {0.5, 1.0, 2.0}) {
    const auto b = sign_boundaries(m);
    const PeriodicParams lower{m, b.positive_min};
    CHECK(std::abs(oracle_G(0.0, 0.0, lower, TieBranch::t_lt_s)) <= 1e-14);
    for (double t : linspace(0.0, 1.0, 9))
      for (double s : linspace(0.0, 1.0, 9)) {
        if (t == 0.0 && s == 0.0) {
          CHECK(oracle_G(t, s, lower, TieBranch::t_ge_s) > 0.0);
          continue;
        }
        CHECK(oracle_G(t, s, lower, TieBranch::t_ge_s) > 0.0);
        if (t == s) CHECK(oracle_G(t, s, lower, TieBranch::t_lt_s) > 0.0);
      }
    const PeriodicParams upper{m, b.negative_max};
    CHECK(std::abs(oracle_G(1.0, 1.0, upper, TieBranch::t_ge_s)) <= 1e-14);
    for (double t : linspace(0.0, 1.0, 9))
      for (double s : linspace(0.0, 1.0, 9)) {
        if (t == 1.0 && s == 1.0) {
          CHECK(oracle_G(t, s, upper, TieBranch::t_lt_s) < 0.0);
          continue;
        }
        CHECK(oracle_G(t, s, upper, TieBranch::t_ge_s) < 0.0);
        if (t == s) CHECK(oracle_G(t, s, upper, TieBranch::t_lt_s) < 0.0);
      }
  }
}

TEST_CASE("M -> 0 limit converges to the degenerate closed form") {
  for (double m : {1e-3, 1e-4, 1e-5, 1e-6}) {
    double worst = 0.0;
    for (double delta : {0.5, -0.7, 2.0})
      for (double t : linspace(0.05, 0.95, 9))
        for (double s : linspace(0.05, 0.95, 9))
          worst = std::max(worst, std::abs(oracle_G(t, s, {m, delta}) -
                                           oracle_G(t, s, {0.0, delta})));
    CHECK(worst <= 10.0 * m);
  }
}

TEST_CASE("spectrum guards") {
  CHECK_THROWS_AS(oracle_g(0.5, 0.5, 0.0), ResonantProblem);
  CHECK_THROWS_AS(oracle_omega1(0.5, 0.0), ResonantProblem);
  CHECK_THROWS_AS(oracle_G(0.5, 0.5, {1.0, 1.0}), SpectralObstruction);
  CHECK_THROWS_AS(oracle_G(0.5, 0.5, {0.0, 0.0}), SpectralObstruction);
  CHECK_THROWS_AS(oracle_G_time_integral(0.5, {2.0, 2.0}), SpectralObstruction);
  CHECK_NOTHROW(oracle_G(0.5, 0.5, {1.0, 0.9999}));
}
