#include "catch_amalgamated.hpp"

#include <cmath>
#include <random>

#include "evreg/estimator.hpp"

using namespace evreg;

TEST_CASE("gain formulas match a hand-worked case", "[estimator]") {
  // m = 1, M = 1.4, rho = 1/2 worked by hand:
  //   q_hat0 = 2*1*1.4/2.4 = 7/6          delta_q = 0.4/2.4 = 1/6
  //   lambda = 2.4*0.5/(1.4+0.25) = 1.2/1.65
  //   delta_z = (1.4-0.25)/1.65 = 1.15/1.65
  //   lambda_bar = 2*1*1.4*0.5/1.65 = 1.4/1.65
  const EstimatorGains g = init_gains({1.0, 1.4}, 0.5);
  CHECK(g.q_hat0 == Catch::Approx(7.0 / 6.0).margin(1e-15));
  CHECK(g.delta_q == Catch::Approx(1.0 / 6.0).margin(1e-15));
  CHECK(g.lambda == Catch::Approx(1.2 / 1.65).margin(1e-15));
  CHECK(g.delta_z == Catch::Approx(1.15 / 1.65).margin(1e-15));
  CHECK(g.lambda_bar == Catch::Approx(1.4 / 1.65).margin(1e-15));
}

TEST_CASE("error bound equals both one-sided worst cases", "[estimator]") {
  // delta_z is the common value of the two extreme relative errors:
  // 1 - lambda(1-delta_q) rho (reference at M, output at the lower guard)
  // and lambda(1+delta_q)/rho - 1 (reference at m, upper guard).  Checking
  // both restatements certifies lambda and delta_z without reusing either
  // closed form.
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> um(0.05, 3.0), ur(0.05, 0.95),
      uk(1.0, 4.0);
  for (int i = 0; i < 25; ++i) {
    const double m = um(rng);
    const double M = m * uk(rng);
    const double rho = ur(rng);
    const EstimatorGains g = init_gains({m, M}, rho);
    const double upper = 1.0 - g.lambda * (1.0 - g.delta_q) * rho;
    const double lower = g.lambda * (1.0 + g.delta_q) / rho - 1.0;
    CHECK(std::abs(upper - g.delta_z) < 1e-12);
    CHECK(std::abs(lower - g.delta_z) < 1e-12);
    CHECK(g.lambda_bar == Catch::Approx(g.lambda * g.q_hat0).margin(1e-15));
    CHECK(g.delta_z > 0.0);
    CHECK(g.delta_z < 1.0);
  }
}

TEST_CASE("error bound grows as the contrast ratio shrinks", "[estimator]") {
  const PixelBounds b{0.8, 1.3};
  double prev = -1.0;
  for (double rho = 0.95; rho > 0.05; rho -= 0.1) {
    const double dz = init_gains(b, rho).delta_z;
    CHECK(dz > prev);
    prev = dz;
  }
}

TEST_CASE("harmonic special case at equal bounds", "[estimator]") {
  for (double rho : {0.2, 0.5, 0.8}) {
    const EstimatorGains g = init_gains({1.7, 1.7}, rho);
    CHECK(g.lambda == Catch::Approx(lambda_harmonic(rho)).margin(1e-15));
    CHECK(g.delta_q == 0.0);
    CHECK(g.q_hat0 == Catch::Approx(1.7).margin(1e-15));
  }
}

TEST_CASE("estimate mirrors events and keeps the ratio constant", "[estimator]") {
  const EstimatorGains g = init_gains({0.9, 1.2}, 0.6);
  EstimatorState s = init_state(g);
  double q = 1.05;  // true reference, unknown to the estimator
  const double ratio = s.q_hat / q;
  std::mt19937 rng(3);
  for (int i = 0; i < 50; ++i) {
    const int polarity = (rng() & 1u) ? 1 : -1;
    update_estimate(s, polarity, 0.6);
    q *= std::pow(0.6, -polarity);
    CHECK(std::abs(s.q_hat / q - ratio) < 1e-12 * std::abs(ratio));
  }
  CHECK(output_estimate(g, s) == Catch::Approx(g.lambda * s.q_hat));
  CHECK(shift_output(2.0, 0.5) == 1.5);
}

TEST_CASE("sector membership check honors the slack", "[estimator]") {
  const double rho = 0.5;
  CHECK(sector_check(1.0, 1.0, rho));
  CHECK(sector_check(0.5, 1.0, rho));   // exactly on the lower edge
  CHECK(sector_check(2.0, 1.0, rho));   // exactly on the upper edge
  CHECK_FALSE(sector_check(0.49, 1.0, rho));
  CHECK_FALSE(sector_check(2.01, 1.0, rho));
  CHECK_THROWS_AS(sector_check(1.0, 0.0, rho), EstimatorError);
}

TEST_CASE("smallest feasible contrast ratio: optimality certificate", "[estimator]") {
  // Verified directly against the constraints, not against the formula: the
  // returned rho admits a lambda_bar meeting the budget, a slightly smaller
  // rho admits none, and at the optimum the feasible interval collapses.
  const auto certify = [](const PixelBounds& b, double delta_bar) {
    const RhoLambda opt = optimal_rho_lambda(b, delta_bar);
    const auto worst = [&](double rho, double lambda_bar) {
      return std::max(1.0 - lambda_bar * rho / b.M,
                      lambda_bar / (b.m * rho) - 1.0);
    };
    CHECK(worst(opt.rho, opt.lambda_bar) <= delta_bar + 1e-9);
    // interval endpoints coincide at the optimum
    const double lo = b.M * (1.0 - delta_bar) / opt.rho;
    const double hi = b.m * opt.rho * (1.0 + delta_bar);
    CHECK(std::abs(lo - hi) < 1e-9 * std::max(1.0, hi));
    CHECK(opt.lambda_bar == Catch::Approx(0.5 * (lo + hi)).margin(1e-9));
    // shrink rho by a hair and the interval must be empty
    const double rho_less = opt.rho * (1.0 - 1e-6);
    CHECK(b.M * (1.0 - delta_bar) / rho_less >
          b.m * rho_less * (1.0 + delta_bar));
  };
  certify({1.0, 1.4}, 0.35);
  certify({0.3, 0.32}, 0.2);
  certify({2.0, 5.0}, 0.8);
}

TEST_CASE("grid oracle agrees with the closed form", "[estimator]") {
  const PixelBounds b{1.0, 1.4};
  const double delta_bar = 0.35;
  const RhoLambda exact = optimal_rho_lambda(b, delta_bar);
  const RhoLambda grid = brute_force_rho_lambda(b, delta_bar);
  CHECK(std::abs(grid.rho - exact.rho) <= 1.0 / 1000.0 + 1e-12);
  CHECK(std::abs(grid.lambda_bar - exact.lambda_bar) <=
        2.0 * b.M / 1000.0 + 1e-12);
  CHECK(grid.rho >= exact.rho - 1e-12);  // never below the true optimum
}

TEST_CASE("infeasible budgets are rejected with context", "[estimator]") {
  const PixelBounds b{1.0, 2.0};  // delta_q = 1/3
  CHECK_THROWS_AS(optimal_rho_lambda(b, 1.0 / 3.0), EstimatorError);
  CHECK_THROWS_AS(optimal_rho_lambda(b, 0.1), EstimatorError);
  CHECK_THROWS_AS(brute_force_rho_lambda(b, 0.1), EstimatorError);
  CHECK_THROWS_AS(brute_force_rho_lambda(b, 0.5, 999), EstimatorError);
  CHECK_THROWS_AS(init_gains({-1.0, 2.0}, 0.5), EstimatorError);
  CHECK_THROWS_AS(init_gains({1.0, 0.5}, 0.5), EstimatorError);
  CHECK_THROWS_AS(init_gains({1.0, 2.0}, 1.5), EstimatorError);
}
