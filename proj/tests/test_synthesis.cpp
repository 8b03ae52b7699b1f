#include "catch_amalgamated.hpp"

#include <cmath>

#include "evreg/state_space.hpp"
#include "evreg/synthesis.hpp"

using namespace evreg;

namespace {

LtiPlant bench_plant(int r) {
  LtiPlant p;
  p.a.resize(2, 2);
  p.a << 2.0, 10.0, 0.0, 5.0;
  p.b.resize(2, 1);
  p.b << 1.0, 1.0;
  p.c.resize(2);
  p.c << 2.0 / std::sqrt(5.0), 1.0 / std::sqrt(5.0);
  const double dx[9][2] = {{0.0, 0.0},    {0.01, 0.0},   {-0.01, 0.0},
                           {-0.01, 0.01}, {0.0, 0.01},   {0.01, 0.01},
                           {0.01, -0.01}, {0.0, -0.01},  {-0.01, -0.01}};
  p.offsets.resize(r, 2);
  for (int i = 0; i < r; ++i) p.offsets.row(i) << dx[i][0], dx[i][1];
  return p;
}

Vector bench_setpoint() {
  Vector xd(2);
  xd << -0.2321, 0.0928;
  return xd;
}

}  // namespace

TEST_CASE("transfer-function helpers on closed forms", "[synthesis]") {
  // first-order lag 1/(s+1): unit DC gain, unit peak
  StateSpace lag;
  lag.a = Matrix::Constant(1, 1, -1.0);
  lag.b = Matrix::Constant(1, 1, 1.0);
  lag.c = Matrix::Constant(1, 1, 1.0);
  lag.d = Matrix::Zero(1, 1);
  CHECK(dc_gain(lag)(0, 0) == Catch::Approx(1.0).margin(1e-12));
  CHECK(hinf_norm(lag) == Catch::Approx(1.0).epsilon(2e-3));

  // lightly damped resonance 1/(s^2 + 0.1 s + 1): peak 1/(2 zeta sqrt(1-zeta^2))
  StateSpace res;
  res.a.resize(2, 2);
  res.a << 0.0, 1.0, -1.0, -0.1;
  res.b.resize(2, 1);
  res.b << 0.0, 1.0;
  res.c.resize(1, 2);
  res.c << 1.0, 0.0;
  res.d = Matrix::Zero(1, 1);
  const double zeta = 0.05;
  const double peak = 1.0 / (2.0 * zeta * std::sqrt(1.0 - zeta * zeta));
  CHECK(hinf_norm(res) == Catch::Approx(peak).epsilon(3e-3));

  StateSpace unstable = lag;
  unstable.a(0, 0) = 1.0;
  CHECK_THROWS_AS(dc_gain(unstable), LinalgError);
  CHECK_THROWS_AS(hinf_norm(unstable), LinalgError);
}

TEST_CASE("generalized plant assembly", "[synthesis]") {
  const LtiPlant plant = bench_plant(3);
  const Vector xd = bench_setpoint();
  const GeneralizedPlant p = build_generalized_plant(plant, xd);

  const Eigen::Index n = 2, r = 3;
  CHECK(p.states() == n);
  CHECK(p.inputs() == 1);
  CHECK(p.pixel_count() == r);
  CHECK(p.perf_rows() == n * r);
  CHECK(p.dist_size() == n * r + r);

  CHECK(p.b1.isZero(0.0));
  CHECK(p.b1.rows() == n);
  CHECK(p.b1.cols() == n * r + r);
  CHECK(p.b2.isApprox(plant.b));
  for (Eigen::Index i = 0; i < r; ++i) {
    CHECK(p.c1.block(i * n, 0, n, n).isApprox(Matrix::Identity(n, n)));
    CHECK(p.c2.row(i).transpose().isApprox(plant.c));
    CHECK(p.d21.block(i, i * n, 1, n).transpose().isApprox(plant.c));
    CHECK(p.d21(i, n * r + i) == 1.0);
  }
  CHECK(p.c1.bottomRows(1).isZero(0.0));
  CHECK(p.d11.isZero(0.0));
  CHECK(p.d12.topRows(n * r).isZero(0.0));
  CHECK(p.d12(n * r, 0) == Catch::Approx(1e-4));

  // set-point luminosities per pixel, worked by hand from c'(xd + dx_i)
  REQUIRE(p.d.size() == 3);
  CHECK(p.d(0) == Catch::Approx(-0.166095).margin(1e-6));
  CHECK(p.d(1) == Catch::Approx(-0.157151).margin(1e-6));
  CHECK(p.d(2) == Catch::Approx(-0.175039).margin(1e-6));

  CHECK_THROWS_AS(build_generalized_plant(plant, Vector::Zero(3)), SynthesisError);
  CHECK_THROWS_AS(build_generalized_plant(plant, xd, 0.0), SynthesisError);
}

TEST_CASE("synthesis certificate on the scalar unstable plant", "[synthesis]") {
  LtiPlant plant;
  plant.a = Matrix::Constant(1, 1, 1.0);
  plant.b = Matrix::Constant(1, 1, 1.0);
  plant.c = Vector::Constant(1, 1.0);
  plant.offsets = Matrix::Zero(1, 1);
  const GeneralizedPlant p = build_generalized_plant(plant, Vector::Zero(1));
  const Controller k = synthesize_controller(p);

  CHECK(k.gamma > 0.0);
  CHECK(k.a.rows() == 1);
  CHECK(k.d.isZero(0.0));

  const StateSpace cl = closed_loop(p, k, /*raw=*/false);
  CHECK(is_hurwitz(cl.a));
  CHECK(hinf_norm(cl) <= k.gamma * 1.002);

  // raw map keeps only the pixel-stack rows and has no feedthrough
  const StateSpace raw = closed_loop(p, k, /*raw=*/true);
  CHECK(raw.c.rows() == p.perf_rows());
  CHECK(raw.d.isZero(0.0));

  const ClosedLoopGains g = closed_loop_gains(p, k);
  CHECK(g.g1_hinf >= g.g1_dc);
  CHECK(small_gain_check(g, 0.5 / g.g1_hinf));
  CHECK_FALSE(small_gain_check(g, 2.0 / g.g1_hinf));

  // zero set-point luminosity: no disturbance enters, equilibrium stays put
  CHECK(perturbed_steady_state_error(p, k, Vector::Constant(1, 0.1)) ==
        Catch::Approx(0.0).margin(1e-12));
}

TEST_CASE("synthesis rejects singular problems", "[synthesis]") {
  LtiPlant marginal;
  marginal.a = Matrix::Zero(1, 1);  // pole at the origin
  marginal.b = Matrix::Constant(1, 1, 1.0);
  marginal.c = Vector::Constant(1, 1.0);
  marginal.offsets = Matrix::Zero(1, 1);
  const GeneralizedPlant pm = build_generalized_plant(marginal, Vector::Zero(1));
  CHECK_THROWS_AS(synthesize_controller(pm), SynthesisError);

  GeneralizedPlant broken =
      build_generalized_plant(bench_plant(1), bench_setpoint());
  broken.d12.setZero();
  CHECK_THROWS_AS(synthesize_controller(broken), SynthesisError);
  GeneralizedPlant broken2 =
      build_generalized_plant(bench_plant(1), bench_setpoint());
  broken2.d21.setZero();
  CHECK_THROWS_AS(synthesize_controller(broken2), SynthesisError);
}

TEST_CASE("benchmark loop: certificate and gain anchors", "[synthesis]") {
  const GeneralizedPlant p =
      build_generalized_plant(bench_plant(1), bench_setpoint());
  const Controller k = synthesize_controller(p);
  const StateSpace cl = closed_loop(p, k, /*raw=*/false);
  CHECK(is_hurwitz(cl.a));
  CHECK(hinf_norm(cl, 1e-4) <= k.gamma * 1.002);

  const ClosedLoopGains g = closed_loop_gains(p, k);
  // coarse anchors from an independent reference run of the same pipeline
  CHECK(k.gamma == Catch::Approx(1.9586).epsilon(0.02));
  CHECK(g.g1_dc == Catch::Approx(1.3849).epsilon(0.02));
  CHECK(g.g2_dc == Catch::Approx(1.3849).epsilon(0.02));
  CHECK(g.g1_hinf == Catch::Approx(1.3849).epsilon(0.02));

  const double delta = max_uncertainty(g, p.d, 1, 0.05);
  CHECK(delta == Catch::Approx(0.1669).epsilon(0.02));
  CHECK(small_gain_check(g, delta));
}

TEST_CASE("uncertainty budget closed form and round trip", "[synthesis]") {
  ClosedLoopGains g{2.0, 3.0, 4.0};
  Vector d(4);
  d << 2.0, 0.0, 0.0, 0.0;  // ||d||/sqrt(r) = 1
  const double delta = max_uncertainty(g, d, 4, 0.1);
  CHECK(delta == Catch::Approx(0.999 * 0.1 / 3.2).margin(1e-15));
  // inverting the budget at the uncapped delta returns epsilon exactly
  CHECK(steady_state_bound(g, d, 4, delta / 0.999) ==
        Catch::Approx(0.1).margin(1e-12));

  // small-gain cap binds when the DC budget is looser than 1/g1_hinf
  ClosedLoopGains tight{0.1, 0.01, 50.0};
  CHECK(max_uncertainty(tight, d, 4, 10.0) ==
        Catch::Approx(0.999 / 50.0).margin(1e-15));

  CHECK_THROWS_AS(steady_state_bound(g, d, 4, 0.5), SynthesisError);  // 1/g1_dc
  CHECK_THROWS_AS(max_uncertainty(g, d, 4, -1.0), SynthesisError);
  CHECK_THROWS_AS(max_uncertainty(g, d, 0, 0.1), SynthesisError);
}

TEST_CASE("final-value bound dominates exact perturbed equilibria", "[synthesis]") {
  const GeneralizedPlant p =
      build_generalized_plant(bench_plant(1), bench_setpoint());
  const Controller k = synthesize_controller(p);
  const ClosedLoopGains g = closed_loop_gains(p, k);
  const double delta = max_uncertainty(g, p.d, 1, 0.05);
  const double bound = steady_state_bound(g, p.d, 1, delta);
  for (double f : {1.0, -1.0, 0.5, -0.5, 0.0}) {
    const double err =
        perturbed_steady_state_error(p, k, Vector::Constant(1, f * delta));
    CHECK(err <= bound * 1.01);
  }
}

TEST_CASE("largest admissible event threshold", "[synthesis]") {
  const std::vector<PixelBounds> bounds{{1.0, 1.4}, {0.9, 1.0}};
  const double delta = 0.35;
  const ThresholdReport rep = max_threshold(bounds, delta, std::exp(1.0));

  CHECK(std::pow(std::exp(1.0), -rep.h_star) ==
        Catch::Approx(rep.rho_star).margin(1e-12));
  // the loosest pixel (smallest m/M) sits exactly at the budget
  REQUIRE(rep.per_pixel_delta_z.size() == 2);
  double worst = 0.0;
  for (double dz : rep.per_pixel_delta_z) worst = std::max(worst, dz);
  CHECK(worst == Catch::Approx(delta).margin(1e-12));
  for (double dz : rep.per_pixel_delta_z) CHECK(dz <= delta + 1e-12);

  // base-2 threshold differs by exactly log(e)/log(2)
  const ThresholdReport rep2 = max_threshold(bounds, delta, 2.0);
  CHECK(rep2.h_star == Catch::Approx(rep.h_star / std::log(2.0)).margin(1e-12));
  CHECK(rep2.rho_star == Catch::Approx(rep.rho_star).margin(1e-12));

  // budget at or below the worst-pixel quantization floor is infeasible
  CHECK_THROWS_AS(max_threshold({{1.0, 2.0}}, 1.0 / 3.0, std::exp(1.0)),
                  SynthesisError);
  CHECK_THROWS_AS(max_threshold({}, 0.3, std::exp(1.0)), SynthesisError);
  CHECK_THROWS_AS(max_threshold(bounds, 0.3, 1.0), SynthesisError);
}
