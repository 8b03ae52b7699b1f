#include "catch_amalgamated.hpp"

#include <cmath>
#include <string>

#include "evreg/pipeline.hpp"

using namespace evreg;

namespace {

const ExperimentConfig& bench_config() {
  static const ExperimentConfig cfg =
      load_config(std::string(EVREG_SOURCE_DIR) + "/experiments/paper_sec4.cfg");
  return cfg;
}

PipelineOptions first_pixels(int count) {
  PipelineOptions opt;
  for (int i = 1; i <= count; ++i) opt.pixels.push_back(i);
  return opt;
}

}  // namespace

TEST_CASE("single-pixel threshold chain with reference anchors", "[pipeline]") {
  const PipelineResult res = run_threshold(bench_config(), first_pixels(1));

  CHECK(res.plant.pixels() == 1);
  CHECK(res.threshold.h_star > 0.03);
  CHECK(res.threshold.h_star < 0.8);
  // anchors from an independent reference run of the same pipeline
  CHECK(res.controller.gamma == Catch::Approx(1.9586).epsilon(0.02));
  CHECK(res.delta_z_star == Catch::Approx(0.166907).epsilon(0.02));
  CHECK(res.threshold.h_star == Catch::Approx(0.156671).epsilon(0.02));

  const double base = bench_config().base;
  CHECK(std::pow(base, -res.threshold.h_star) ==
        Catch::Approx(res.threshold.rho_star).margin(1e-12));
  CHECK(res.h_used == Catch::Approx(0.9 * res.threshold.h_star).margin(1e-15));
  CHECK(res.rho_used ==
        Catch::Approx(std::pow(base, -res.h_used)).margin(1e-12));
  // backing off the threshold tightens the worst-case estimation error
  CHECK(res.delta_used > 0.0);
  CHECK(res.delta_used < res.delta_z_star);

  CHECK(res.report.gamma == res.controller.gamma);
  CHECK(res.report.g1_dc == res.gains.g1_dc);
  CHECK(res.report.h_star == res.threshold.h_star);
  CHECK(res.report.norm_d == Catch::Approx(res.d.norm()).margin(1e-15));
  CHECK(res.report.epsilon == 0.05);
}

TEST_CASE("threshold shrinks as pixels are added", "[pipeline]") {
  const double h1 = run_threshold(bench_config(), first_pixels(1)).threshold.h_star;
  const double h3 = run_threshold(bench_config(), first_pixels(3)).threshold.h_star;
  const double h9 = run_threshold(bench_config(), first_pixels(9)).threshold.h_star;
  CHECK(h9 <= h3 + 1e-9);
  CHECK(h3 <= h1 + 1e-9);
  CHECK(h9 > 0.03);
}

TEST_CASE("pixel subsets pick matching rows and bounds", "[pipeline]") {
  PipelineOptions opt;
  opt.pixels = {2};
  const PipelineResult res = run_threshold(bench_config(), opt);
  CHECK(res.plant.pixels() == 1);
  CHECK(res.plant.offsets(0, 0) == 0.01);
  CHECK(res.bounds.at(0).m == Catch::Approx(bench_config().bounds.at(1).m));

  PipelineOptions bad;
  bad.pixels = {10};
  CHECK_THROWS_AS(run_threshold(bench_config(), bad), PipelineError);
  bad.pixels = {0};
  CHECK_THROWS_AS(run_threshold(bench_config(), bad), PipelineError);
}

TEST_CASE("unreachable set-point is rejected", "[pipeline]") {
  ExperimentConfig cfg = bench_config();
  cfg.xd << 1.0, 0.0;  // not a forced equilibrium of (A, B)
  try {
    run_threshold(cfg, first_pixels(1));
    FAIL("expected rejection");
  } catch (const PipelineError& e) {
    CHECK(std::string(e.what()).find("not reachable") != std::string::npos);
  }
}

TEST_CASE("explicit threshold override", "[pipeline]") {
  PipelineOptions opt = first_pixels(1);
  opt.h_override = 0.1;
  const PipelineResult res = run_threshold(bench_config(), opt);
  CHECK(res.h_used == 0.1);
  CHECK(res.rho_used ==
        Catch::Approx(std::pow(bench_config().base, -0.1)).margin(1e-12));
}

TEST_CASE("single-pixel closed-loop run meets its certificate", "[pipeline]") {
  const PipelineResult res = run_pipeline(bench_config(), first_pixels(1));

  CHECK(res.pass);
  CHECK(res.err_bound < bench_config().epsilon);
  CHECK(res.sim.err_max_tail <= res.err_bound);
  CHECK(res.sim.events.size() >= 50);
  CHECK(res.sim.events.size() <= 400);
  CHECK(res.sim.sector_violations == 0);
  CHECK(res.sim.max_ratio_drift < 1e-9);
  REQUIRE_FALSE(res.sim.samples.empty());
  CHECK(res.sim.samples.back().t == Catch::Approx(bench_config().sim.horizon));
}

TEST_CASE("camera memory outside the bounds is rejected up front", "[pipeline]") {
  ExperimentConfig cfg = bench_config();
  cfg.sim.q0_policy = Q0Policy::kExplicit;
  cfg.sim.q0_values = {10.0};
  try {
    run_pipeline(cfg, first_pixels(1));
    FAIL("expected rejection");
  } catch (const PipelineError& e) {
    CHECK(std::string(e.what()).find("initial camera memory rejected") !=
          std::string::npos);
  }
}

TEST_CASE("self-check suite is green on the benchmark file", "[pipeline]") {
  const auto checks = verify_formulas(bench_config());
  REQUIRE(checks.size() == 4);
  for (const auto& c : checks) {
    INFO(c.name << ": " << c.detail);
    CHECK(c.ok);
    CHECK_FALSE(c.name.empty());
  }
}

TEST_CASE("sweep rows mirror individual runs", "[pipeline]") {
  const auto rows = run_sweep(bench_config(), {1});
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].r == 1);
  const PipelineResult ref = run_pipeline(bench_config(), first_pixels(1));
  CHECK(rows[0].h_star == Catch::Approx(ref.threshold.h_star).margin(1e-12));
  CHECK(rows[0].err_max == Catch::Approx(ref.sim.err_max_tail).margin(1e-12));
  CHECK(rows[0].events == static_cast<long>(ref.sim.events.size()));

  CHECK_THROWS_AS(run_sweep(bench_config(), {10}), PipelineError);
}
