#include "catch_amalgamated.hpp"

#include <cmath>

#include "evreg/dvs.hpp"

using namespace evreg;

TEST_CASE("contrast ratio from threshold and base", "[dvs]") {
  CHECK(rho_from_threshold(1.0, 2.0) == Catch::Approx(0.5).margin(1e-15));
  CHECK(rho_from_threshold(0.5, 4.0) == Catch::Approx(0.5).margin(1e-15));
  CHECK(rho_from_threshold(2.0, std::exp(1.0)) ==
        Catch::Approx(std::exp(-2.0)).margin(1e-15));
  CHECK_THROWS_AS(rho_from_threshold(0.0, 2.0), DvsError);
  CHECK_THROWS_AS(rho_from_threshold(-1.0, 2.0), DvsError);
  CHECK_THROWS_AS(rho_from_threshold(0.5, 1.0), DvsError);
  CHECK_THROWS_AS(rho_from_threshold(0.5, 0.5), DvsError);
}

TEST_CASE("trigger fires exactly at the guard", "[dvs]") {
  const double h = 0.3, b = 2.0, q = 1.7;
  const double rho = rho_from_threshold(h, b);

  // A hair of slack keeps the guard comparisons away from last-ulp noise in
  // the log/pow round trip.
  SECTION("upper crossing") {
    const auto res = evaluate_trigger(q, q / rho * (1.0 + 1e-12), h, b);
    CHECK(res.triggered);
    CHECK(res.polarity == 1);
    CHECK(res.tau == Catch::Approx(h).margin(1e-9));
  }
  SECTION("lower crossing") {
    const auto res = evaluate_trigger(q, q * rho * (1.0 - 1e-12), h, b);
    CHECK(res.triggered);
    CHECK(res.polarity == -1);
    CHECK(res.tau == Catch::Approx(-h).margin(1e-9));
  }
  SECTION("interior is quiet") {
    CHECK_FALSE(evaluate_trigger(q, q, h, b).triggered);
    CHECK_FALSE(evaluate_trigger(q, q / rho * 0.999, h, b).triggered);
    CHECK_FALSE(evaluate_trigger(q, q * rho * 1.001, h, b).triggered);
  }
  SECTION("log-intensity value") {
    const auto res = evaluate_trigger(q, q * std::pow(b, 0.4), h, b);
    CHECK(res.triggered);
    CHECK(res.tau == Catch::Approx(0.4).margin(1e-12));
  }
  SECTION("non-positive intensities are rejected") {
    CHECK_THROWS_AS(evaluate_trigger(q, 0.0, h, b), DvsError);
    CHECK_THROWS_AS(evaluate_trigger(q, -1.0, h, b), DvsError);
    CHECK_THROWS_AS(evaluate_trigger(0.0, 1.0, h, b), DvsError);
  }
}

TEST_CASE("event application rescales the memory geometrically", "[dvs]") {
  PixelState s{2.0};
  apply_event(s, 1, 0.5);
  CHECK(s.q == Catch::Approx(4.0).margin(1e-15));
  apply_event(s, -1, 0.5);
  CHECK(s.q == Catch::Approx(2.0).margin(1e-15));
}

TEST_CASE("initialization validation enforces bounds and guard interior", "[dvs]") {
  const double rho = 0.5;
  CHECK(validate_initialization(1.0, 1.0, 0.9, 1.1, rho).empty());
  CHECK_FALSE(validate_initialization(0.8, 1.0, 0.9, 1.1, rho).empty());
  CHECK_FALSE(validate_initialization(1.2, 1.0, 0.9, 1.1, rho).empty());
  // ratio y/q exactly on the guard is not strictly inside
  CHECK_FALSE(validate_initialization(1.0, 2.0, 0.5, 2.5, rho).empty());
}

TEST_CASE("camera construction carries the derived ratio", "[dvs]") {
  const DvsCamera cam = make_camera(0.25, 2.0, 3);
  CHECK(cam.h == 0.25);
  CHECK(cam.b == 2.0);
  CHECK(cam.pixels == 3);
  CHECK(cam.rho == Catch::Approx(std::pow(2.0, -0.25)).margin(1e-15));
}
