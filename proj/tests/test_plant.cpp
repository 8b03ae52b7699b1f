#include "catch_amalgamated.hpp"

#include <cmath>

#include "evreg/plant.hpp"

using namespace evreg;

namespace {

LtiPlant reference_plant() {
  LtiPlant p;
  p.a = Matrix(2, 2);
  p.a << 2, 10, 0, 5;
  p.b = Matrix(2, 1);
  p.b << 1, 1;
  p.c = Vector(2);
  p.c << 2.0 / std::sqrt(5.0), 1.0 / std::sqrt(5.0);
  p.offsets = Matrix(3, 2);
  p.offsets << 0, 0, 0.01, 0, -0.01, 0;
  return p;
}

}  // namespace

TEST_CASE("system validation accepts the reference plant", "[plant]") {
  CHECK_NOTHROW(validate_system(reference_plant()));
}

TEST_CASE("validation reports every defect at once", "[plant]") {
  LtiPlant p;
  p.a = Matrix(2, 2);
  p.a << 1, 0, 0, 2;
  p.b = Matrix(2, 1);
  p.b << 1, 0;  // unstable mode 2 is unreachable
  p.c = Vector(2);
  p.c << 1, 0;  // and invisible from the output
  p.offsets = Matrix::Zero(1, 2);
  try {
    validate_system(p);
    FAIL("expected validation to throw");
  } catch (const PlantError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("stabilizable") != std::string::npos);
    CHECK(msg.find("detectable") != std::string::npos);
  }
}

TEST_CASE("pixel selection reorders rows and checks range", "[plant]") {
  const LtiPlant p = reference_plant();
  const LtiPlant sub = select_pixels(p, {2, 0});
  REQUIRE(sub.pixels() == 2);
  CHECK(sub.offsets(0, 0) == Catch::Approx(-0.01));
  CHECK(sub.offsets(1, 0) == Catch::Approx(0.0));
  CHECK(sub.a.isApprox(p.a));
  CHECK_THROWS_AS(select_pixels(p, {3}), PlantError);
  CHECK_THROWS_AS(select_pixels(p, {-1}), PlantError);
}

TEST_CASE("set-point feasibility distinguishes reachable drifts", "[plant]") {
  const LtiPlant p = reference_plant();
  Vector good(2), exact(2), bad(2);
  good << -0.2321, 0.0928;  // rounded but within the drift tolerance
  exact << -2.5 * 0.0928, 0.0928;
  bad << 1.0, 0.0;  // A xd = [2, 0] leaves span{[1, 1]}
  CHECK(check_setpoint_stabilizable(p, good));
  CHECK(check_setpoint_stabilizable(p, exact));
  CHECK_FALSE(check_setpoint_stabilizable(p, bad));
}

TEST_CASE("coordinate helpers match hand values", "[plant]") {
  const LtiPlant p = reference_plant();
  Vector xd(2);
  xd << -0.2321, 0.0928;

  // A xd = [0.4638, 0.4640]; pinv(B) = [0.5, 0.5] so the shift is 0.4639
  const Vector shift = input_shift(p, xd);
  REQUIRE(shift.size() == 1);
  CHECK(shift(0) == Catch::Approx(0.4639).margin(1e-12));

  const Vector res = drift_residual(p, xd);
  CHECK(res.norm() == Catch::Approx(1e-4 * std::sqrt(2.0)).margin(1e-12));

  Vector u(1);
  u << 1.0;
  CHECK(to_original_control(p, u, xd)(0) ==
        Catch::Approx(1.0 - 0.4639).margin(1e-12));

  Vector x(2);
  x << 0.0179, 0.3428;
  const double y0 = luminosity_output(p, x, 0);
  CHECK(y0 == Catch::Approx((2 * 0.0179 + 0.3428) / std::sqrt(5.0)).margin(1e-12));
  const double y1 = luminosity_output(p, x, 1);
  CHECK(y1 - y0 == Catch::Approx(0.02 / std::sqrt(5.0)).margin(1e-12));
}

TEST_CASE("controllability matrix has full rank for the reference pair", "[plant]") {
  const Matrix cm = controllability_matrix(reference_plant());
  REQUIRE(cm.rows() == 2);
  REQUIRE(cm.cols() == 2);
  CHECK(numerical_rank(cm) == 2);
}
