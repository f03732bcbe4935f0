#include "fmsolve/ode.hpp"

#include <cmath>
#include <complex>

#include <doctest.h>

using namespace fmsolve;
using namespace fmsolve::ode;

TEST_CASE("stability polynomials") {
  using C = std::complex<double>;
  CHECK(stability_value(Method::euler, -2.0) == C(-1.0));
  for (Method m : {Method::euler, Method::midpoint, Method::rk4, Method::dopri5}) {
    CHECK(stability_value(m, 0.0) == C(1.0));
    CHECK(std::abs(stability_value(m, 1.0)) > 1.0);
  }
  const double r = std::abs(stability_value(Method::rk4, -2.78));
  CHECK(r >= 0.99);
  CHECK(r <= 1.01);
  const C z(0.3, -0.7);
  CHECK(std::abs(stability_value(Method::midpoint, z) - (1.0 + z + z * z / 2.0)) < 1e-15);
}

TEST_CASE("dopri5 polynomial matches exp through z^5") {
  const auto coef = stability_coefficients(Method::dopri5);
  REQUIRE(coef.size() == 7);
  double fact = 1.0;
  for (int k = 0; k <= 5; ++k) {
    if (k > 0) {
      fact *= k;
    }
    CHECK(coef[k] == doctest::Approx(1.0 / fact).epsilon(1e-14));
  }
  CHECK(coef[6] == doctest::Approx(1.0 / 600.0).epsilon(1e-12));
}

TEST_CASE("dopri5 stability value equals one step on a linear field") {
  for (double z : {-0.3, -1.7, -3.0}) {
    VectorFieldHandle f(
        [z](double, const StateVector& y) { return StateVector(z * y); });
    StepControlConfig cfg;
    cfg.h_init = 1.0;
    cfg.atol = cfg.rtol = 1e3;
    const SolveTrace tr = integrate_dopri5(f, StateVector::Ones(1), 0.0, 1.0, cfg);
    REQUIRE(tr.steps.size() == 1);
    CHECK(tr.y_final(0) == doctest::Approx(stability_value(Method::dopri5, z).real()).epsilon(1e-13));
  }
}

TEST_CASE("raster geometry") {
  const StabilityRaster r = stability_region_grid(Method::euler, -3.0, 1.0, -2.0, 2.0, 41, 41);
  CHECK(r.re_at(0) == -3.0);
  CHECK(r.re_at(40) == 1.0);
  CHECK(std::abs(r.im_at(20)) < 1e-15);
  CHECK(r.abs_r.size() == 41u * 41u);
  CHECK(r.is_inside(20, 20));   // z = -1
  CHECK_FALSE(r.is_inside(40, 20));  // z = 1
  CHECK(real_axis_extent(r) == doctest::Approx(-2.0).epsilon(1e-12));
  CHECK_THROWS_AS(stability_region_grid(Method::rk4, -1, 1, -1, 1, 1, 5), ConfigError);
}

TEST_CASE("z = 1 is outside every region") {
  for (Method m : {Method::euler, Method::midpoint, Method::rk4, Method::dopri5}) {
    const StabilityRaster r = stability_region_grid(m, -5.0, 2.0, -4.0, 4.0, 141, 161);
    const int i = static_cast<int>(std::lround((1.0 - r.re_min) / r.re_spacing()));
    const int j = static_cast<int>(std::lround((0.0 - r.im_min) / r.im_spacing()));
    CHECK(r.re_at(i) == doctest::Approx(1.0));
    CHECK_FALSE(r.is_inside(i, j));
  }
}

TEST_CASE("real-axis extents at the default resolution") {
  const StabilityRaster rk4 = stability_region_grid(Method::rk4, -5.0, 2.0, -4.0, 4.0, 141, 161);
  CHECK(std::abs(real_axis_extent(rk4) + 2.785) <= rk4.re_spacing());
  const StabilityRaster euler =
      stability_region_grid(Method::euler, -5.0, 2.0, -4.0, 4.0, 141, 161);
  CHECK(std::abs(real_axis_extent(euler) + 2.0) <= euler.re_spacing());
  const StabilityRaster mid =
      stability_region_grid(Method::midpoint, -5.0, 2.0, -4.0, 4.0, 141, 161);
  CHECK(std::abs(real_axis_extent(mid) + 2.0) <= mid.re_spacing());
}

TEST_CASE("region inclusion on the imaginary axis") {
  // RK4 contains part of the imaginary axis; Euler does not.
  CHECK(std::abs(stability_value(Method::rk4, {0.0, 2.0})) <= 1.0);
  CHECK(std::abs(stability_value(Method::euler, {0.0, 0.5})) > 1.0);
}
