#include <doctest.h>

#include <cmath>

#include "oamdephase/quadrature.hpp"

using namespace oamd;

TEST_CASE("polynomials are exact") {
  const auto r = quad::integrate([](double x) { return x * x; }, 0.0, 1.0);
  CHECK(r.converged);
  CHECK(r.value == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(quad::integrate([](double x) { return x; }, 1.0, 0.0).value == doctest::Approx(-0.5).epsilon(1e-15));
}

TEST_CASE("semi-infinite integrals") {
  const auto r = quad::integrate_to_infinity([](double x) { return std::exp(-x); }, 0.0, {1e-14, 1e-13, 2000});
  CHECK(r.converged);
  CHECK(r.value == doctest::Approx(1.0).epsilon(1e-12));
  // Gaussian tail: int_1^inf e^{-x^2} dx = sqrt(pi)/2 erfc(1).
  const auto tail = quad::integrate_to_infinity([](double x) { return std::exp(-x * x); }, 1.0, {1e-15, 1e-13, 2000});
  CHECK(tail.value == doctest::Approx(std::sqrt(M_PI) / 2.0 * std::erfc(1.0)).epsilon(1e-12));
}

TEST_CASE("endpoint singularity converges with subdivision") {
  const auto r = quad::integrate([](double x) { return 1.0 / std::sqrt(x); }, 0.0, 1.0, {1e-10, 0.0, 5000});
  CHECK(r.value == doctest::Approx(2.0).epsilon(1e-8));
  CHECK(r.evaluations > 15);
}
