#include <doctest.h>

#include <cmath>
#include <random>

#include "oamdephase/analytic.hpp"

using namespace oamd;

namespace {
const double kNu = 179.25418324553781;  // Rb-85 at 55 C
}

TEST_CASE("local lifetime") {
  CHECK(tau_d_local(1e-3, 2, 179.2).value() == doctest::Approx(2.79017857142857e-6).epsilon(1e-13));
  CHECK(tau_d_local(1e-3, -2, 179.2) == tau_d_local(1e-3, 2, 179.2));
  CHECK(tau_d_local(1e-3, 0, 179.2).is_infinite());
  CHECK(tau_d_local(0.0, 2, 179.2).value() == 0.0);
  CHECK_THROWS_AS(tau_d_local(-1e-3, 2, 179.2), DomainError);
}

TEST_CASE("averaged lifetime") {
  CHECK(tau_d_avg(2e-3, 2, 179.2).value() == doctest::Approx(3.49697024920619e-6).epsilon(1e-13));
  CHECK(tau_d_avg(2e-3, 0, 179.2).is_infinite());
  // 1/l scaling is exact in floating point for powers of two.
  for (int l : {1, 2, 4, 8}) {
    CHECK(tau_d_avg(2e-3, l, kNu).value() / tau_d_avg(2e-3, 2 * l, kNu).value() == 2.0);
  }
  // Linear in the waist.
  CHECK(tau_d_avg(3e-3, 2, kNu).value() / tau_d_avg(1.5e-3, 2, kNu).value() == doctest::Approx(2.0).epsilon(1e-15));
  // Equals the Gaussian-weighted mean of r / (|l| nu): E[r] = sqrt(pi/2) W0 / 2.
  CHECK(tau_d_avg(2e-3, 2, kNu).value() ==
        doctest::Approx(std::sqrt(constants::kPi / 2.0) * 1e-3 / (2 * kNu)).epsilon(1e-14));
}

TEST_CASE("total decay function") {
  DecayModel model;
  model.tau_d = Lifetime::seconds(1.6e-6);
  model.tau_0 = Lifetime::seconds(1.81e-6);
  model.tau_1 = Lifetime::seconds(3.78e-6);
  // Independently evaluated at 30 digits.
  const double unit = 0.382733539093358;
  CHECK(eta_total(1e-6, model) == doctest::Approx(unit).epsilon(1e-13));
  model.c1 = 0.05;
  model.c2 = 0.6;
  CHECK(eta_total(1e-6, model) == doctest::Approx(0.05 + 0.6 * unit).epsilon(1e-13));
  CHECK(eta_total(0.0, model) == doctest::Approx(0.65).epsilon(1e-15));

  DecayModel exponential;
  exponential.tau_1 = Lifetime::seconds(2e-6);
  CHECK(eta_total(3e-6, exponential) == doctest::Approx(std::exp(-1.5)).epsilon(1e-15));

  DecayModel none;
  none.c1 = 0.1;
  none.c2 = 0.5;
  for (double t : {0.0, 1e-6, 1.0}) CHECK(eta_total(t, none) == 0.6);

  model.gaussian_tau0 = false;
  const double expected = 0.05 + 0.6 * std::exp(-std::pow(1.0 / 1.6, 2) - 1.0 / 1.81 - 1.0 / 3.78);
  CHECK(eta_total(1e-6, model) == doctest::Approx(expected).epsilon(1e-13));
}

TEST_CASE("vectorized forms agree with the scalar forms") {
  DecayModel model;
  model.tau_d = Lifetime::seconds(2e-6);
  model.tau_1 = Lifetime::seconds(5e-6);
  Eigen::ArrayXd t = Eigen::ArrayXd::LinSpaced(17, 0.0, 8e-6);
  const Eigen::ArrayXd eta = eta_total(t, model);
  const Eigen::ArrayXd g = gamma_single(t, model.tau_d);
  for (Eigen::Index i = 0; i < t.size(); ++i) {
    CHECK(eta[i] == eta_total(t[i], model));
    CHECK(g[i] == doctest::Approx(gamma_single(t[i], model.tau_d)).epsilon(1e-15));
  }
  CHECK((gamma_single(t, Lifetime::infinite()) == 1.0).all());
}

TEST_CASE("single-atom decay is monotone and bounded") {
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> tau(1e-7, 1e-4), time(0.0, 1e-4);
  for (int i = 0; i < 500; ++i) {
    const Lifetime tl = Lifetime::seconds(tau(gen));
    double a = time(gen), b = time(gen);
    if (a > b) std::swap(a, b);
    const double ga = gamma_single(a, tl), gb = gamma_single(b, tl);
    CHECK(ga >= gb);
    CHECK(gb >= 0.0);
    CHECK(ga <= 1.0);
  }
  CHECK(gamma_single(0.0, Lifetime::seconds(1e-9)) == 1.0);
}

TEST_CASE("velocity-averaged phase") {
  const ThermalGas gas = gas_for(Species::Rb85, units::celsius_to_kelvin(55.0));
  const double r = 1e-3, t = 2e-6;
  const double tau = tau_d_local(r, 2, kNu).value();
  CHECK(velocity_averaged_phase(t, r, 2, gas) == doctest::Approx(std::exp(-0.5 * t * t / (tau * tau))).epsilon(1e-14));
  CHECK(velocity_averaged_phase(t, r, 0, gas) == 1.0);
  CHECK_THROWS_AS(velocity_averaged_phase(t, 0.0, 2, gas), SingularityError);
}

TEST_CASE("radial average against independent values") {
  // x = 2 sqrt(2) |l| nu t / W0 and x K1(x), evaluated at 30 digits.
  CHECK(radial_decay_argument(2e-6, 2e-3, 2, kNu) == doctest::Approx(1.0140147882318064).epsilon(1e-15));
  CHECK(gamma_radial_avg(2e-6, 2e-3, 2, kNu) == doctest::Approx(0.596024507480758).epsilon(1e-13));
  CHECK(gamma_radial_avg_closed_form(2e-6, 2e-3, 2, kNu) == doctest::Approx(0.596024507480758).epsilon(1e-13));
  CHECK(bessel_xk1(0.0) == 1.0);
  CHECK(bessel_xk1(1000.0) == 0.0);
  // Small-argument limit x K1(x) -> 1.
  CHECK(bessel_xk1(1e-8) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("radial average special cases") {
  CHECK(gamma_radial_avg(3e-6, 2e-3, 0, kNu) == 1.0);
  CHECK(gamma_radial_avg(0.0, 2e-3, 4, kNu) == 1.0);
  CHECK(gamma_radial_avg_closed_form(3e-6, 2e-3, 0, kNu) == 1.0);
  CHECK(coherent_radial_avg_closed_form(0.0, 2e-3, 2, kNu) == 1.0);
}

TEST_CASE("quadrature and closed form agree over random inputs") {
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> t(0.0, 10e-6), w(0.5e-3, 5e-3);
  std::uniform_int_distribution<int> l(-10, 10);
  for (int i = 0; i < 100; ++i) {
    const double ti = t(gen), wi = w(gen);
    const int li = l(gen);
    const double exact = gamma_radial_avg_closed_form(ti, wi, li, kNu);
    const double quad = gamma_radial_avg(ti, wi, li, kNu);
    // Relative accuracy down to the quadrature's absolute floor.
    CHECK(std::abs(quad - exact) <= 1e-9 * exact + 1e-15);
  }
}

TEST_CASE("radial average is slower than the averaged-lifetime Gaussian at long times") {
  // x K1(x) has an exponential tail, heavier than any Gaussian.
  const Lifetime tau = tau_d_avg(2e-3, 2, kNu);
  const double t = 3.0 * tau.value();
  CHECK(gamma_radial_avg_closed_form(t, 2e-3, 2, kNu) > gamma_single(t, tau));
}

TEST_CASE("charge-scan law") {
  OamEfficiencyModel m{0.02, 0.5, 0.03, 2};
  CHECK(eta_oam(2.0, m) == doctest::Approx(0.52).epsilon(1e-15));
  CHECK(eta_oam(0.0, m) == eta_oam(4.0, m));
  CHECK(oam_curvature(1e-6, 2e-3, 179.2) ==
        doctest::Approx(std::pow(1e-6 * 4 * 179.2 / (std::sqrt(2 * constants::kPi) * 2e-3), 2)).epsilon(1e-14));
}

TEST_CASE("curve validation") {
  DecayCurve c;
  c.times = Eigen::Vector3d(0.0, 1e-6, 2e-6);
  c.efficiencies = Eigen::Vector3d(1.0, 0.5, 0.2);
  CHECK_NOTHROW(c.validate());
  c.times[2] = 1e-6;
  CHECK_THROWS_AS(c.validate(), ContractError);
  c.times[2] = 2e-6;
  c.efficiencies.resize(2);
  CHECK_THROWS_AS(c.validate(), ContractError);
}
