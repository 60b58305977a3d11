#include <doctest.h>

#include <cmath>
#include <vector>

#include "oamdephase/ensemble.hpp"
#include "oamdephase/parallel.hpp"

using namespace oamd;

namespace {
const ThermalGas kGas = gas_for(Species::Rb85, units::celsius_to_kelvin(55.0));
const double kWaist = 2e-3;
}  // namespace

TEST_CASE("sampling is reproducible and independent of workers") {
  SamplingOptions one, many;
  many.workers = 4;
  const Ensemble a = sample_ensemble(5000, kWaist, kGas, Weighting::GaussianBeam, 17, one);
  const Ensemble b = sample_ensemble(5000, kWaist, kGas, Weighting::GaussianBeam, 17, many);
  CHECK(a.atoms == b.atoms);
  const Ensemble c = sample_ensemble(5000, kWaist, kGas, Weighting::GaussianBeam, 18, one);
  CHECK(a.atoms != c.atoms);
  // Prefix property: atom i depends only on (seed, i).
  const Ensemble small = sample_ensemble(100, kWaist, kGas, Weighting::GaussianBeam, 17, one);
  for (std::size_t i = 0; i < small.size(); ++i) CHECK(small.atoms[i] == a.atoms[i]);
}

TEST_CASE("sampled moments match the beam and the gas") {
  const std::size_t n = 200000;
  SamplingOptions opts;
  opts.cell_length = 0.05;
  const Ensemble e = sample_ensemble(n, kWaist, kGas, Weighting::GaussianBeam, 3, opts);
  double r2 = 0.0, vx2 = 0.0, vz = 0.0, zmax = 0.0;
  for (const Atom& a : e.atoms) {
    REQUIRE(a.r > 0.0);
    REQUIRE(a.alpha >= 0.0);
    REQUIRE(a.alpha < constants::kTwoPi);
    r2 += a.r * a.r;
    vx2 += a.velocity.x() * a.velocity.x();
    vz += a.velocity.z();
    zmax = std::max(zmax, std::abs(a.z));
  }
  const double nu = thermal_speed(kGas);
  // Gaussian intensity exp(-2 r^2 / W^2): E[r^2] = W^2 / 2.
  CHECK(r2 / n / (kWaist * kWaist / 2.0) == doctest::Approx(1.0).epsilon(0.01));
  CHECK(vx2 / n / (nu * nu) == doctest::Approx(1.0).epsilon(0.01));
  CHECK(std::abs(vz / n) < 5.0 * nu / std::sqrt(double(n)));
  CHECK(zmax <= 0.025);
}

TEST_CASE("donut weighting pushes atoms outward") {
  SamplingOptions opts;
  opts.charge = 2;
  const Ensemble g = sample_ensemble(50000, kWaist, kGas, Weighting::GaussianBeam, 5, opts);
  const Ensemble d = sample_ensemble(50000, kWaist, kGas, Weighting::LgDonut, 5, opts);
  double rg = 0.0, rd = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    rg += g.atoms[i].r * g.atoms[i].r;
    rd += d.atoms[i].r * d.atoms[i].r;
  }
  // u = 2 r^2 / W^2 is Gamma(|l| + 1): E[r^2] = (|l| + 1) W^2 / 2.
  CHECK(rd / rg == doctest::Approx(3.0).epsilon(0.03));
}

TEST_CASE("inverse incomplete gamma") {
  CHECK(inverse_gamma_cdf(1, 0.0) == 0.0);
  CHECK(inverse_gamma_cdf(1, 0.5) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  for (int k : {1, 2, 3, 5, 21}) {
    for (double p : {1e-6, 0.1, 0.5, 0.9, 0.999999}) {
      const double u = inverse_gamma_cdf(k, p);
      // P(k, u) = 1 - e^{-u} sum_{j<k} u^j / j!
      double term = 1.0, sum = 0.0;
      for (int j = 0; j < k; ++j) {
        sum += term;
        term *= u / (j + 1);
      }
      CHECK(1.0 - std::exp(-u) * sum == doctest::Approx(p).epsilon(1e-9));
    }
  }
  CHECK_THROWS_AS(inverse_gamma_cdf(0, 0.5), DomainError);
  CHECK_THROWS_AS(inverse_gamma_cdf(2, 1.0), DomainError);
}

TEST_CASE("zero charge never decays") {
  const SpinWave sw{0, kWaist, 0.0};
  const Eigen::VectorXd times = Eigen::VectorXd::LinSpaced(7, 0.0, 30e-6);
  for (auto motion : {MotionModel::AzimuthalOnly, MotionModel::Ballistic}) {
    for (auto est : {Estimator::Coherent, Estimator::ConditionalIncoherent}) {
      const DecayCurve c = decay_curve_mc(sw, kGas, times, 2000, motion, est, 9);
      for (Eigen::Index k = 0; k < c.size(); ++k) CHECK(c.efficiencies[k] == 1.0);
    }
  }
}

TEST_CASE("efficiency is one at t = 0") {
  const SpinWave sw{4, kWaist, 0.0};
  Eigen::VectorXd times(1);
  times << 0.0;
  for (auto est : {Estimator::Coherent, Estimator::ConditionalIncoherent}) {
    const DecayCurve c = decay_curve_mc(sw, kGas, times, 1000, MotionModel::AzimuthalOnly, est, 1);
    CHECK(c.efficiencies[0] == doctest::Approx(1.0).epsilon(1e-14));
  }
}

TEST_CASE("Monte Carlo tracks the closed forms") {
  const SpinWave sw{2, kWaist, 0.0};
  const double nu = thermal_speed(kGas);
  Eigen::VectorXd times(3);
  times << 1e-6, 2e-6, 3e-6;
  const DecayCurve inc =
      decay_curve_mc(sw, kGas, times, 100000, MotionModel::AzimuthalOnly, Estimator::ConditionalIncoherent, 21);
  const DecayCurve coh = decay_curve_mc(sw, kGas, times, 100000, MotionModel::AzimuthalOnly, Estimator::Coherent, 21);
  for (Eigen::Index k = 0; k < times.size(); ++k) {
    const double a = gamma_radial_avg_closed_form(times[k], kWaist, 2, nu);
    const double b = coherent_radial_avg_closed_form(times[k], kWaist, 2, nu);
    CHECK(std::abs(inc.efficiencies[k] - a) < 4.0 * (*inc.stderrs)[k]);
    CHECK(std::abs(coh.efficiencies[k] - b) < 4.0 * (*coh.stderrs)[k] + 2e-4);
  }
}

TEST_CASE("longitudinal mismatch adds a Gaussian factor") {
  const double dk = 2000.0;  // rad/m
  const double nu = thermal_speed(kGas);
  const SpinWave sw{0, kWaist, dk};
  Eigen::VectorXd times(1);
  times << 2e-6;
  const DecayCurve inc =
      decay_curve_mc(sw, kGas, times, 1000, MotionModel::Ballistic, Estimator::ConditionalIncoherent, 2);
  const double x = dk * nu * 2e-6;
  CHECK(inc.efficiencies[0] == doctest::Approx(std::exp(-x * x)).epsilon(1e-12));
}

TEST_CASE("evolution bookkeeping and contract errors") {
  const Ensemble e = sample_ensemble(10, kWaist, kGas, Weighting::GaussianBeam, 1);
  const Ensemble later = evolve(evolve(e, 1e-6, MotionModel::Ballistic), 2e-6, MotionModel::Ballistic);
  CHECK(later.elapsed == doctest::Approx(3e-6).epsilon(1e-15));
  CHECK_THROWS_AS(evolve(e, -1.0, MotionModel::Ballistic), DomainError);
  const SpinWave sw{2, kWaist, 0.0};
  CHECK_THROWS_AS(estimate_efficiency(later, e, sw, Estimator::Coherent), ContractError);
  const Ensemble other = sample_ensemble(10, kWaist, kGas, Weighting::GaussianBeam, 2);
  CHECK_THROWS_AS(estimate_efficiency(e, evolve(other, 1e-6, MotionModel::Ballistic), sw, Estimator::Coherent),
                  ContractError);
  CHECK_THROWS_AS(sample_ensemble(0, kWaist, kGas, Weighting::GaussianBeam, 1), DomainError);
  CHECK_THROWS_AS(parse_motion("drift"), ConfigError);
  CHECK(parse_motion(to_string(MotionModel::AzimuthalOnly)) == MotionModel::AzimuthalOnly);
  CHECK(to_string(MotionModel::AzimuthalOnly) == "paper-azimuthal");
  CHECK(parse_estimator("conditional-incoherent") == Estimator::ConditionalIncoherent);
  CHECK(parse_weighting(to_string(Weighting::LgDonut)) == Weighting::LgDonut);
}

TEST_CASE("pairwise sum and parallel_for") {
  std::vector<double> v(1000);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<double>(i);
  CHECK(pairwise_sum(v) == 499500.0);
  CHECK(pairwise_sum(std::span<const double>{}) == 0.0);
  std::vector<int> hits(10007, 0);
  parallel_for(hits.size(), 8, [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) ++hits[i];
  });
  for (int h : hits) REQUIRE(h == 1);
  CHECK_THROWS_AS(parallel_for(100, 4,
                               [](std::size_t b, std::size_t) {
                                 if (b > 0) throw DomainError("boom");
                               }),
                  DomainError);
}

TEST_CASE("curves do not depend on the worker count") {
  const SpinWave sw{2, kWaist, 0.0};
  const Eigen::VectorXd times = Eigen::VectorXd::LinSpaced(5, 0.0, 4e-6);
  McOptions one, eight;
  eight.workers = 8;
  for (auto est : {Estimator::Coherent, Estimator::ConditionalIncoherent}) {
    const DecayCurve a = decay_curve_mc(sw, kGas, times, 20000, MotionModel::AzimuthalOnly, est, 4, one);
    const DecayCurve b = decay_curve_mc(sw, kGas, times, 20000, MotionModel::AzimuthalOnly, est, 4, eight);
    CHECK(a.efficiencies == b.efficiencies);
    CHECK(*a.stderrs == *b.stderrs);
  }
}
