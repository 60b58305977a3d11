#include "oamdephase/analytic.hpp"

#include <algorithm>
#include <cstdlib>

#include "oamdephase/quadrature.hpp"

namespace oamd {

void DecayCurve::validate() const {
  if (times.size() != efficiencies.size()) throw ContractError("decay curve: length mismatch");
  if (stderrs && stderrs->size() != times.size()) {
    throw ContractError("decay curve: stderr length mismatch");
  }
  if (times.size() == 0) throw ContractError("decay curve: empty");
  if (!(times[0] >= 0.0)) throw ContractError("decay curve: times must be >= 0");
  for (Eigen::Index i = 1; i < times.size(); ++i) {
    if (!(times[i] > times[i - 1])) throw ContractError("decay curve: times must be strictly increasing");
  }
}

Lifetime tau_d_local(double radius, int l, double nu_s) {
  if (!(radius >= 0.0)) throw DomainError("tau_d_local: radius must be >= 0");
  if (!(nu_s > 0.0)) throw DomainError("tau_d_local: thermal speed must be > 0");
  if (l == 0) return Lifetime::infinite();
  return Lifetime::seconds(radius / (std::abs(l) * nu_s));
}

Lifetime tau_d_avg(double waist, int l, double nu_s) {
  if (!(waist > 0.0)) throw DomainError("tau_d_avg: waist must be > 0");
  if (!(nu_s > 0.0)) throw DomainError("tau_d_avg: thermal speed must be > 0");
  if (l == 0) return Lifetime::infinite();
  return Lifetime::seconds(std::sqrt(constants::kTwoPi) * waist / (4.0 * std::abs(l) * nu_s));
}

double velocity_averaged_phase(double t, double radius, int l, const ThermalGas& gas) {
  if (!(radius > 0.0)) throw SingularityError("velocity_averaged_phase: phase undefined at r = 0");
  if (!(t >= 0.0)) throw DomainError("velocity_averaged_phase: t must be >= 0");
  const double nu_s = thermal_speed(gas);
  const double k = static_cast<double>(l) * nu_s * t / radius;
  return std::exp(-0.5 * k * k);
}

double radial_decay_argument(double t, double waist, int l, double nu_s) {
  return 2.0 * std::sqrt(2.0) * std::abs(l) * nu_s * t / waist;
}

double bessel_xk1(double x) {
  if (x == 0.0) return 1.0;
  if (!(x > 0.0)) throw DomainError("bessel_xk1: x must be >= 0");
  if (x > 700.0) return 0.0;
  return x * std::cyl_bessel_k(1.0, x);
}

double gamma_radial_avg(double t, double waist, int l, double nu_s) {
  if (!(t >= 0.0)) throw DomainError("gamma_radial_avg: t must be >= 0");
  if (!(waist > 0.0)) throw DomainError("gamma_radial_avg: waist must be > 0");
  if (!(nu_s > 0.0)) throw DomainError("gamma_radial_avg: thermal speed must be > 0");
  if (l == 0 || t == 0.0) return 1.0;
  // With u = 2 r^2 / W0^2 the weight becomes e^{-u} du and t^2/tau(r)^2 = a/u.
  const double x = radial_decay_argument(t, waist, l, nu_s);
  const double a = 0.25 * x * x;
  auto integrand = [a](double u) { return u > 0.0 ? std::exp(-u - a / u) : 0.0; };
  const quad::Tolerance tol{1e-15, 1e-12, 4000};
  const double split = std::max(1.0, std::sqrt(a));
  const auto head = quad::integrate(integrand, 0.0, split, tol);
  const auto tail = quad::integrate_to_infinity(integrand, split, tol);
  return std::min(1.0, head.value + tail.value);
}

double gamma_radial_avg_closed_form(double t, double waist, int l, double nu_s) {
  if (l == 0 || t == 0.0) return 1.0;
  return bessel_xk1(radial_decay_argument(t, waist, l, nu_s));
}

double coherent_radial_avg_closed_form(double t, double waist, int l, double nu_s) {
  if (l == 0 || t == 0.0) return 1.0;
  const double y = 2.0 * std::abs(l) * nu_s * t / waist;
  const double amplitude = bessel_xk1(y);
  return amplitude * amplitude;
}

double oam_curvature(double t, double waist, double nu_s) {
  const double rate = 4.0 * nu_s / (std::sqrt(constants::kTwoPi) * waist);
  return t * t * rate * rate;
}

}  // namespace oamd
