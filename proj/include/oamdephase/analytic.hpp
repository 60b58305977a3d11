#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <concepts>
#include <optional>

#include "oamdephase/core.hpp"

namespace oamd {

/// Sampled retrieval efficiency versus storage time (SI seconds).
struct DecayCurve {
  Eigen::VectorXd times;
  Eigen::VectorXd efficiencies;
  std::optional<Eigen::VectorXd> stderrs;

  Eigen::Index size() const { return times.size(); }
  /// Throws ContractError on non-increasing times, negative t0 or length mismatch.
  void validate() const;
};

/// Local azimuthal dephasing lifetime r / (|l| nu_s).
Lifetime tau_d_local(double radius, int l, double nu_s);

/// Gaussian-weighted average of tau_d_local over the beam profile:
/// sqrt(2 pi) W0 / (4 |l| nu_s).
Lifetime tau_d_avg(double waist, int l, double nu_s);

template <std::floating_point Scalar>
Scalar gamma_single(Scalar t, const Lifetime& tau_d) {
  if (tau_d.is_infinite() || t == Scalar(0)) return Scalar(1);
  const Scalar ratio = t / Scalar(tau_d.value());
  return std::exp(-ratio * ratio);
}

template <typename Derived>
Eigen::Array<typename Derived::Scalar, Eigen::Dynamic, 1> gamma_single(
    const Eigen::ArrayBase<Derived>& t, const Lifetime& tau_d) {
  using Scalar = typename Derived::Scalar;
  if (tau_d.is_infinite()) return Eigen::Array<Scalar, Eigen::Dynamic, 1>::Ones(t.size());
  return (-(t / Scalar(tau_d.value())).square()).exp();
}

/// Maxwell-Boltzmann average of the single-atom azimuthal phasor
/// e^{i l v t / r}. Real by symmetry; equals exp(-t^2 / (2 tau_d_local^2)).
double velocity_averaged_phase(double t, double radius, int l, const ThermalGas& gas);

/// Dimensionless argument 2 sqrt(2) |l| nu_s t / W0 of the radially averaged decay.
double radial_decay_argument(double t, double waist, int l, double nu_s);

/// x K1(x), continuous at 0 with value 1.
double bessel_xk1(double x);

/// Exact Gaussian-weighted radial average of exp(-t^2 / tau_d_local(r)^2),
/// computed by adaptive quadrature after the substitution u = 2 r^2 / W0^2.
double gamma_radial_avg(double t, double waist, int l, double nu_s);

/// Closed form of gamma_radial_avg: x K1(x).
double gamma_radial_avg_closed_form(double t, double waist, int l, double nu_s);

/// Squared radial average of the velocity-averaged phasor, (y K1(y))^2 with
/// y = 2 |l| nu_s t / W0. Large-ensemble limit of the coherent estimator.
double coherent_radial_avg_closed_form(double t, double waist, int l, double nu_s);

template <std::floating_point Scalar>
Scalar eta_total(Scalar t, const DecayModel& model) {
  Scalar exponent(0);
  if (model.tau_d.is_finite()) {
    const Scalar r = t / Scalar(model.tau_d.value());
    exponent += r * r;
  }
  if (model.tau_0.is_finite()) {
    const Scalar r = t / Scalar(model.tau_0.value());
    exponent += model.gaussian_tau0 ? r * r : r;
  }
  if (model.tau_1.is_finite()) exponent += t / Scalar(model.tau_1.value());
  return Scalar(model.c1) + Scalar(model.c2) * std::exp(-exponent);
}

template <typename Derived>
Eigen::Array<typename Derived::Scalar, Eigen::Dynamic, 1> eta_total(
    const Eigen::ArrayBase<Derived>& t, const DecayModel& model) {
  Eigen::Array<typename Derived::Scalar, Eigen::Dynamic, 1> out(t.size());
  for (Eigen::Index i = 0; i < t.size(); ++i) out[i] = eta_total(t[i], model);
  return out;
}

template <std::floating_point Scalar>
Scalar eta_oam(Scalar m, const OamEfficiencyModel& model) {
  const Scalar d = m - Scalar(model.center);
  return Scalar(model.c1) + Scalar(model.c2) * std::exp(-Scalar(model.b) * d * d);
}

/// Gaussian curvature B of the efficiency-versus-charge law at storage time t,
/// obtained by inserting tau_d_avg into the azimuthal decay factor:
/// B = t^2 (4 nu_s / (sqrt(2 pi) W0))^2.
double oam_curvature(double t, double waist, double nu_s);

}  // namespace oamd
