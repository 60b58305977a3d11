#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "oamdephase/analytic.hpp"
#include "oamdephase/core.hpp"

namespace oamd {

enum class Weighting { GaussianBeam, LgDonut };
enum class MotionModel { AzimuthalOnly, Ballistic };
enum class Estimator { Coherent, ConditionalIncoherent };

Weighting parse_weighting(std::string_view name);
MotionModel parse_motion(std::string_view name);
Estimator parse_estimator(std::string_view name);
std::string_view to_string(Weighting w);
std::string_view to_string(MotionModel m);
std::string_view to_string(Estimator e);

/// Cylindrical position (r, alpha, z) with alpha in [0, 2 pi); Cartesian velocity.
struct Atom {
  double r = 0.0;
  double alpha = 0.0;
  double z = 0.0;
  Eigen::Vector3d velocity = Eigen::Vector3d::Zero();
  double initial_phase = 0.0;  // l alpha(0) + dk z(0)

  friend bool operator==(const Atom&, const Atom&) = default;
};

struct SamplingOptions {
  double cell_length = 0.05;  // m, z uniform on [-L/2, L/2)
  int charge = 0;             // spin-wave charge: donut order and initial phase
  double mismatch = 0.0;      // rad/m, initial phase only
  unsigned workers = 1;
};

struct Ensemble {
  std::vector<Atom> atoms;
  std::uint64_t seed = 0;
  Weighting weighting = Weighting::GaussianBeam;
  ThermalGas gas{};
  double waist = 0.0;
  double elapsed = 0.0;  // s since sampling

  std::size_t size() const { return atoms.size(); }
};

/// Draws atoms from the chosen radial weight and a Maxwell-Boltzmann velocity
/// distribution. Atom i uses the counter-based stream (seed, i), so the result
/// is independent of the worker count.
Ensemble sample_ensemble(std::size_t n_atoms, double waist, const ThermalGas& gas,
                         Weighting weighting, std::uint64_t seed, const SamplingOptions& options = {});

/// Free evolution for a further time t.
Ensemble evolve(const Ensemble& ensemble, double t, MotionModel motion, unsigned workers = 1);

struct EfficiencyEstimate {
  double efficiency = 1.0;
  double standard_error = 0.0;
};

EfficiencyEstimate estimate_efficiency(const Ensemble& before, const Ensemble& after,
                                       const SpinWave& sw, Estimator estimator, unsigned workers = 1);

struct McOptions {
  Weighting weighting = Weighting::GaussianBeam;
  double cell_length = 0.05;
  unsigned workers = 1;
};

/// Evolves one sampled ensemble to every time on the grid and estimates the
/// retrieval efficiency at each.
DecayCurve decay_curve_mc(const SpinWave& sw, const ThermalGas& gas, const Eigen::VectorXd& times,
                          std::size_t n_atoms, MotionModel motion, Estimator estimator,
                          std::uint64_t seed, const McOptions& options = {});

/// Inverse of the regularized lower incomplete gamma function P(k, u) for
/// integer shape k >= 1.
double inverse_gamma_cdf(int shape, double p);

}  // namespace oamd
