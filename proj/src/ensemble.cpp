#include "oamdephase/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "oamdephase/parallel.hpp"
#include "oamdephase/random.hpp"

namespace oamd {

namespace {

double wrap_angle(double alpha) {
  alpha = std::fmod(alpha, constants::kTwoPi);
  if (alpha < 0.0) alpha += constants::kTwoPi;
  if (alpha >= constants::kTwoPi) alpha = 0.0;
  return alpha;
}

// Regularized lower incomplete gamma P(k, u) for integer k.
double lower_gamma_p(int k, double u) {
  if (u <= 0.0) return 0.0;
  if (u < k + 1.0) {
    // e^{-u} sum_{i >= k} u^i / i!
    double term = std::exp(k * std::log(u) - u - std::lgamma(k + 1.0));
    double sum = term;
    for (int i = k + 1; i < k + 1000; ++i) {
      term *= u / i;
      sum += term;
      if (term < sum * 1e-17) break;
    }
    return std::min(1.0, sum);
  }
  // 1 - e^{-u} sum_{i < k} u^i / i!
  double term = std::exp(-u);
  double sum = term;
  for (int i = 1; i < k; ++i) {
    term *= u / i;
    sum += term;
  }
  return std::max(0.0, 1.0 - sum);
}

}  // namespace

double inverse_gamma_cdf(int shape, double p) {
  if (shape < 1) throw DomainError("inverse_gamma_cdf: shape must be >= 1");
  if (!(p >= 0.0 && p < 1.0)) throw DomainError("inverse_gamma_cdf: p must be in [0, 1)");
  if (p == 0.0) return 0.0;
  if (shape == 1) return -std::log1p(-p);
  double lo = 0.0;
  double hi = shape + 1.0;
  while (lower_gamma_p(shape, hi) < p) {
    lo = hi;
    hi *= 2.0;
  }
  const double log_norm = std::lgamma(static_cast<double>(shape));
  double u = 0.5 * (lo + hi);
  for (int iter = 0; iter < 200; ++iter) {
    const double f = lower_gamma_p(shape, u) - p;
    if (f == 0.0) break;
    (f < 0.0 ? lo : hi) = u;
    const double density = std::exp((shape - 1) * std::log(u) - u - log_norm);
    double next = density > 0.0 ? u - f / density : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - u) <= 1e-15 * u) {
      u = next;
      break;
    }
    u = next;
  }
  return u;
}

Weighting parse_weighting(std::string_view name) {
  if (name == "gaussian-beam") return Weighting::GaussianBeam;
  if (name == "lg-donut") return Weighting::LgDonut;
  throw ConfigError("unknown weighting '" + std::string(name) + "'");
}

MotionModel parse_motion(std::string_view name) {
  if (name == "paper-azimuthal") return MotionModel::AzimuthalOnly;
  if (name == "ballistic") return MotionModel::Ballistic;
  throw ConfigError("unknown motion model '" + std::string(name) + "'");
}

Estimator parse_estimator(std::string_view name) {
  if (name == "coherent") return Estimator::Coherent;
  if (name == "conditional-incoherent") return Estimator::ConditionalIncoherent;
  throw ConfigError("unknown estimator '" + std::string(name) + "'");
}

std::string_view to_string(Weighting w) {
  return w == Weighting::GaussianBeam ? "gaussian-beam" : "lg-donut";
}
std::string_view to_string(MotionModel m) {
  return m == MotionModel::AzimuthalOnly ? "paper-azimuthal" : "ballistic";
}
std::string_view to_string(Estimator e) {
  return e == Estimator::Coherent ? "coherent" : "conditional-incoherent";
}

Ensemble sample_ensemble(std::size_t n_atoms, double waist, const ThermalGas& gas,
                         Weighting weighting, std::uint64_t seed, const SamplingOptions& options) {
  if (n_atoms == 0) throw DomainError("sample_ensemble: n_atoms must be >= 1");
  if (!(waist > 0.0)) throw DomainError("sample_ensemble: waist must be > 0");
  if (!(options.cell_length >= 0.0)) throw DomainError("sample_ensemble: cell length must be >= 0");
  const double nu_s = thermal_speed(gas);
  const int donut_shape = std::abs(options.charge) + 1;

  Ensemble ensemble;
  ensemble.seed = seed;
  ensemble.weighting = weighting;
  ensemble.gas = gas;
  ensemble.waist = waist;
  ensemble.atoms.resize(n_atoms);

  parallel_for(n_atoms, options.workers, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      rng::Stream stream(seed, i);
      Atom& atom = ensemble.atoms[i];
      // u = 2 r^2 / W0^2 is Exp(1) for the Gaussian beam and Gamma(|l| + 1)
      // for the Laguerre-Gaussian donut. r = 0 has zero density; redraw it.
      do {
        const double p = stream.uniform();
        const double u = weighting == Weighting::GaussianBeam ? -std::log1p(-p)
                                                              : inverse_gamma_cdf(donut_shape, p);
        atom.r = waist * std::sqrt(0.5 * u);
      } while (atom.r == 0.0);
      atom.alpha = constants::kTwoPi * stream.uniform();
      atom.z = options.cell_length * (stream.uniform() - 0.5);
      const auto vxy = stream.normal_pair();
      const auto vz = stream.normal_pair();
      atom.velocity = Eigen::Vector3d(vxy[0], vxy[1], vz[0]) * nu_s;
      atom.initial_phase = options.charge * atom.alpha + options.mismatch * atom.z;
    }
  });
  return ensemble;
}

Ensemble evolve(const Ensemble& ensemble, double t, MotionModel motion, unsigned workers) {
  if (!(t >= 0.0)) throw DomainError("evolve: t must be >= 0");
  Ensemble out = ensemble;
  out.elapsed = ensemble.elapsed + t;
  if (t == 0.0) return out;
  if (motion == MotionModel::AzimuthalOnly) {
    for (const auto& atom : ensemble.atoms) {
      if (atom.r == 0.0) throw SingularityError("evolve: atom at r = 0 has no azimuthal velocity");
    }
  }
  parallel_for(out.atoms.size(), workers, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      Atom& atom = out.atoms[i];
      const double c = std::cos(atom.alpha);
      const double s = std::sin(atom.alpha);
      if (motion == MotionModel::AzimuthalOnly) {
        const double v_tangential = -atom.velocity.x() * s + atom.velocity.y() * c;
        atom.alpha = wrap_angle(atom.alpha + v_tangential / atom.r * t);
      } else {
        const Eigen::Vector3d position = Eigen::Vector3d(atom.r * c, atom.r * s, atom.z) + atom.velocity * t;
        atom.r = std::hypot(position.x(), position.y());
        atom.alpha = wrap_angle(std::atan2(position.y(), position.x()));
        atom.z = position.z();
      }
    }
  });
  return out;
}

EfficiencyEstimate estimate_efficiency(const Ensemble& before, const Ensemble& after,
                                       const SpinWave& sw, Estimator estimator, unsigned workers) {
  if (before.size() != after.size() || before.seed != after.seed || before.gas != after.gas ||
      before.waist != after.waist || before.weighting != after.weighting) {
    throw ContractError("estimate_efficiency: ensembles do not describe the same atoms");
  }
  if (after.elapsed < before.elapsed) throw ContractError("estimate_efficiency: 'after' precedes 'before'");
  const std::size_t n = before.size();
  if (n == 0) throw ContractError("estimate_efficiency: empty ensemble");
  const double t = after.elapsed - before.elapsed;
  const int l = sw.topological_charge;
  const double dk = sw.longitudinal_mismatch;
  const double nd = static_cast<double>(n);

  if (estimator == Estimator::ConditionalIncoherent) {
    const double nu_s = thermal_speed(before.gas);
    const double longitudinal = dk * nu_s * t;
    const double longitudinal_factor = std::exp(-longitudinal * longitudinal);
    std::vector<double> values(n);
    parallel_for(n, workers, [&](std::size_t begin, std::size_t end) {
      for (std::size_t i = begin; i < end; ++i) {
        const double k = l * nu_s * t / before.atoms[i].r;
        values[i] = std::exp(-k * k) * longitudinal_factor;
      }
    });
    const double mean = pairwise_sum(values) / nd;
    parallel_for(n, workers, [&](std::size_t begin, std::size_t end) {
      for (std::size_t i = begin; i < end; ++i) {
        const double d = values[i] - mean;
        values[i] = d * d;
      }
    });
    const double se = n > 1 ? std::sqrt(pairwise_sum(values) / (nd - 1.0) / nd) : 0.0;
    return {mean, se};
  }

  std::vector<double> re(n), im(n);
  parallel_for(n, workers, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const double phase = l * (after.atoms[i].alpha - before.atoms[i].alpha) +
                           dk * (after.atoms[i].z - before.atoms[i].z);
      re[i] = std::cos(phase);
      im[i] = std::sin(phase);
    }
  });
  const double sum_re = pairwise_sum(re);
  const double sum_im = pairwise_sum(im);
  const double efficiency = (sum_re * sum_re + sum_im * sum_im) / (nd * nd);
  if (n == 1) return {efficiency, 0.0};

  // Leave-one-out jackknife of |mean phasor|^2.
  std::vector<double> loo(n);
  const double denom = (nd - 1.0) * (nd - 1.0);
  parallel_for(n, workers, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const double a = sum_re - re[i];
      const double b = sum_im - im[i];
      loo[i] = (a * a + b * b) / denom;
    }
  });
  const double loo_mean = pairwise_sum(loo) / nd;
  parallel_for(n, workers, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const double d = loo[i] - loo_mean;
      loo[i] = d * d;
    }
  });
  const double variance = (nd - 1.0) / nd * pairwise_sum(loo);
  return {efficiency, std::sqrt(variance)};
}

DecayCurve decay_curve_mc(const SpinWave& sw, const ThermalGas& gas, const Eigen::VectorXd& times,
                          std::size_t n_atoms, MotionModel motion, Estimator estimator,
                          std::uint64_t seed, const McOptions& options) {
  DecayCurve curve;
  curve.times = times;
  curve.efficiencies = Eigen::VectorXd::Zero(times.size());
  curve.stderrs = Eigen::VectorXd::Zero(times.size());
  curve.validate();

  SamplingOptions sampling;
  sampling.cell_length = options.cell_length;
  sampling.charge = sw.topological_charge;
  sampling.mismatch = sw.longitudinal_mismatch;
  sampling.workers = options.workers;
  const Ensemble initial = sample_ensemble(n_atoms, sw.waist, gas, options.weighting, seed, sampling);

  for (Eigen::Index k = 0; k < times.size(); ++k) {
    const Ensemble later = evolve(initial, times[k], motion, options.workers);
    const auto estimate = estimate_efficiency(initial, later, sw, estimator, options.workers);
    curve.efficiencies[k] = estimate.efficiency;
    (*curve.stderrs)[k] = estimate.standard_error;
  }
  return curve;
}

}  // namespace oamd
