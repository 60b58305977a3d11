#include "oamdephase/core.hpp"

#include <algorithm>
#include <cstdlib>

namespace oamd {

double units::seconds_from_us(double microseconds) {
  double s = microseconds / 1e6;
  if (!std::isfinite(s) || to_us(s) == microseconds) return s;
  // Any value produced by to_us has a preimage within a few ulp of the
  // quotient. Other inputs may have none; the plain quotient is returned.
  double lo = s, hi = s;
  for (int i = 0; i < 4; ++i) {
    lo = std::nextafter(lo, -std::numeric_limits<double>::infinity());
    hi = std::nextafter(hi, std::numeric_limits<double>::infinity());
    if (to_us(lo) == microseconds) return lo;
    if (to_us(hi) == microseconds) return hi;
  }
  return s;
}

Lifetime Lifetime::seconds(double s) {
  if (!(s >= 0.0) || !std::isfinite(s)) {
    throw DomainError("lifetime must be finite and >= 0, got " + std::to_string(s));
  }
  return Lifetime(s);
}

Lifetime Lifetime::from_double(double s) {
  if (std::isinf(s) && s > 0) return infinite();
  return seconds(s);
}

double Lifetime::value() const {
  if (!seconds_) throw DomainError("lifetime is infinite");
  return *seconds_;
}

ThermalGas ThermalGas::make(double temperature_kelvin, double atomic_mass_kg) {
  ThermalGas gas{temperature_kelvin, atomic_mass_kg};
  if (!(gas.temperature > 0.0) || !std::isfinite(gas.temperature)) {
    throw DomainError("temperature must be > 0 K");
  }
  if (!(gas.atomic_mass > 0.0) || !std::isfinite(gas.atomic_mass)) {
    throw DomainError("atomic mass must be > 0 kg");
  }
  return gas;
}

double atomic_mass(Species species) {
  using constants::kAtomicMassUnit;
  switch (species) {
    case Species::Rb85: return 84.9117897 * kAtomicMassUnit;
    case Species::Rb87: return 86.909180527 * kAtomicMassUnit;
    case Species::Cs133: return 132.905451961 * kAtomicMassUnit;
  }
  throw DomainError("unknown species");
}

Species parse_species(std::string_view name) {
  if (name == "rb85") return Species::Rb85;
  if (name == "rb87") return Species::Rb87;
  if (name == "cs133" || name == "cs") return Species::Cs133;
  throw ConfigError("unknown species '" + std::string(name) + "' (expected rb85, rb87 or cs133)");
}

std::string_view to_string(Species species) {
  switch (species) {
    case Species::Rb85: return "rb85";
    case Species::Rb87: return "rb87";
    case Species::Cs133: return "cs133";
  }
  return "unknown";
}

ThermalGas gas_for(Species species, double temperature_kelvin) {
  return ThermalGas::make(temperature_kelvin, atomic_mass(species));
}

double thermal_speed(const ThermalGas& gas) {
  if (!(gas.temperature > 0.0) || !(gas.atomic_mass > 0.0)) {
    throw DomainError("thermal_speed: temperature and mass must be > 0");
  }
  return std::sqrt(constants::kBoltzmann * gas.temperature / gas.atomic_mass);
}

OAMMode OAMMode::make(int charge, double waist) {
  if (!(waist > 0.0) || !std::isfinite(waist)) throw DomainError("beam waist must be > 0");
  return OAMMode{charge, waist};
}

SpinWave make_spinwave(const OAMMode& probe, const OAMMode& control, double mismatch) {
  if (!(probe.waist > 0.0) || !(control.waist > 0.0)) {
    throw DomainError("beam waist must be > 0");
  }
  const double scale = std::max(probe.waist, control.waist);
  if (std::abs(probe.waist - control.waist) > 1e-9 * scale) {
    throw ConfigError("probe and control waists differ");
  }
  if (!(mismatch >= 0.0) || !std::isfinite(mismatch)) {
    throw ConfigError("longitudinal mismatch must be finite and >= 0");
  }
  return SpinWave{probe.charge - control.charge, probe.waist, mismatch};
}

void DecayModel::validate() const {
  for (const Lifetime* tau : {&tau_d, &tau_0, &tau_1}) {
    if (tau->is_finite() && !(tau->value() > 0.0)) throw DomainError("decay model lifetimes must be > 0");
  }
  if (!std::isfinite(c1) || !std::isfinite(c2)) throw DomainError("decay model offsets must be finite");
  if (c1 < 0.0 || c2 < 0.0) throw DomainError("decay model requires c1 >= 0 and c2 >= 0");
}

}  // namespace oamd
