#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace oamd {

// Error taxonomy. The CLI maps these onto exit codes.
struct DomainError : std::domain_error {
  using std::domain_error::domain_error;
};
struct SingularityError : DomainError {
  using DomainError::DomainError;
};
struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct ContractError : std::logic_error {
  using std::logic_error::logic_error;
};

namespace constants {
inline constexpr double kBoltzmann = 1.380649e-23;        // J/K, exact SI
inline constexpr double kAtomicMassUnit = 1.66053906660e-27;  // kg
inline constexpr double kZeroCelsius = 273.15;            // K
inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;
}  // namespace constants

namespace units {
inline constexpr double kMicrosecond = 1e-6;
inline constexpr double kMillimeter = 1e-3;

inline double celsius_to_kelvin(double celsius) { return celsius + constants::kZeroCelsius; }
inline double us(double microseconds) { return microseconds * kMicrosecond; }
inline double mm(double millimeters) { return millimeters * kMillimeter; }
inline double to_us(double seconds) { return seconds * 1e6; }
inline double to_mm(double meters) { return meters * 1e3; }

/// Converts microseconds to seconds. Whenever `microseconds` is itself some
/// `to_us(s)`, the result satisfies `to_us(result) == microseconds` bit-exactly,
/// so files written in microseconds survive a read/write cycle.
double seconds_from_us(double microseconds);
}  // namespace units

/// A lifetime that is either a non-negative duration or infinite (no decay).
class Lifetime {
 public:
  static Lifetime infinite() { return Lifetime{}; }
  static Lifetime seconds(double s);
  /// Accepts +infinity as the infinite variant; everything else must be >= 0.
  static Lifetime from_double(double s);

  bool is_infinite() const { return !seconds_.has_value(); }
  bool is_finite() const { return seconds_.has_value(); }
  /// Throws DomainError when infinite.
  double value() const;
  /// Finite value, or +infinity. Intended for IEEE arithmetic only.
  double as_double() const {
    return seconds_ ? *seconds_ : std::numeric_limits<double>::infinity();
  }

  friend bool operator==(const Lifetime&, const Lifetime&) = default;

 private:
  Lifetime() = default;
  explicit Lifetime(double s) : seconds_(s) {}
  std::optional<double> seconds_;
};

struct ThermalGas {
  double temperature;   // K
  double atomic_mass;   // kg

  /// Validates the invariants; throws DomainError.
  static ThermalGas make(double temperature_kelvin, double atomic_mass_kg);
  friend bool operator==(const ThermalGas&, const ThermalGas&) = default;
};

enum class Species { Rb85, Rb87, Cs133 };

double atomic_mass(Species species);
Species parse_species(std::string_view name);
std::string_view to_string(Species species);
ThermalGas gas_for(Species species, double temperature_kelvin);

/// One-dimensional thermal speed sqrt(k_B T / m).
double thermal_speed(const ThermalGas& gas);

struct OAMMode {
  int charge = 0;
  double waist = 0.0;  // m

  static OAMMode make(int charge, double waist);
  friend bool operator==(const OAMMode&, const OAMMode&) = default;
};

struct SpinWave {
  int topological_charge = 0;       // l = n - m
  double waist = 0.0;               // m
  double longitudinal_mismatch = 0.0;  // rad/m

  friend bool operator==(const SpinWave&, const SpinWave&) = default;
};

/// Maps the probe/control azimuthal phase difference onto a stored spin wave.
SpinWave make_spinwave(const OAMMode& probe, const OAMMode& control, double mismatch = 0.0);

/// Total decay function parameters: c1 + c2 * (product of decay factors).
struct DecayModel {
  double c1 = 0.0;
  double c2 = 1.0;
  Lifetime tau_d = Lifetime::infinite();
  Lifetime tau_0 = Lifetime::infinite();
  Lifetime tau_1 = Lifetime::infinite();
  /// When false the longitudinal factor is e^{-t/tau_0} instead of e^{-t^2/tau_0^2}.
  bool gaussian_tau0 = true;

  void validate() const;
  friend bool operator==(const DecayModel&, const DecayModel&) = default;
};

/// Retrieval efficiency versus control charge: c1 + c2 exp(-b (m - center)^2).
struct OamEfficiencyModel {
  double c1 = 0.0;
  double c2 = 1.0;
  double b = 0.0;
  int center = 0;

  friend bool operator==(const OamEfficiencyModel&, const OamEfficiencyModel&) = default;
};

}  // namespace oamd
