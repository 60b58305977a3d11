#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "oamdephase/analytic.hpp"
#include "oamdephase/ensemble.hpp"
#include "oamdephase/fitting.hpp"
#include "oamdephase/io.hpp"

namespace oamd {

enum class ScenarioKind { Fig2, Fig3, Fig4, CustomSweep };

ScenarioKind parse_scenario(std::string_view name);
std::string_view to_string(ScenarioKind kind);

struct ScenarioConfig {
  ScenarioKind scenario = ScenarioKind::Fig2;
  double temperature = 328.15;  // K
  Species species = Species::Rb85;
  std::vector<double> waists;   // m
  std::vector<int> probe_charges;
  std::vector<int> control_charges;
  Eigen::VectorXd times;        // s
  /// Grid in multiples of the analytic averaged lifetime of each
  /// configuration; replaces `times` when set.
  std::optional<Eigen::VectorXd> grid_in_lifetimes;
  double storage_time = 0.5e-6;  // s, fig3
  int m_halfwidth = 8;           // fig3 sweeps m over [n - h, n + h]
  std::size_t n_atoms = 200000;
  MotionModel motion = MotionModel::AzimuthalOnly;
  Estimator estimator = Estimator::Coherent;
  Weighting weighting = Weighting::GaussianBeam;
  double mismatch = 0.0;       // rad/m
  double cell_length = 0.05;   // m
  /// Phenomenological longitudinal (Gaussian) and residual (exponential)
  /// decay factors multiplied onto simulated curves.
  std::optional<double> extra_tau0;
  std::optional<double> extra_tau1;
  std::uint64_t seed = 0;
  unsigned workers = 1;

  static ScenarioConfig defaults(ScenarioKind kind);
  ThermalGas gas() const;
  void validate() const;
};

/// Parses a JSON config document. Unknown keys and a missing seed are errors.
ScenarioConfig parse_scenario_config(std::string_view json_text);
std::string scenario_config_json(const ScenarioConfig& config);

struct CurveResult {
  std::string label;
  int probe = 0;
  int control = 0;
  double waist = 0.0;
  SpinWave spin_wave;
  Lifetime analytic_tau_d = Lifetime::infinite();
  DecayCurve curve;
  std::optional<fit::FitResult> fit;  // per-curve fit (fig4, custom-sweep)
};

struct ScanResult {
  std::string label;
  int probe = 0;
  io::OamScan scan;
  fit::FitResult fit;
  double analytic_curvature = 0.0;  // B from the averaged lifetime
};

struct WaistRegression {
  double slope = 0.0;      // s/m
  double intercept = 0.0;  // s
  double r_squared = 0.0;
  double origin_slope = 0.0;  // least-squares slope through the origin
};

struct ScenarioReport {
  ScenarioConfig config;
  std::vector<CurveResult> curves;
  std::vector<ScanResult> scans;
  std::optional<fit::FitResult> joint_fit;
  std::optional<WaistRegression> waist_regression;
};

/// Time grid for one configuration (absolute or scaled by the lifetime).
Eigen::VectorXd grid_for(const ScenarioConfig& config, const SpinWave& sw);

/// Applies the configured extra decay channels to a simulated curve.
DecayCurve apply_extra_channels(const DecayCurve& curve, const ScenarioConfig& config);

WaistRegression regress_lifetime_on_waist(const std::vector<double>& waists, const std::vector<double>& lifetimes);

struct ScenarioHooks {
  std::function<void(const CurveResult&)> on_curve;
  std::function<void(const ScanResult&)> on_scan;
};

ScenarioReport run_scenario(const ScenarioConfig& config, const ScenarioHooks& hooks = {});

struct ComparisonRow {
  std::string quantity;
  double model = 0.0;
  std::optional<double> reference;  // experimental value, never a target
  std::string note;
};

std::vector<ComparisonRow> compare_to_reference(const ScenarioReport& report);
std::string comparison_table(const std::vector<ComparisonRow>& rows, const ScenarioReport& report);

/// Writes curves/scans, fit documents, comparison table and report.json.
/// Files for each configuration are written as soon as it completes.
ScenarioReport run_scenario_to_directory(const ScenarioConfig& config, const std::filesystem::path& dir);

}  // namespace oamd
