#include "oamdephase/scenarios.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <json.hpp>
#include <set>

#include "oamdephase/random.hpp"

namespace oamd {

namespace {

using Json = nlohmann::ordered_json;

// Values printed in the captions and text of the reference experiment.
constexpr double kMeasuredTauD_l2 = 1.6e-6;
constexpr double kMeasuredTauD_l4 = 0.74e-6;
constexpr double kMeasuredTau0 = 1.81e-6;
constexpr double kMeasuredTau1 = 3.78e-6;
struct MeasuredWaistPoint {
  double waist;
  double tau_d;
};
constexpr MeasuredWaistPoint kMeasuredWaistSweep[] = {{1.2e-3, 0.427e-6}, {2.0e-3, 0.61e-6}, {3.34e-3, 0.883e-6}};

Eigen::VectorXd linspace(double start, double stop, int points) {
  return Eigen::VectorXd::LinSpaced(points, start, stop);
}

std::string format_short(double value) {
  char buffer[32];
  std::snprintf(buffer, sizeof(buffer), "%g", value);
  return buffer;
}

std::string waist_label(double waist) { return "w" + format_short(units::to_mm(waist)) + "mm"; }

std::vector<double> json_number_list(const Json& value, const std::string& key) {
  if (!value.is_array()) throw ConfigError("config key '" + key + "' must be a list of numbers");
  std::vector<double> out;
  for (const auto& item : value) {
    if (!item.is_number()) throw ConfigError("config key '" + key + "' must be a list of numbers");
    out.push_back(item.get<double>());
  }
  return out;
}

std::vector<int> json_int_list(const Json& value, const std::string& key) {
  if (!value.is_array()) throw ConfigError("config key '" + key + "' must be a list of integers");
  std::vector<int> out;
  for (const auto& item : value) {
    if (!item.is_number_integer()) throw ConfigError("config key '" + key + "' must be a list of integers");
    out.push_back(item.get<int>());
  }
  return out;
}

double json_number(const Json& value, const std::string& key) {
  if (!value.is_number()) throw ConfigError("config key '" + key + "' must be a number");
  return value.get<double>();
}

std::string json_string(const Json& value, const std::string& key) {
  if (!value.is_string()) throw ConfigError("config key '" + key + "' must be a string");
  return value.get<std::string>();
}

Eigen::VectorXd to_vector(const std::vector<double>& values, double scale) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(values.size()));
  for (std::size_t i = 0; i < values.size(); ++i) out[static_cast<Eigen::Index>(i)] = values[i] * scale;
  return out;
}

Json list_of(const Eigen::VectorXd& v, double scale) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i] * scale);
  return out;
}

Json number_or_label(double value) {
  if (std::isinf(value)) return value > 0 ? "infinite" : "-infinite";
  if (std::isnan(value)) return nullptr;
  return value;
}

fit::FitResult fit_single_gaussian(const DecayCurve& curve, const std::string& label) {
  fit::FitProblem problem;
  problem.model = fit::ModelKind::SingleGaussian;
  problem.datasets.push_back(fit::Dataset::from_curve(curve, label));
  problem.fixed["c1"] = 0.0;
  return fit::fit(problem);
}

}  // namespace

ScenarioKind parse_scenario(std::string_view name) {
  if (name == "fig2") return ScenarioKind::Fig2;
  if (name == "fig3") return ScenarioKind::Fig3;
  if (name == "fig4") return ScenarioKind::Fig4;
  if (name == "custom-sweep") return ScenarioKind::CustomSweep;
  throw ConfigError("unknown scenario '" + std::string(name) + "' (expected fig2, fig3, fig4 or custom-sweep)");
}

std::string_view to_string(ScenarioKind kind) {
  switch (kind) {
    case ScenarioKind::Fig2: return "fig2";
    case ScenarioKind::Fig3: return "fig3";
    case ScenarioKind::Fig4: return "fig4";
    case ScenarioKind::CustomSweep: return "custom-sweep";
  }
  return "unknown";
}

ScenarioConfig ScenarioConfig::defaults(ScenarioKind kind) {
  ScenarioConfig c;
  c.scenario = kind;
  c.temperature = units::celsius_to_kelvin(55.0);
  c.times = linspace(0.0, 6e-6, 40);
  switch (kind) {
    case ScenarioKind::Fig2:
      c.waists = {2e-3};
      c.probe_charges = {2};
      c.control_charges = {2, 0, -2};
      c.extra_tau0 = kMeasuredTau0;
      c.extra_tau1 = kMeasuredTau1;
      break;
    case ScenarioKind::Fig3:
      c.waists = {2e-3};
      c.probe_charges = {0, 2, 20};
      c.storage_time = 0.5e-6;
      break;
    case ScenarioKind::Fig4:
      c.waists = {1.2e-3, 2.0e-3, 3.34e-3};
      c.probe_charges = {2};
      c.control_charges = {0};
      c.grid_in_lifetimes = linspace(0.0, 2.0, 40);
      break;
    case ScenarioKind::CustomSweep:
      c.waists = {2e-3};
      c.probe_charges = {2};
      c.control_charges = {0};
      break;
  }
  return c;
}

ThermalGas ScenarioConfig::gas() const { return gas_for(species, temperature); }

void ScenarioConfig::validate() const {
  gas();
  if (waists.empty()) throw ConfigError("config: at least one waist is required");
  for (double w : waists) {
    if (!(w > 0.0) || !std::isfinite(w)) throw ConfigError("config: waists must be > 0");
  }
  if (probe_charges.empty()) throw ConfigError("config: at least one probe charge is required");
  if (n_atoms == 0) throw ConfigError("config: n_atoms must be >= 1");
  if (!(mismatch >= 0.0)) throw ConfigError("config: mismatch must be >= 0");
  if (!(cell_length >= 0.0)) throw ConfigError("config: cell length must be >= 0");
  for (const auto& tau : {extra_tau0, extra_tau1}) {
    if (tau && !(*tau > 0.0)) throw ConfigError("config: extra lifetimes must be > 0");
  }
  if (scenario != ScenarioKind::Fig3) {
    if (control_charges.empty()) throw ConfigError("config: at least one control charge is required");
    const Eigen::VectorXd& grid = grid_in_lifetimes ? *grid_in_lifetimes : times;
    DecayCurve probe{grid, Eigen::VectorXd::Zero(grid.size()), std::nullopt};
    try {
      probe.validate();
    } catch (const ContractError& e) {
      throw ConfigError(std::string("config: time grid invalid: ") + e.what());
    }
  }
  switch (scenario) {
    case ScenarioKind::Fig2:
      if (waists.size() != 1 || probe_charges.size() != 1 || control_charges.size() < 2) {
        throw ConfigError("config: fig2 needs one waist, one probe charge and at least two control charges");
      }
      break;
    case ScenarioKind::Fig3:
      if (!(storage_time > 0.0)) throw ConfigError("config: storage time must be > 0");
      if (m_halfwidth < 2) throw ConfigError("config: m_halfwidth must be >= 2");
      if (waists.size() != 1) throw ConfigError("config: fig3 needs exactly one waist");
      break;
    case ScenarioKind::Fig4:
      if (waists.size() < 2 || probe_charges.size() != 1 || control_charges.size() != 1) {
        throw ConfigError("config: fig4 needs at least two waists and one probe/control pair");
      }
      if (probe_charges[0] == control_charges[0]) throw ConfigError("config: fig4 needs a nonzero charge");
      break;
    case ScenarioKind::CustomSweep: break;
  }
}

ScenarioConfig parse_scenario_config(std::string_view json_text) {
  Json doc;
  try {
    doc = Json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("config: invalid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ConfigError("config: top level must be an object");
  if (!doc.contains("scenario")) throw ConfigError("config: missing key 'scenario'");
  ScenarioConfig c = ScenarioConfig::defaults(parse_scenario(json_string(doc["scenario"], "scenario")));
  if (!doc.contains("seed")) throw ConfigError("config: missing key 'seed' (seeds are mandatory)");

  for (const auto& [key, value] : doc.items()) {
    if (key == "scenario") continue;
    if (key == "seed") {
      if (!value.is_number_unsigned()) throw ConfigError("config key 'seed' must be a non-negative integer");
      c.seed = value.get<std::uint64_t>();
    } else if (key == "temperature_c") {
      c.temperature = units::celsius_to_kelvin(json_number(value, key));
    } else if (key == "species") {
      c.species = parse_species(json_string(value, key));
    } else if (key == "waists_mm") {
      c.waists.clear();
      for (double w : json_number_list(value, key)) c.waists.push_back(units::mm(w));
    } else if (key == "probe_charges") {
      c.probe_charges = json_int_list(value, key);
    } else if (key == "control_charges") {
      c.control_charges = json_int_list(value, key);
    } else if (key == "time_grid_us") {
      std::vector<double> seconds;
      for (double t : json_number_list(value, key)) seconds.push_back(units::seconds_from_us(t));
      c.times = to_vector(seconds, 1.0);
      c.grid_in_lifetimes.reset();
    } else if (key == "time_grid_lifetimes") {
      if (value.is_null()) {
        c.grid_in_lifetimes.reset();
      } else {
        c.grid_in_lifetimes = to_vector(json_number_list(value, key), 1.0);
      }
    } else if (key == "storage_time_us") {
      c.storage_time = units::us(json_number(value, key));
    } else if (key == "m_halfwidth") {
      if (!value.is_number_integer()) throw ConfigError("config key 'm_halfwidth' must be an integer");
      c.m_halfwidth = value.get<int>();
    } else if (key == "n_atoms") {
      if (!value.is_number_unsigned()) throw ConfigError("config key 'n_atoms' must be a positive integer");
      c.n_atoms = value.get<std::size_t>();
    } else if (key == "motion") {
      c.motion = parse_motion(json_string(value, key));
    } else if (key == "estimator") {
      c.estimator = parse_estimator(json_string(value, key));
    } else if (key == "weighting") {
      c.weighting = parse_weighting(json_string(value, key));
    } else if (key == "mismatch_rad_per_m") {
      c.mismatch = json_number(value, key);
    } else if (key == "cell_length_mm") {
      c.cell_length = units::mm(json_number(value, key));
    } else if (key == "extra_tau0_us") {
      c.extra_tau0 = value.is_null() ? std::nullopt : std::optional<double>(units::us(json_number(value, key)));
    } else if (key == "extra_tau1_us") {
      c.extra_tau1 = value.is_null() ? std::nullopt : std::optional<double>(units::us(json_number(value, key)));
    } else if (key == "workers") {
      if (!value.is_number_unsigned() || value.get<unsigned>() == 0) {
        throw ConfigError("config key 'workers' must be a positive integer");
      }
      c.workers = value.get<unsigned>();
    } else {
      throw ConfigError("config: unknown key '" + key + "'");
    }
  }
  c.validate();
  return c;
}

std::string scenario_config_json(const ScenarioConfig& c) {
  Json doc;
  doc["scenario"] = std::string(to_string(c.scenario));
  doc["seed"] = c.seed;
  doc["temperature_c"] = c.temperature - constants::kZeroCelsius;
  doc["species"] = std::string(to_string(c.species));
  doc["waists_mm"] = Json::array();
  for (double w : c.waists) doc["waists_mm"].push_back(units::to_mm(w));
  doc["probe_charges"] = c.probe_charges;
  doc["control_charges"] = c.control_charges;
  doc["time_grid_us"] = list_of(c.times, 1e6);
  doc["time_grid_lifetimes"] = c.grid_in_lifetimes ? list_of(*c.grid_in_lifetimes, 1.0) : Json(nullptr);
  doc["storage_time_us"] = units::to_us(c.storage_time);
  doc["m_halfwidth"] = c.m_halfwidth;
  doc["n_atoms"] = c.n_atoms;
  doc["motion"] = std::string(to_string(c.motion));
  doc["estimator"] = std::string(to_string(c.estimator));
  doc["weighting"] = std::string(to_string(c.weighting));
  doc["mismatch_rad_per_m"] = c.mismatch;
  doc["cell_length_mm"] = units::to_mm(c.cell_length);
  doc["extra_tau0_us"] = c.extra_tau0 ? Json(units::to_us(*c.extra_tau0)) : Json(nullptr);
  doc["extra_tau1_us"] = c.extra_tau1 ? Json(units::to_us(*c.extra_tau1)) : Json(nullptr);
  return doc.dump(2) + "\n";
}

Eigen::VectorXd grid_for(const ScenarioConfig& config, const SpinWave& sw) {
  if (!config.grid_in_lifetimes) return config.times;
  const Lifetime tau = tau_d_avg(sw.waist, sw.topological_charge, thermal_speed(config.gas()));
  if (tau.is_infinite()) throw ConfigError("lifetime-scaled grid needs a nonzero spin-wave charge");
  return *config.grid_in_lifetimes * tau.value();
}

DecayCurve apply_extra_channels(const DecayCurve& curve, const ScenarioConfig& config) {
  if (!config.extra_tau0 && !config.extra_tau1) return curve;
  DecayModel channels;
  channels.c1 = 0.0;
  channels.c2 = 1.0;
  if (config.extra_tau0) channels.tau_0 = Lifetime::seconds(*config.extra_tau0);
  if (config.extra_tau1) channels.tau_1 = Lifetime::seconds(*config.extra_tau1);
  const Eigen::ArrayXd factor = eta_total(curve.times.array(), channels);
  DecayCurve out = curve;
  out.efficiencies = (curve.efficiencies.array() * factor).matrix();
  if (out.stderrs) *out.stderrs = (curve.stderrs->array() * factor).matrix();
  return out;
}

WaistRegression regress_lifetime_on_waist(const std::vector<double>& waists, const std::vector<double>& lifetimes) {
  if (waists.size() != lifetimes.size() || waists.size() < 2) {
    throw ContractError("regression needs at least two (waist, lifetime) pairs");
  }
  const auto n = static_cast<Eigen::Index>(waists.size());
  Eigen::MatrixXd design(n, 2);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    design(i, 0) = 1.0;
    design(i, 1) = waists[static_cast<std::size_t>(i)];
    y[i] = lifetimes[static_cast<std::size_t>(i)];
  }
  const Eigen::Vector2d coef = design.colPivHouseholderQr().solve(y);
  const Eigen::VectorXd residual = y - design * coef;
  const double ss_tot = (y.array() - y.mean()).square().sum();
  WaistRegression out;
  out.intercept = coef[0];
  out.slope = coef[1];
  out.r_squared = ss_tot > 0.0 ? 1.0 - residual.squaredNorm() / ss_tot : 1.0;
  const Eigen::VectorXd w = design.col(1);
  out.origin_slope = w.dot(y) / w.squaredNorm();
  return out;
}

ScenarioReport run_scenario(const ScenarioConfig& config, const ScenarioHooks& hooks) {
  config.validate();
  ScenarioReport report;
  report.config = config;
  const ThermalGas gas = config.gas();
  const double nu_s = thermal_speed(gas);
  McOptions mc{config.weighting, config.cell_length, config.workers};

  auto simulate_curve = [&](int probe, int control, double waist, std::size_t index, std::string label) {
    CurveResult result;
    result.label = std::move(label);
    result.probe = probe;
    result.control = control;
    result.waist = waist;
    result.spin_wave = make_spinwave(OAMMode::make(probe, waist), OAMMode::make(control, waist), config.mismatch);
    result.analytic_tau_d = tau_d_avg(waist, result.spin_wave.topological_charge, nu_s);
    const Eigen::VectorXd grid = grid_for(config, result.spin_wave);
    const DecayCurve raw = decay_curve_mc(result.spin_wave, gas, grid, config.n_atoms, config.motion,
                                          config.estimator, rng::derive_seed(config.seed, index), mc);
    result.curve = apply_extra_channels(raw, config);
    return result;
  };

  switch (config.scenario) {
    case ScenarioKind::Fig2: {
      const int probe = config.probe_charges[0];
      std::vector<DecayCurve> curves;
      std::vector<int> charges;
      for (std::size_t i = 0; i < config.control_charges.size(); ++i) {
        const int control = config.control_charges[i];
        auto result = simulate_curve(probe, control, config.waists[0], i,
                                     "n" + std::to_string(probe) + "_m" + std::to_string(control));
        curves.push_back(result.curve);
        charges.push_back(result.spin_wave.topological_charge);
        report.curves.push_back(std::move(result));
        if (hooks.on_curve) hooks.on_curve(report.curves.back());
      }
      report.joint_fit = fit::joint_fit_fig2(curves, charges);
      break;
    }
    case ScenarioKind::Fig4:
    case ScenarioKind::CustomSweep: {
      std::size_t index = 0;
      for (double waist : config.waists) {
        for (int probe : config.probe_charges) {
          for (int control : config.control_charges) {
            std::string label = "n" + std::to_string(probe) + "_m" + std::to_string(control) + "_" + waist_label(waist);
            auto result = simulate_curve(probe, control, waist, index++, std::move(label));
            if (hooks.on_curve) hooks.on_curve(result);
            result.fit = fit_single_gaussian(result.curve, result.label);
            report.curves.push_back(std::move(result));
          }
        }
      }
      if (config.scenario == ScenarioKind::Fig4) {
        std::vector<double> waists, lifetimes;
        for (const auto& c : report.curves) {
          waists.push_back(c.waist);
          lifetimes.push_back(c.fit->value("tau_d", 0).value());
        }
        report.waist_regression = regress_lifetime_on_waist(waists, lifetimes);
      }
      break;
    }
    case ScenarioKind::Fig3: {
      const double waist = config.waists[0];
      for (std::size_t i = 0; i < config.probe_charges.size(); ++i) {
        const int probe = config.probe_charges[i];
        const std::uint64_t seed = rng::derive_seed(config.seed, i);
        const int points = 2 * config.m_halfwidth + 1;
        ScanResult scan;
        scan.label = "n" + std::to_string(probe);
        scan.probe = probe;
        scan.scan.controls.resize(points);
        scan.scan.efficiencies.resize(points);
        scan.scan.stderrs = Eigen::VectorXd(points);
        for (int k = 0; k < points; ++k) {
          const int control = probe - config.m_halfwidth + k;
          const SpinWave sw =
              make_spinwave(OAMMode::make(probe, waist), OAMMode::make(control, waist), config.mismatch);
          SamplingOptions sampling{config.cell_length, sw.topological_charge, sw.longitudinal_mismatch, config.workers};
          // Every control charge reuses the same atoms so the scan is exactly
          // symmetric in the spin-wave charge.
          const Ensemble initial = sample_ensemble(config.n_atoms, waist, gas, config.weighting, seed, sampling);
          const Ensemble later = evolve(initial, config.storage_time, config.motion, config.workers);
          const auto estimate = estimate_efficiency(initial, later, sw, config.estimator, config.workers);
          DecayCurve point{Eigen::VectorXd::Constant(1, config.storage_time),
                           Eigen::VectorXd::Constant(1, estimate.efficiency),
                           Eigen::VectorXd::Constant(1, estimate.standard_error)};
          point = apply_extra_channels(point, config);
          scan.scan.controls[k] = control;
          scan.scan.efficiencies[k] = point.efficiencies[0];
          (*scan.scan.stderrs)[k] = (*point.stderrs)[0];
        }
        if (hooks.on_scan) hooks.on_scan(scan);
        fit::FitProblem problem;
        problem.model = fit::ModelKind::EtaOam;
        problem.datasets.push_back({scan.scan.controls, scan.scan.efficiencies, scan.scan.stderrs, scan.label});
        scan.fit = fit::fit(problem);
        scan.analytic_curvature = oam_curvature(config.storage_time, waist, nu_s);
        report.scans.push_back(std::move(scan));
      }
      break;
    }
  }
  return report;
}

std::vector<ComparisonRow> compare_to_reference(const ScenarioReport& report) {
  std::vector<ComparisonRow> rows;
  const auto& config = report.config;
  if (config.scenario == ScenarioKind::Fig2 && report.joint_fit) {
    const auto& fit = *report.joint_fit;
    std::optional<double> tau2, tau4;
    for (std::size_t k = 0; k < report.curves.size(); ++k) {
      const auto& c = report.curves[k];
      const int l = std::abs(c.spin_wave.topological_charge);
      if (l == 0) continue;
      const double fitted = fit.value("tau_d", k).value();
      std::optional<double> measured;
      if (l == 2) measured = kMeasuredTauD_l2, tau2 = fitted;
      if (l == 4) measured = kMeasuredTauD_l4, tau4 = fitted;
      rows.push_back({"tau_d_us fitted (l=" + std::to_string(l) + ")", units::to_us(fitted),
                      measured ? std::optional(units::to_us(*measured)) : std::nullopt, "reference only"});
      rows.push_back({"tau_d_us averaged-lifetime formula (l=" + std::to_string(l) + ")",
                      units::to_us(c.analytic_tau_d.value()),
                      measured ? std::optional(units::to_us(*measured)) : std::nullopt,
                      "known model/experiment gap; reference only"});
    }
    if (tau2 && tau4) {
      rows.push_back({"tau_d(l=4)/tau_d(l=2) fitted", *tau4 / *tau2, kMeasuredTauD_l4 / kMeasuredTauD_l2, "reference only"});
      rows.push_back({"tau_d(l=4)/tau_d(l=2) 1/l law", 0.5, kMeasuredTauD_l4 / kMeasuredTauD_l2, "reference only"});
    }
    if (auto v = fit.value("tau_0", 0)) rows.push_back({"tau0_us shared", units::to_us(*v), units::to_us(kMeasuredTau0), "reference only"});
    if (auto v = fit.value("tau_1", 0)) rows.push_back({"tau1_us shared", units::to_us(*v), units::to_us(kMeasuredTau1), "reference only"});
  }
  if (config.scenario == ScenarioKind::Fig3) {
    for (const auto& scan : report.scans) {
      const int n = scan.probe;
      rows.push_back({"fitted center (n=" + std::to_string(n) + ")", scan.fit.value("center", 0).value(),
                      static_cast<double>(n), "efficiency peaks at zero spin-wave charge"});
      rows.push_back({"fitted B (n=" + std::to_string(n) + ")", scan.fit.value("b", 0).value(), std::nullopt,
                      "averaged-lifetime prediction " + io::format_double(scan.analytic_curvature)});
    }
  }
  if (config.scenario == ScenarioKind::Fig4 || config.scenario == ScenarioKind::CustomSweep) {
    std::optional<double> first_measured, last_measured;
    for (const auto& c : report.curves) {
      if (!c.fit) continue;
      std::optional<double> measured;
      if (config.scenario == ScenarioKind::Fig4) {
        for (const auto& point : kMeasuredWaistSweep) {
          if (std::abs(point.waist - c.waist) <= 1e-9 * point.waist) measured = units::to_us(point.tau_d);
        }
      }
      rows.push_back({"tau_d_us fitted (" + c.label + ")", units::to_us(c.fit->value("tau_d", 0).value()), measured,
                      "reference only"});
    }
    if (report.waist_regression && report.curves.size() >= 2) {
      const auto& reg = *report.waist_regression;
      const auto& lo = report.curves.front();
      const auto& hi = report.curves.back();
      const double model_ratio = hi.fit->value("tau_d", 0).value() / lo.fit->value("tau_d", 0).value();
      std::optional<double> measured_ratio;
      if (std::abs(lo.waist - 1.2e-3) < 1e-12 && std::abs(hi.waist - 3.34e-3) < 1e-12) {
        measured_ratio = kMeasuredWaistSweep[2].tau_d / kMeasuredWaistSweep[0].tau_d;
      }
      rows.push_back({"tau_d ratio largest/smallest waist", model_ratio, measured_ratio,
                      "linear-in-waist law predicts " + format_short(hi.waist / lo.waist) + "; documented discrepancy"});
      rows.push_back({"linearity R^2", reg.r_squared, std::nullopt, "tau_d versus waist"});
      rows.push_back({"slope us/mm", reg.slope * 1e3 , std::nullopt, "ordinary least squares"});
      rows.push_back({"intercept us", units::to_us(reg.intercept), std::nullopt, "ordinary least squares"});
      rows.push_back({"slope through origin us/mm", reg.origin_slope * 1e3, std::nullopt, ""});
    }
  }
  return rows;
}

std::string comparison_table(const std::vector<ComparisonRow>& rows, const ScenarioReport& report) {
  std::string out;
  const auto& c = report.config;
  out += "scenario " + std::string(to_string(c.scenario)) + "  seed " + std::to_string(c.seed) + "  n_atoms " +
         std::to_string(c.n_atoms) + "  motion " + std::string(to_string(c.motion)) + "  estimator " +
         std::string(to_string(c.estimator)) + "\n";
  if (c.scenario == ScenarioKind::Fig4 && !c.probe_charges.empty() && !c.control_charges.empty()) {
    out += "spin-wave charge l = " + std::to_string(c.probe_charges[0] - c.control_charges[0]) +
           " (assumed; the measured waist sweep does not state it)\n";
  }
  out += "experimental values are reference annotations, not targets\n";
  char line[256];
  std::snprintf(line, sizeof(line), "%-48s %14s %14s %10s  %s\n", "quantity", "model", "experiment", "ratio", "note");
  out += line;
  for (const auto& row : rows) {
    const std::string experiment = row.reference ? format_short(*row.reference) : "-";
    const std::string ratio = row.reference && *row.reference != 0.0 ? format_short(row.model / *row.reference) : "-";
    std::snprintf(line, sizeof(line), "%-48s %14s %14s %10s  %s\n", row.quantity.c_str(),
                  format_short(row.model).c_str(), experiment.c_str(), ratio.c_str(), row.note.c_str());
    out += line;
  }
  return out;
}

ScenarioReport run_scenario_to_directory(const ScenarioConfig& config, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create directory '" + dir.string() + "': " + ec.message());
  io::write_file(dir / "config.json", scenario_config_json(config));
  ScenarioHooks hooks;
  hooks.on_curve = [&](const CurveResult& c) { io::write_file(dir / ("curve_" + c.label + ".csv"), io::write_curve_csv(c.curve)); };
  hooks.on_scan = [&](const ScanResult& s) { io::write_file(dir / ("scan_" + s.label + ".csv"), io::write_scan_csv(s.scan)); };
  ScenarioReport report = run_scenario(config, hooks);

  Json doc;
  doc["scenario"] = std::string(to_string(config.scenario));
  doc["seed"] = config.seed;
  if (report.joint_fit) io::write_file(dir / "fit_joint.json", io::fit_result_json(*report.joint_fit));
  Json curves = Json::array();
  for (const auto& c : report.curves) {
    Json entry;
    entry["label"] = c.label;
    entry["l"] = c.spin_wave.topological_charge;
    entry["waist_mm"] = units::to_mm(c.waist);
    entry["analytic_tau_d_us"] = number_or_label(units::to_us(c.analytic_tau_d.as_double()));
    entry["curve_file"] = "curve_" + c.label + ".csv";
    if (c.fit) {
      io::write_file(dir / ("fit_" + c.label + ".json"), io::fit_result_json(*c.fit));
      entry["fit_file"] = "fit_" + c.label + ".json";
      entry["fitted_tau_d_us"] = number_or_label(units::to_us(c.fit->value("tau_d", 0).value()));
      entry["converged"] = c.fit->converged;
    }
    curves.push_back(entry);
  }
  doc["curves"] = curves;
  Json scans = Json::array();
  for (const auto& s : report.scans) {
    io::write_file(dir / ("fit_" + s.label + ".json"), io::fit_result_json(s.fit));
    scans.push_back({{"label", s.label},
                     {"probe", s.probe},
                     {"scan_file", "scan_" + s.label + ".csv"},
                     {"fit_file", "fit_" + s.label + ".json"},
                     {"fitted_center", s.fit.value("center", 0).value()},
                     {"fitted_b", s.fit.value("b", 0).value()},
                     {"analytic_b", s.analytic_curvature}});
  }
  doc["scans"] = scans;
  if (report.waist_regression) {
    const auto& r = *report.waist_regression;
    doc["waist_regression"] = {{"slope_us_per_mm", r.slope * 1e3},
                               {"intercept_us", units::to_us(r.intercept)},
                               {"r_squared", r.r_squared},
                               {"origin_slope_us_per_mm", r.origin_slope * 1e3}};
  }
  const auto rows = compare_to_reference(report);
  Json comparison = Json::array();
  for (const auto& row : rows) {
    comparison.push_back({{"quantity", row.quantity},
                          {"model", number_or_label(row.model)},
                          {"experiment", row.reference ? number_or_label(*row.reference) : Json(nullptr)},
                          {"note", row.note}});
  }
  doc["comparison"] = comparison;
  io::write_file(dir / "report.json", doc.dump(2) + "\n");
  io::write_file(dir / "comparison.txt", comparison_table(rows, report));
  return report;
}

}  // namespace oamd
