#include "oamdephase/cli.hpp"

#include <CLI11.hpp>
#include <chrono>
#include <cstdlib>
#include <sstream>

#include "oamdephase/analytic.hpp"
#include "oamdephase/ensemble.hpp"
#include "oamdephase/fitting.hpp"
#include "oamdephase/io.hpp"
#include "oamdephase/parallel.hpp"
#include "oamdephase/scenarios.hpp"

namespace oamd::cli {

namespace {

struct AnalyticArgs {
  double waist_mm = 0.0;
  int l = 0;
  double temperature_c = 0.0;
  std::string species = "rb85";
  std::vector<double> t_us;
  double c1 = 0.0;
  double c2 = 1.0;
  std::optional<double> tau0_us;
  std::optional<double> tau1_us;
};

struct SimulateArgs {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> workers;
};

struct FitArgs {
  std::vector<std::string> data;
  std::string model = "eq6-gaussian-tau0";
  std::vector<std::string> fix;
  std::vector<std::string> share;
  std::vector<std::string> init;
  std::string out = "fit_result.json";
};

struct ScenarioArgs {
  std::string name;
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> workers;
  std::optional<std::size_t> n_atoms;
};

unsigned resolve_workers(std::optional<unsigned> flag, unsigned from_config) {
  if (flag) return std::max(1u, *flag);
  if (std::getenv("OAMDEPHASE_WORKERS") != nullptr) return default_workers();
  return std::max(1u, from_config);
}

std::string fmt(double v) { return io::format_double(v); }

int run_analytic(const AnalyticArgs& a, std::ostream& out) {
  const ThermalGas gas = gas_for(parse_species(a.species), units::celsius_to_kelvin(a.temperature_c));
  const double waist = units::mm(a.waist_mm);
  if (!(waist > 0.0)) throw DomainError("waist must be > 0");
  const double nu_s = thermal_speed(gas);
  const Lifetime tau = tau_d_avg(waist, a.l, nu_s);

  DecayModel model;
  model.c1 = a.c1;
  model.c2 = a.c2;
  model.tau_d = tau;
  if (a.tau0_us) model.tau_0 = Lifetime::seconds(units::us(*a.tau0_us));
  if (a.tau1_us) model.tau_1 = Lifetime::seconds(units::us(*a.tau1_us));
  model.validate();

  std::ostringstream buf;
  buf << "species " << a.species << "\n";
  buf << "temperature_k " << fmt(gas.temperature) << "\n";
  buf << "nu_s_m_per_s " << fmt(nu_s) << "\n";
  buf << "tau_d_us " << (tau.is_infinite() ? std::string("infinite") : fmt(units::to_us(tau.value()))) << "\n";
  std::vector<double> times = a.t_us;
  if (times.empty()) times = {0.0, 0.5, 1.0, 2.0, 3.0, 4.0};
  buf << "t_us,gamma_gaussian,gamma_radial,eta_total\n";
  for (double t_us : times) {
    if (!(t_us >= 0.0)) throw DomainError("times must be >= 0");
    const double t = units::us(t_us);
    buf << fmt(t_us) << ',' << fmt(gamma_single(t, tau)) << ',' << fmt(gamma_radial_avg(t, waist, a.l, nu_s)) << ','
        << fmt(eta_total(t, model)) << "\n";
  }
  out << buf.str();
  return kSuccess;
}

int run_simulate(const SimulateArgs& a, std::ostream& out) {
  ScenarioConfig config = parse_scenario_config(io::read_file(a.config));
  if (a.seed) config.seed = *a.seed;
  config.workers = resolve_workers(a.workers, config.workers);
  if (config.waists.size() != 1 || config.probe_charges.size() != 1 || config.control_charges.size() != 1) {
    throw ConfigError("simulate needs exactly one waist, one probe charge and one control charge");
  }
  const auto start = std::chrono::steady_clock::now();
  const double waist = config.waists[0];
  const SpinWave sw = make_spinwave(OAMMode::make(config.probe_charges[0], waist),
                                    OAMMode::make(config.control_charges[0], waist), config.mismatch);
  const DecayCurve raw = decay_curve_mc(sw, config.gas(), grid_for(config, sw), config.n_atoms, config.motion,
                                        config.estimator, config.seed,
                                        McOptions{config.weighting, config.cell_length, config.workers});
  io::write_file(a.out, io::write_curve_csv(apply_extra_channels(raw, config)));
  const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
  out << "simulated n_atoms=" << config.n_atoms << " motion=" << to_string(config.motion)
      << " estimator=" << to_string(config.estimator) << " elapsed_s=" << elapsed.count() << "\n";
  return kSuccess;
}

// "name=value" or "name@k=value" with external (unit-suffixed) names.
struct Assignment {
  std::string name;
  std::optional<std::size_t> dataset;
  double value;
};

Assignment parse_assignment(const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos) throw CLI::ValidationError("expected name=value, got '" + text + "'");
  std::string lhs = text.substr(0, eq);
  std::optional<std::size_t> dataset;
  if (const auto at = lhs.find('@'); at != std::string::npos) {
    const auto index = io::parse_double(lhs.substr(at + 1));
    if (!index || *index < 0 || *index != std::floor(*index)) {
      throw CLI::ValidationError("invalid dataset index in '" + text + "'");
    }
    dataset = static_cast<std::size_t>(*index);
    lhs = lhs.substr(0, at);
  }
  const auto value = io::parse_double(text.substr(eq + 1));
  if (!value) throw CLI::ValidationError("invalid number in '" + text + "'");
  const auto [canonical, scale] = io::canonical_parameter_name(lhs);
  return {canonical, dataset, *value * scale};
}

int run_fit(const FitArgs& a, std::ostream& out) {
  fit::FitProblem problem;
  problem.model = fit::parse_model(a.model);
  for (const auto& path : a.data) {
    const std::string text = io::read_file(path);
    try {
      if (problem.model == fit::ModelKind::EtaOam) {
        const auto scan = io::read_scan_csv(text);
        problem.datasets.push_back({scan.controls, scan.efficiencies, scan.stderrs, path});
      } else {
        problem.datasets.push_back(fit::Dataset::from_curve(io::read_curve_csv(text), path));
      }
    } catch (const io::ParseError& e) {
      throw io::ParseError(path + ": " + e.what(), 0);
    }
  }
  const std::size_t n_sets = problem.datasets.size();
  for (const auto& text : a.fix) {
    const auto fix = parse_assignment(text);
    if (fix.dataset) {
      if (*fix.dataset >= n_sets) throw ConfigError("dataset index out of range in '" + text + "'");
      if (problem.fixed_per_dataset.empty()) problem.fixed_per_dataset.resize(n_sets);
      problem.fixed_per_dataset[*fix.dataset][fix.name] = fix.value;
    } else {
      problem.fixed[fix.name] = fix.value;
    }
  }
  for (const auto& text : a.init) {
    const auto init = parse_assignment(text);
    if (init.dataset) {
      if (*init.dataset >= n_sets) throw ConfigError("dataset index out of range in '" + text + "'");
      if (problem.init_per_dataset.empty()) problem.init_per_dataset.resize(n_sets);
      problem.init_per_dataset[*init.dataset][init.name] = init.value;
    } else {
      problem.init[init.name] = init.value;
    }
  }
  for (const auto& name : a.share) problem.shared.insert(io::canonical_parameter_name(name).first);

  const fit::FitResult result = fit::fit(problem);
  io::write_file(a.out, io::fit_result_json(result));

  std::ostringstream buf;
  buf << "model " << fit::to_string(result.model) << "  converged " << (result.converged ? "yes" : "no")
      << "  iterations " << result.n_iterations << "  residual_norm " << fmt(result.residual_norm) << "\n";
  for (const auto& p : result.parameters) {
    const double scale = fit::is_lifetime(p.name) ? 1e6 : 1.0;
    buf << io::external_parameter_name(p.name);
    if (p.dataset) buf << "@" << *p.dataset;
    buf << " = " << fmt(p.value * scale) << " +/- " << fmt(p.standard_error * scale) << "\n";
  }
  if (!result.diagnostics.empty()) buf << "diagnostics: " << result.diagnostics << "\n";
  out << buf.str();
  return result.converged ? kSuccess : kFitNotConverged;
}

int run_scenario_cmd(const ScenarioArgs& a, std::ostream& out) {
  ScenarioConfig config;
  if (!a.config.empty()) {
    config = parse_scenario_config(io::read_file(a.config));
    if (!a.name.empty() && parse_scenario(a.name) != config.scenario) {
      throw ConfigError("scenario name does not match the config file");
    }
  } else {
    config = ScenarioConfig::defaults(parse_scenario(a.name));
    config.seed = 1;
  }
  if (a.seed) config.seed = *a.seed;
  if (a.n_atoms) config.n_atoms = *a.n_atoms;
  config.workers = resolve_workers(a.workers, config.workers);
  const std::string dir = a.out.empty() ? "scenario_" + std::string(to_string(config.scenario)) : a.out;
  const ScenarioReport report = run_scenario_to_directory(config, dir);
  out << comparison_table(compare_to_reference(report), report);
  out << "wrote " << dir << "\n";
  return kSuccess;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Azimuthal dephasing of vortex spin waves in thermal atomic gases"};
  app.name(args.empty() ? "oamdephase" : args[0]);
  app.require_subcommand(1);

  AnalyticArgs analytic;
  auto* analytic_cmd = app.add_subcommand("analytic", "Evaluate the closed-form dephasing model");
  analytic_cmd->add_option("--waist-mm", analytic.waist_mm, "Beam waist W0 [mm]")->required();
  analytic_cmd->add_option("--l", analytic.l, "Spin-wave topological charge")->required();
  analytic_cmd->add_option("--temperature-c", analytic.temperature_c, "Gas temperature [C]")->required();
  analytic_cmd->add_option("--species", analytic.species, "rb85, rb87 or cs133")->capture_default_str();
  analytic_cmd->add_option("--t-us", analytic.t_us, "Storage times [us], space or comma separated")->delimiter(',');
  analytic_cmd->add_option("--c1", analytic.c1, "Background offset for eta_total");
  analytic_cmd->add_option("--c2", analytic.c2, "Initial efficiency for eta_total");
  analytic_cmd->add_option("--tau0-us", analytic.tau0_us, "Longitudinal lifetime [us]");
  analytic_cmd->add_option("--tau1-us", analytic.tau1_us, "Residual lifetime [us]");

  SimulateArgs simulate;
  auto* simulate_cmd = app.add_subcommand("simulate", "Monte Carlo decay curve from a config file");
  simulate_cmd->add_option("config", simulate.config, "Config file (JSON)")->required();
  simulate_cmd->add_option("--out", simulate.out, "Output curve file (CSV)")->required();
  simulate_cmd->add_option("--seed", simulate.seed, "Override the config seed");
  simulate_cmd->add_option("--workers", simulate.workers, "Worker threads (overrides OAMDEPHASE_WORKERS)");

  FitArgs fitting;
  auto* fit_cmd = app.add_subcommand("fit", "Least-squares fit of curve or scan files");
  fit_cmd->add_option("--data", fitting.data, "Data files (CSV)")->required();
  fit_cmd->add_option("--model", fitting.model,
                      "eq6-gaussian-tau0, eq6-exp-tau0, single-gaussian, single-exponential or eta-oam")
      ->capture_default_str();
  fit_cmd->add_option("--fix", fitting.fix, "name=value or name@dataset=value");
  fit_cmd->add_option("--share", fitting.share, "Parameter shared across datasets");
  fit_cmd->add_option("--init", fitting.init, "name=value or name@dataset=value");
  fit_cmd->add_option("--out", fitting.out, "Result document (JSON)")->capture_default_str();

  ScenarioArgs scenario;
  auto* scenario_cmd = app.add_subcommand("scenario", "Run a reproduction scenario");
  scenario_cmd->add_option("name", scenario.name, "fig2, fig3, fig4 or custom-sweep");
  scenario_cmd->add_option("--config", scenario.config, "Config file (JSON)");
  scenario_cmd->add_option("--out", scenario.out, "Output directory");
  scenario_cmd->add_option("--seed", scenario.seed, "Override the seed");
  scenario_cmd->add_option("--workers", scenario.workers, "Worker threads (overrides OAMDEPHASE_WORKERS)");
  scenario_cmd->add_option("--n-atoms", scenario.n_atoms, "Override the ensemble size");

  std::vector<std::string> storage(args.begin(), args.end());
  if (storage.empty()) storage.push_back("oamdephase");
  std::vector<char*> argv;
  for (auto& s : storage) argv.push_back(s.data());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
    if (*scenario_cmd && scenario.name.empty() && scenario.config.empty()) {
      throw CLI::RequiredError("scenario needs a name or --config");
    }
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kSuccess;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kSuccess;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kUsageError;
  }

  try {
    if (*analytic_cmd) return run_analytic(analytic, out);
    if (*simulate_cmd) return run_simulate(simulate, out);
    if (*fit_cmd) return run_fit(fitting, out);
    if (*scenario_cmd) return run_scenario_cmd(scenario, out);
  } catch (const CLI::ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return kUsageError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kRuntimeError;
  }
  return kUsageError;
}

}  // namespace oamd::cli
