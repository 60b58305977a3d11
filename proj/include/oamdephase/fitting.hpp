#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "oamdephase/analytic.hpp"
#include "oamdephase/core.hpp"

namespace oamd::fit {

enum class ModelKind { Eq6GaussianTau0, Eq6ExpTau0, SingleGaussian, SingleExponential, EtaOam };

ModelKind parse_model(std::string_view name);
std::string_view to_string(ModelKind model);

/// Canonical parameter order of a model, e.g. {c1, c2, tau_d, tau_0, tau_1}.
const std::vector<std::string>& parameter_names(ModelKind model);
bool is_lifetime(std::string_view parameter);
bool is_decay_model(ModelKind model);

/// Model predictions at `inputs` (times in s, or control charges for eta-oam).
/// Lifetime parameters may be +infinity, which disables their factor.
Eigen::VectorXd predict(ModelKind model, const Eigen::VectorXd& params, const Eigen::VectorXd& inputs);

/// Analytic d(prediction_i)/d(param_j) over all canonical parameters.
Eigen::MatrixXd jacobian(ModelKind model, const Eigen::VectorXd& params, const Eigen::VectorXd& inputs);

struct Dataset {
  Eigen::VectorXd inputs;
  Eigen::VectorXd values;
  std::optional<Eigen::VectorXd> stderrs;
  std::string label;

  static Dataset from_curve(const DecayCurve& curve, std::string label = {});
};

struct Bounds {
  double lower = -std::numeric_limits<double>::infinity();
  double upper = std::numeric_limits<double>::infinity();
};

/// Default bounds: lifetimes, c2 and b are positive; c1 and center unbounded.
Bounds default_bounds(std::string_view parameter);

struct FitOptions {
  int max_iterations = 200;
  double initial_damping = 1e-3;
  double cost_tolerance = 1e-10;
  double step_tolerance = 1e-12;
};

/// Parameters are named by their canonical names. `fixed`, `bounds` and
/// `init` apply to every dataset; the per-dataset maps override them.
struct FitProblem {
  ModelKind model = ModelKind::Eq6GaussianTau0;
  std::vector<Dataset> datasets;
  std::map<std::string, double> fixed;
  std::vector<std::map<std::string, double>> fixed_per_dataset;
  std::set<std::string> shared;
  std::map<std::string, Bounds> bounds;
  std::map<std::string, double> init;
  std::vector<std::map<std::string, double>> init_per_dataset;
  FitOptions options;
};

struct FittedParameter {
  std::string name;
  std::optional<std::size_t> dataset;  // empty for shared parameters
  double value = 0.0;
  double standard_error = 0.0;
};

struct FitResult {
  ModelKind model = ModelKind::Eq6GaussianTau0;
  std::vector<FittedParameter> parameters;            // free parameters only
  std::vector<std::map<std::string, double>> fixed;   // per dataset
  std::vector<std::string> dataset_labels;
  double residual_norm = 0.0;  // squared 2-norm of the weighted residuals
  int n_iterations = 0;
  bool converged = false;
  std::string diagnostics;
  std::vector<double> cost_history;  // cost after each accepted step, starting with the initial cost

  /// Free-parameter estimates visible to dataset k (own and shared).
  std::map<std::string, double> estimates(std::size_t k) const;
  std::map<std::string, double> standard_errors(std::size_t k) const;
  /// Free and fixed values for dataset k, in canonical order.
  Eigen::VectorXd full_parameters(std::size_t k) const;
  std::optional<double> value(std::string_view name, std::size_t k) const;
  DecayModel decay_model(std::size_t k) const;
  OamEfficiencyModel oam_model(std::size_t k) const;
};

/// Damped Gauss-Newton (Levenberg-Marquardt) least squares over all datasets.
FitResult fit(const FitProblem& problem);

/// Joint fit of decay curves for several spin-wave charges: tau_0 and tau_1
/// shared, c1, c2 and tau_d per curve, tau_d fixed at infinity where l = 0.
FitResult joint_fit_fig2(std::span<const DecayCurve> curves, std::span<const int> charges,
                         FitOptions options = {});

}  // namespace oamd::fit
