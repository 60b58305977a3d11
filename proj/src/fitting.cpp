#include "oamdephase/fitting.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace oamd::fit {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

const std::vector<std::string> kTotalDecayNames = {"c1", "c2", "tau_d", "tau_0", "tau_1"};
const std::vector<std::string> kSingleGaussianNames = {"c1", "c2", "tau_d"};
const std::vector<std::string> kSingleExponentialNames = {"c1", "c2", "tau_1"};
const std::vector<std::string> kEtaOamNames = {"c1", "c2", "b", "center"};

// Product of the decay factors and its lifetime derivatives at one time.
struct DecayEval {
  double envelope;    // product of factors
  double d_tau_d;     // d envelope / d tau_d
  double d_tau_0;
  double d_tau_1;
};

DecayEval eval_decay(double t, double tau_d, double tau_0, double tau_1, bool gaussian_tau0) {
  double exponent = 0.0;
  double dd = 0.0, d0 = 0.0, d1 = 0.0;
  if (std::isfinite(tau_d)) {
    const double r = t / tau_d;
    exponent += r * r;
    dd = 2.0 * r * r / tau_d;
  }
  if (std::isfinite(tau_0)) {
    const double r = t / tau_0;
    if (gaussian_tau0) {
      exponent += r * r;
      d0 = 2.0 * r * r / tau_0;
    } else {
      exponent += r;
      d0 = r / tau_0;
    }
  }
  if (std::isfinite(tau_1)) {
    const double r = t / tau_1;
    exponent += r;
    d1 = r / tau_1;
  }
  const double e = std::exp(-exponent);
  return {e, e * dd, e * d0, e * d1};
}

// Smooth maps from an unconstrained internal coordinate to the bounded value.
struct Transform {
  Bounds bounds;

  double to_external(double q) const {
    const bool lo = std::isfinite(bounds.lower), hi = std::isfinite(bounds.upper);
    if (lo && hi) return bounds.lower + (bounds.upper - bounds.lower) / (1.0 + std::exp(-q));
    if (lo) return bounds.lower + std::exp(q);
    if (hi) return bounds.upper - std::exp(q);
    return q;
  }
  double to_internal(double p) const {
    const bool lo = std::isfinite(bounds.lower), hi = std::isfinite(bounds.upper);
    if (lo && hi) {
      const double s = (p - bounds.lower) / (bounds.upper - bounds.lower);
      return std::log(s / (1.0 - s));
    }
    if (lo) return std::log(p - bounds.lower);
    if (hi) return std::log(bounds.upper - p);
    return p;
  }
  double derivative(double q) const {
    const bool lo = std::isfinite(bounds.lower), hi = std::isfinite(bounds.upper);
    if (lo && hi) {
      const double s = 1.0 / (1.0 + std::exp(-q));
      return (bounds.upper - bounds.lower) * s * (1.0 - s);
    }
    if (lo) return std::exp(q);
    if (hi) return -std::exp(q);
    return 1.0;
  }
};

struct FreeSlot {
  std::string name;
  std::optional<std::size_t> dataset;
  std::size_t model_index;
  Transform transform;
};

// The problem after validation: which canonical entries are free, and where.
struct Layout {
  ModelKind model;
  std::vector<FreeSlot> slots;
  std::vector<Eigen::VectorXd> base;             // per dataset, fixed values filled in
  std::vector<std::vector<int>> slot_of;         // per dataset, per model param: slot or -1
  std::vector<std::map<std::string, double>> fixed;
  std::vector<Eigen::VectorXd> weights;
  std::size_t n_points = 0;
};

std::size_t index_of(ModelKind model, std::string_view name) {
  const auto& names = parameter_names(model);
  const auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) {
    throw ConfigError("parameter '" + std::string(name) + "' does not belong to model " +
                      std::string(to_string(model)));
  }
  return static_cast<std::size_t>(it - names.begin());
}

Eigen::VectorXd weights_for(const Dataset& data) {
  const Eigen::Index n = data.values.size();
  if (!data.stderrs) return Eigen::VectorXd::Ones(n);
  const Eigen::VectorXd& s = *data.stderrs;
  double floor = kInf;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (s[i] > 0.0 && std::isfinite(s[i])) floor = std::min(floor, s[i]);
  }
  if (!std::isfinite(floor)) return Eigen::VectorXd::Ones(n);
  Eigen::VectorXd w(n);
  for (Eigen::Index i = 0; i < n; ++i) w[i] = 1.0 / std::max(s[i], floor);
  return w;
}

// 1/e crossing of the min-max normalized curve, linearly interpolated.
double one_over_e_time(const Dataset& data) {
  const Eigen::VectorXd& t = data.inputs;
  const Eigen::VectorXd& y = data.values;
  const double lo = y.minCoeff(), hi = y.maxCoeff();
  if (!(hi > lo)) return t[t.size() - 1] > 0 ? t[t.size() - 1] : 1.0;
  const double target = std::exp(-1.0);
  for (Eigen::Index i = 1; i < t.size(); ++i) {
    const double a = (y[i - 1] - lo) / (hi - lo);
    const double b = (y[i] - lo) / (hi - lo);
    if (b <= target && a > target) return t[i - 1] + (a - target) / (a - b) * (t[i] - t[i - 1]);
  }
  return std::max(t[t.size() - 1], std::numeric_limits<double>::min());
}

double exponent_share(ModelKind model, std::string_view name, double value, double t) {
  if (!std::isfinite(value)) return 0.0;
  const double r = t / value;
  const bool gaussian = name == "tau_d" || (name == "tau_0" && model == ModelKind::Eq6GaussianTau0);
  return gaussian ? r * r : r;
}

// Heuristic starting values for one dataset; keys are canonical names.
std::map<std::string, double> heuristic_init(ModelKind model, const Dataset& data,
                                             const std::vector<bool>& free_mask,
                                             const Eigen::VectorXd& fixed_values) {
  std::map<std::string, double> init;
  const double lo = data.values.minCoeff(), hi = data.values.maxCoeff();
  init["c1"] = lo;
  init["c2"] = hi > lo ? hi - lo : std::max(std::abs(hi), 1e-12);
  const auto& names = parameter_names(model);
  if (model == ModelKind::EtaOam) {
    Eigen::Index peak = 0;
    data.values.maxCoeff(&peak);
    const double center = data.inputs[peak];
    init["center"] = center;
    const double target = lo + (hi - lo) * std::exp(-1.0);
    double width_sum = 0.0;
    int width_count = 0;
    for (int dir : {-1, 1}) {
      for (Eigen::Index i = peak + dir; i >= 0 && i < data.values.size(); i += dir) {
        if (data.values[i] <= target) {
          width_sum += std::abs(data.inputs[i] - center);
          ++width_count;
          break;
        }
      }
    }
    double width = width_count > 0 ? width_sum / width_count
                                   : 0.5 * (data.inputs.maxCoeff() - data.inputs.minCoeff());
    if (!(width > 0.0)) width = 1.0;
    init["b"] = 1.0 / (width * width);
    return init;
  }

  const double t_e = one_over_e_time(data);
  double remaining = 1.0;
  int free_factors = 0;
  for (std::size_t j = 2; j < names.size(); ++j) {
    if (free_mask[j]) {
      ++free_factors;
    } else {
      remaining -= exponent_share(model, names[j], fixed_values[static_cast<Eigen::Index>(j)], t_e);
    }
  }
  remaining = std::max(remaining, 0.1);
  for (std::size_t j = 2; j < names.size(); ++j) {
    if (!free_mask[j]) continue;
    const double share = remaining / std::max(free_factors, 1);
    const bool gaussian = names[j] == "tau_d" || (names[j] == "tau_0" && model == ModelKind::Eq6GaussianTau0);
    init[names[j]] = gaussian ? t_e / std::sqrt(share) : t_e / share;
  }
  return init;
}

double clamp_into(const Bounds& b, double value) {
  if (value > b.lower && value < b.upper) return value;
  const bool lo = std::isfinite(b.lower), hi = std::isfinite(b.upper);
  if (lo && hi) return b.lower + 0.5 * (b.upper - b.lower);
  if (lo) return b.lower + std::max(std::abs(b.lower), 1.0) * 1e-3;
  if (hi) return b.upper - std::max(std::abs(b.upper), 1.0) * 1e-3;
  return value;
}

Layout build_layout(const FitProblem& problem, Eigen::VectorXd& q0) {
  Layout layout;
  layout.model = problem.model;
  const auto& names = parameter_names(problem.model);
  const std::size_t n_params = names.size();
  const std::size_t n_sets = problem.datasets.size();
  if (n_sets == 0) throw ConfigError("fit: no datasets");
  if (!problem.fixed_per_dataset.empty() && problem.fixed_per_dataset.size() != n_sets) {
    throw ConfigError("fit: fixed_per_dataset must have one entry per dataset");
  }
  if (!problem.init_per_dataset.empty() && problem.init_per_dataset.size() != n_sets) {
    throw ConfigError("fit: init_per_dataset must have one entry per dataset");
  }

  for (const auto& [name, value] : problem.fixed) index_of(problem.model, name);
  for (const auto& name : problem.shared) {
    index_of(problem.model, name);
    if (problem.fixed.count(name)) throw ConfigError("fit: parameter '" + name + "' is both shared and fixed");
  }
  for (const auto& [name, b] : problem.bounds) {
    index_of(problem.model, name);
    if (!(b.lower < b.upper)) throw ConfigError("fit: bounds for '" + name + "' require lower < upper");
  }
  for (const auto& [name, value] : problem.init) index_of(problem.model, name);

  auto bounds_for = [&](const std::string& name) {
    const auto it = problem.bounds.find(name);
    return it != problem.bounds.end() ? it->second : default_bounds(name);
  };

  layout.base.assign(n_sets, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n_params)));
  layout.slot_of.assign(n_sets, std::vector<int>(n_params, -1));
  layout.fixed.assign(n_sets, {});
  std::vector<std::vector<bool>> free_mask(n_sets, std::vector<bool>(n_params, false));

  for (std::size_t k = 0; k < n_sets; ++k) {
    const Dataset& data = problem.datasets[k];
    if (data.inputs.size() != data.values.size() || data.values.size() == 0) {
      throw ConfigError("fit: dataset " + std::to_string(k) + " is empty or has mismatched lengths");
    }
    if (data.stderrs && data.stderrs->size() != data.values.size()) {
      throw ConfigError("fit: dataset " + std::to_string(k) + " stderr length mismatch");
    }
    layout.n_points += static_cast<std::size_t>(data.values.size());
    layout.weights.push_back(weights_for(data));
    for (std::size_t j = 0; j < n_params; ++j) {
      const std::string& name = names[j];
      std::optional<double> fixed_value;
      if (auto it = problem.fixed.find(name); it != problem.fixed.end()) fixed_value = it->second;
      if (!problem.fixed_per_dataset.empty()) {
        const auto& local = problem.fixed_per_dataset[k];
        if (auto it = local.find(name); it != local.end()) {
          if (problem.shared.count(name)) {
            throw ConfigError("fit: shared parameter '" + name + "' cannot be fixed for one dataset");
          }
          fixed_value = it->second;
        }
      }
      if (fixed_value) {
        if (std::isnan(*fixed_value)) throw ConfigError("fit: fixed value for '" + name + "' is NaN");
        if (std::isinf(*fixed_value) && !(is_lifetime(name) && *fixed_value > 0)) {
          throw ConfigError("fit: only lifetimes may be fixed at +infinity");
        }
        layout.base[k][static_cast<Eigen::Index>(j)] = *fixed_value;
        layout.fixed[k][name] = *fixed_value;
      } else {
        free_mask[k][j] = true;
      }
    }
    for (const auto& [name, value] : problem.fixed_per_dataset.empty() ? std::map<std::string, double>{}
                                                                        : problem.fixed_per_dataset[k]) {
      index_of(problem.model, name);
    }
  }

  // Identifiability: two free Gaussian factors on one curve collapse to one.
  if (problem.model == ModelKind::Eq6GaussianTau0) {
    const std::size_t jd = index_of(problem.model, "tau_d"), j0 = index_of(problem.model, "tau_0");
    const bool tied = n_sets >= 2 && (problem.shared.count("tau_d") || problem.shared.count("tau_0"));
    for (std::size_t k = 0; k < n_sets; ++k) {
      if (free_mask[k][jd] && free_mask[k][j0] && !tied) {
        throw ConfigError(
            "fit: tau_d and tau_0 are both free Gaussian factors on dataset " + std::to_string(k) +
            "; fix one or share one across several datasets");
      }
    }
  }

  // Starting values: heuristics, overridden by global then per-dataset init.
  std::vector<std::map<std::string, double>> starts(n_sets);
  for (std::size_t k = 0; k < n_sets; ++k) {
    starts[k] = heuristic_init(problem.model, problem.datasets[k], free_mask[k], layout.base[k]);
    for (const auto& [name, value] : problem.init) starts[k][name] = value;
    if (!problem.init_per_dataset.empty()) {
      for (const auto& [name, value] : problem.init_per_dataset[k]) {
        index_of(problem.model, name);
        starts[k][name] = value;
      }
    }
  }

  std::vector<double> q_values;
  auto add_slot = [&](const std::string& name, std::optional<std::size_t> dataset, std::size_t j,
                      double start) {
    const Bounds b = bounds_for(name);
    const bool user_init = problem.init.count(name) ||
                           (dataset && !problem.init_per_dataset.empty() &&
                            problem.init_per_dataset[*dataset].count(name));
    if (!(start > b.lower && start < b.upper)) {
      if (user_init) throw ConfigError("fit: initial value for '" + name + "' lies outside its bounds");
      start = clamp_into(b, start);
    }
    layout.slots.push_back({name, dataset, j, Transform{b}});
    q_values.push_back(layout.slots.back().transform.to_internal(start));
    return static_cast<int>(layout.slots.size() - 1);
  };

  for (std::size_t j = 0; j < n_params; ++j) {
    const std::string& name = names[j];
    if (!problem.shared.count(name)) continue;
    // Geometric mean for positive quantities, arithmetic otherwise.
    double sum = 0.0, log_sum = 0.0;
    bool positive = true;
    for (std::size_t k = 0; k < n_sets; ++k) {
      const double v = starts[k].at(name);
      sum += v;
      positive = positive && v > 0.0;
      if (v > 0.0) log_sum += std::log(v);
    }
    double start = positive ? std::exp(log_sum / n_sets) : sum / n_sets;
    if (problem.init.count(name)) start = problem.init.at(name);
    const int slot = add_slot(name, std::nullopt, j, start);
    for (std::size_t k = 0; k < n_sets; ++k) layout.slot_of[k][j] = slot;
  }
  for (std::size_t k = 0; k < n_sets; ++k) {
    for (std::size_t j = 0; j < n_params; ++j) {
      if (!free_mask[k][j] || problem.shared.count(names[j])) continue;
      layout.slot_of[k][j] = add_slot(names[j], k, j, starts[k].at(names[j]));
    }
  }

  if (layout.n_points <= layout.slots.size()) {
    throw ConfigError("fit: " + std::to_string(layout.n_points) + " data points cannot determine " +
                      std::to_string(layout.slots.size()) + " free parameters");
  }
  q0 = Eigen::Map<Eigen::VectorXd>(q_values.data(), static_cast<Eigen::Index>(q_values.size()));
  return layout;
}

Eigen::VectorXd params_for(const Layout& layout, std::size_t k, const Eigen::VectorXd& q) {
  Eigen::VectorXd p = layout.base[k];
  for (std::size_t j = 0; j < layout.slot_of[k].size(); ++j) {
    const int slot = layout.slot_of[k][j];
    if (slot >= 0) p[static_cast<Eigen::Index>(j)] = layout.slots[slot].transform.to_external(q[slot]);
  }
  return p;
}

Eigen::VectorXd residuals(const Layout& layout, const std::vector<Dataset>& data, const Eigen::VectorXd& q) {
  Eigen::VectorXd r(static_cast<Eigen::Index>(layout.n_points));
  Eigen::Index offset = 0;
  for (std::size_t k = 0; k < data.size(); ++k) {
    const Eigen::Index n = data[k].values.size();
    const Eigen::VectorXd pred = predict(layout.model, params_for(layout, k, q), data[k].inputs);
    r.segment(offset, n) = layout.weights[k].cwiseProduct(pred - data[k].values);
    offset += n;
  }
  return r;
}

// Weighted Jacobian with respect to the free slots; `internal` selects the
// reparameterized coordinates (chain rule through the bound transforms).
Eigen::MatrixXd slot_jacobian(const Layout& layout, const std::vector<Dataset>& data, const Eigen::VectorXd& q,
                              bool internal) {
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(layout.n_points),
                                            static_cast<Eigen::Index>(layout.slots.size()));
  Eigen::Index offset = 0;
  for (std::size_t k = 0; k < data.size(); ++k) {
    const Eigen::Index n = data[k].values.size();
    const Eigen::MatrixXd full = jacobian(layout.model, params_for(layout, k, q), data[k].inputs);
    for (std::size_t j = 0; j < layout.slot_of[k].size(); ++j) {
      const int slot = layout.slot_of[k][j];
      if (slot < 0) continue;
      const double chain = internal ? layout.slots[slot].transform.derivative(q[slot]) : 1.0;
      J.block(offset, slot, n, 1) +=
          layout.weights[k].cwiseProduct(full.col(static_cast<Eigen::Index>(j))) * chain;
    }
    offset += n;
  }
  return J;
}

}  // namespace

ModelKind parse_model(std::string_view name) {
  if (name == "eq6-gaussian-tau0") return ModelKind::Eq6GaussianTau0;
  if (name == "eq6-exp-tau0") return ModelKind::Eq6ExpTau0;
  if (name == "single-gaussian") return ModelKind::SingleGaussian;
  if (name == "single-exponential") return ModelKind::SingleExponential;
  if (name == "eta-oam") return ModelKind::EtaOam;
  throw ConfigError("unknown model '" + std::string(name) + "'");
}

std::string_view to_string(ModelKind model) {
  switch (model) {
    case ModelKind::Eq6GaussianTau0: return "eq6-gaussian-tau0";
    case ModelKind::Eq6ExpTau0: return "eq6-exp-tau0";
    case ModelKind::SingleGaussian: return "single-gaussian";
    case ModelKind::SingleExponential: return "single-exponential";
    case ModelKind::EtaOam: return "eta-oam";
  }
  return "unknown";
}

const std::vector<std::string>& parameter_names(ModelKind model) {
  switch (model) {
    case ModelKind::Eq6GaussianTau0:
    case ModelKind::Eq6ExpTau0: return kTotalDecayNames;
    case ModelKind::SingleGaussian: return kSingleGaussianNames;
    case ModelKind::SingleExponential: return kSingleExponentialNames;
    case ModelKind::EtaOam: return kEtaOamNames;
  }
  return kTotalDecayNames;
}

bool is_lifetime(std::string_view parameter) {
  return parameter == "tau_d" || parameter == "tau_0" || parameter == "tau_1";
}

bool is_decay_model(ModelKind model) { return model != ModelKind::EtaOam; }

Bounds default_bounds(std::string_view parameter) {
  if (is_lifetime(parameter) || parameter == "c2" || parameter == "b") return {0.0, kInf};
  return {};
}

Eigen::VectorXd predict(ModelKind model, const Eigen::VectorXd& params, const Eigen::VectorXd& inputs) {
  if (params.size() != static_cast<Eigen::Index>(parameter_names(model).size())) {
    throw ContractError("predict: wrong parameter count for model");
  }
  Eigen::VectorXd out(inputs.size());
  const double c1 = params[0], c2 = params[1];
  for (Eigen::Index i = 0; i < inputs.size(); ++i) {
    const double x = inputs[i];
    switch (model) {
      case ModelKind::Eq6GaussianTau0:
      case ModelKind::Eq6ExpTau0:
        out[i] = c1 + c2 * eval_decay(x, params[2], params[3], params[4], model == ModelKind::Eq6GaussianTau0).envelope;
        break;
      case ModelKind::SingleGaussian: out[i] = c1 + c2 * eval_decay(x, params[2], kInf, kInf, true).envelope; break;
      case ModelKind::SingleExponential: out[i] = c1 + c2 * eval_decay(x, kInf, kInf, params[2], true).envelope; break;
      case ModelKind::EtaOam: {
        const double d = x - params[3];
        out[i] = c1 + c2 * std::exp(-params[2] * d * d);
        break;
      }
    }
  }
  return out;
}

Eigen::MatrixXd jacobian(ModelKind model, const Eigen::VectorXd& params, const Eigen::VectorXd& inputs) {
  const auto n_params = static_cast<Eigen::Index>(parameter_names(model).size());
  if (params.size() != n_params) throw ContractError("jacobian: wrong parameter count for model");
  Eigen::MatrixXd J(inputs.size(), n_params);
  const double c2 = params[1];
  for (Eigen::Index i = 0; i < inputs.size(); ++i) {
    const double x = inputs[i];
    J(i, 0) = 1.0;
    switch (model) {
      case ModelKind::Eq6GaussianTau0:
      case ModelKind::Eq6ExpTau0: {
        const auto e = eval_decay(x, params[2], params[3], params[4], model == ModelKind::Eq6GaussianTau0);
        J(i, 1) = e.envelope;
        J(i, 2) = c2 * e.d_tau_d;
        J(i, 3) = c2 * e.d_tau_0;
        J(i, 4) = c2 * e.d_tau_1;
        break;
      }
      case ModelKind::SingleGaussian: {
        const auto e = eval_decay(x, params[2], kInf, kInf, true);
        J(i, 1) = e.envelope;
        J(i, 2) = c2 * e.d_tau_d;
        break;
      }
      case ModelKind::SingleExponential: {
        const auto e = eval_decay(x, kInf, kInf, params[2], true);
        J(i, 1) = e.envelope;
        J(i, 2) = c2 * e.d_tau_1;
        break;
      }
      case ModelKind::EtaOam: {
        const double d = x - params[3];
        const double g = std::exp(-params[2] * d * d);
        J(i, 1) = g;
        J(i, 2) = -c2 * d * d * g;
        J(i, 3) = 2.0 * c2 * params[2] * d * g;
        break;
      }
    }
  }
  return J;
}

Dataset Dataset::from_curve(const DecayCurve& curve, std::string label) {
  curve.validate();
  return Dataset{curve.times, curve.efficiencies, curve.stderrs, std::move(label)};
}

std::map<std::string, double> FitResult::estimates(std::size_t k) const {
  std::map<std::string, double> out;
  for (const auto& p : parameters) {
    if (!p.dataset || *p.dataset == k) out[p.name] = p.value;
  }
  return out;
}

std::map<std::string, double> FitResult::standard_errors(std::size_t k) const {
  std::map<std::string, double> out;
  for (const auto& p : parameters) {
    if (!p.dataset || *p.dataset == k) out[p.name] = p.standard_error;
  }
  return out;
}

std::optional<double> FitResult::value(std::string_view name, std::size_t k) const {
  for (const auto& p : parameters) {
    if (p.name == name && (!p.dataset || *p.dataset == k)) return p.value;
  }
  if (k < fixed.size()) {
    if (auto it = fixed[k].find(std::string(name)); it != fixed[k].end()) return it->second;
  }
  return std::nullopt;
}

Eigen::VectorXd FitResult::full_parameters(std::size_t k) const {
  const auto& names = parameter_names(model);
  Eigen::VectorXd p(static_cast<Eigen::Index>(names.size()));
  for (std::size_t j = 0; j < names.size(); ++j) {
    const auto v = value(names[j], k);
    if (!v) throw ContractError("fit result has no value for '" + names[j] + "'");
    p[static_cast<Eigen::Index>(j)] = *v;
  }
  return p;
}

DecayModel FitResult::decay_model(std::size_t k) const {
  if (!is_decay_model(model)) throw ContractError("fit result is not a decay model");
  DecayModel out;
  out.c1 = value("c1", k).value();
  out.c2 = value("c2", k).value();
  out.gaussian_tau0 = model != ModelKind::Eq6ExpTau0;
  if (auto v = value("tau_d", k)) out.tau_d = Lifetime::from_double(*v);
  if (auto v = value("tau_0", k)) out.tau_0 = Lifetime::from_double(*v);
  if (auto v = value("tau_1", k)) out.tau_1 = Lifetime::from_double(*v);
  return out;
}

OamEfficiencyModel FitResult::oam_model(std::size_t k) const {
  if (model != ModelKind::EtaOam) throw ContractError("fit result is not an eta-oam model");
  return OamEfficiencyModel{value("c1", k).value(), value("c2", k).value(), value("b", k).value(),
                            static_cast<int>(std::lround(value("center", k).value()))};
}

FitResult fit(const FitProblem& problem) {
  Eigen::VectorXd q;
  const Layout layout = build_layout(problem, q);
  const auto& data = problem.datasets;
  const FitOptions& opt = problem.options;

  FitResult result;
  result.model = problem.model;
  result.fixed = layout.fixed;
  for (const auto& d : data) result.dataset_labels.push_back(d.label);

  Eigen::VectorXd r = residuals(layout, data, q);
  double cost = 0.5 * r.squaredNorm();
  result.cost_history.push_back(cost);
  std::ostringstream diag;

  const auto n_free = static_cast<Eigen::Index>(layout.slots.size());
  bool converged = n_free == 0;
  if (!std::isfinite(cost)) {
    diag << "non-finite cost at the starting point; ";
    converged = false;
  } else if (n_free > 0) {
    double damping = opt.initial_damping;
    for (int iter = 1; iter <= opt.max_iterations && !converged; ++iter) {
      result.n_iterations = iter;
      if (cost == 0.0) {
        converged = true;
        break;
      }
      const Eigen::MatrixXd J = slot_jacobian(layout, data, q, true);
      const Eigen::MatrixXd A = J.transpose() * J;
      const Eigen::VectorXd g = J.transpose() * r;
      Eigen::VectorXd scale = A.diagonal();
      const double scale_floor = std::max(scale.maxCoeff(), 1.0) * 1e-30;
      for (Eigen::Index j = 0; j < n_free; ++j) scale[j] = std::max(scale[j], scale_floor);

      // Gradient orthogonality test (scaled cosine between residual and columns).
      const double r_norm = std::sqrt(2.0 * cost);
      double cosine = 0.0;
      for (Eigen::Index j = 0; j < n_free; ++j) cosine = std::max(cosine, std::abs(g[j]) / (std::sqrt(scale[j]) * r_norm));
      if (cosine <= 1e-14) {
        converged = true;
        break;
      }

      bool accepted = false;
      while (damping <= 1e16) {
        Eigen::MatrixXd damped = A;
        damped.diagonal() += damping * scale;
        const Eigen::LDLT<Eigen::MatrixXd> ldlt(damped);
        Eigen::VectorXd step = ldlt.solve(-g);
        if (ldlt.info() != Eigen::Success || !step.allFinite()) {
          damping *= 10.0;
          continue;
        }
        const Eigen::VectorXd q_trial = q + step;
        const Eigen::VectorXd r_trial = residuals(layout, data, q_trial);
        const double cost_trial = 0.5 * r_trial.squaredNorm();
        const double step_norm = step.lpNorm<Eigen::Infinity>();
        if (std::isfinite(cost_trial) && cost_trial < cost) {
          const double relative_decrease = (cost - cost_trial) / cost;
          q = q_trial;
          r = r_trial;
          cost = cost_trial;
          result.cost_history.push_back(cost);
          damping = std::max(damping / 10.0, 1e-20);
          accepted = true;
          if (relative_decrease < opt.cost_tolerance || step_norm < opt.step_tolerance) converged = true;
          break;
        }
        if (step_norm < opt.step_tolerance) {
          converged = true;  // no representable improvement left
          break;
        }
        damping *= 10.0;
      }
      if (!accepted && !converged) {
        diag << "damping exceeded 1e16 without a decreasing step; ";
        break;
      }
    }
    if (!converged && result.n_iterations >= opt.max_iterations) {
      diag << "iteration cap of " << opt.max_iterations << " reached; ";
    }
  }

  result.residual_norm = 2.0 * cost;

  // Covariance from the physical-coordinate Gauss-Newton matrix.
  Eigen::VectorXd se = Eigen::VectorXd::Zero(n_free);
  if (n_free > 0) {
    const Eigen::MatrixXd Jp = slot_jacobian(layout, data, q, false);
    const Eigen::MatrixXd N = Jp.transpose() * Jp;
    // Lifetimes in seconds and amplitudes of order one differ by ~1e12 in the
    // normal matrix, so the rank test runs on the equilibrated D N D.
    const Eigen::VectorXd d = N.diagonal().cwiseSqrt().cwiseInverse();
    const bool finite = N.allFinite() && d.allFinite();
    const Eigen::MatrixXd Ns = finite ? Eigen::MatrixXd(d.asDiagonal() * N * d.asDiagonal()) : N;
    const Eigen::FullPivLU<Eigen::MatrixXd> lu(Ns);
    const double dof = static_cast<double>(layout.n_points) - static_cast<double>(n_free);
    const double variance = 2.0 * cost / dof;
    if (!finite || lu.rank() < n_free) {
      diag << "singular normal matrix (rank " << (finite ? lu.rank() : 0) << " of " << n_free << "); ";
      converged = false;
      se.setConstant(kInf);
    } else {
      const Eigen::MatrixXd cov = d.asDiagonal() * lu.inverse() * d.asDiagonal() * variance;
      for (Eigen::Index j = 0; j < n_free; ++j) se[j] = std::sqrt(std::max(cov(j, j), 0.0));
    }
  }

  for (std::size_t s = 0; s < layout.slots.size(); ++s) {
    const auto& slot = layout.slots[s];
    const auto idx = static_cast<Eigen::Index>(s);
    result.parameters.push_back({slot.name, slot.dataset, slot.transform.to_external(q[idx]), se[idx]});
  }
  result.converged = converged;
  result.diagnostics = diag.str();
  return result;
}

FitResult joint_fit_fig2(std::span<const DecayCurve> curves, std::span<const int> charges, FitOptions options) {
  if (curves.size() != charges.size()) throw ConfigError("joint_fit_fig2: one charge per curve required");
  if (curves.size() < 2) throw ConfigError("joint_fit_fig2: at least two curves are required");
  FitProblem problem;
  problem.model = ModelKind::Eq6GaussianTau0;
  problem.shared = {"tau_0", "tau_1"};
  problem.options = options;
  for (std::size_t k = 0; k < curves.size(); ++k) {
    problem.datasets.push_back(Dataset::from_curve(curves[k], "l=" + std::to_string(charges[k])));
    std::map<std::string, double> fixed;
    if (charges[k] == 0) fixed["tau_d"] = kInf;
    problem.fixed_per_dataset.push_back(std::move(fixed));
  }
  return fit(problem);
}

}  // namespace oamd::fit
