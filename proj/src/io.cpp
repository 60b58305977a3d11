#include "oamdephase/io.hpp"

#include <charconv>
#include <fstream>
#include <json.hpp>
#include <sstream>
#include <vector>

namespace oamd::io {

namespace {

std::vector<std::string_view> split(std::string_view text, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = text.find(sep, start);
    out.push_back(text.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

struct Table {
  std::vector<std::string_view> header;
  std::vector<std::vector<double>> rows;
  std::vector<std::size_t> line_numbers;
};

Table parse_table(std::string_view text) {
  Table table;
  auto lines = split(text, '\n');
  if (!lines.empty() && lines.back().empty()) lines.pop_back();
  if (lines.empty()) throw ParseError("empty file", 1);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    std::string_view line = lines[i];
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    const auto fields = split(line, ',');
    if (i == 0) {
      table.header = fields;
      continue;
    }
    if (line.empty()) throw ParseError("blank line", i + 1);
    if (fields.size() != table.header.size()) {
      throw ParseError("expected " + std::to_string(table.header.size()) + " fields, found " +
                           std::to_string(fields.size()),
                       i + 1);
    }
    std::vector<double> row;
    for (const auto field : fields) {
      const auto value = parse_double(field);
      if (!value || !std::isfinite(*value)) {
        throw ParseError("invalid number '" + std::string(field) + "'", i + 1);
      }
      row.push_back(*value);
    }
    table.rows.push_back(std::move(row));
    table.line_numbers.push_back(i + 1);
  }
  if (table.rows.empty()) throw ParseError("no data rows", lines.size() + 1);
  return table;
}

void expect_header(const Table& table, std::string_view first) {
  const auto& h = table.header;
  const bool ok = (h.size() == 2 || h.size() == 3) && h[0] == first && h[1] == "efficiency" &&
                  (h.size() == 2 || h[2] == "stderr");
  if (!ok) {
    throw ParseError("header must be '" + std::string(first) + ",efficiency' or '" + std::string(first) +
                         ",efficiency,stderr'",
                     1);
  }
}

}  // namespace

std::string format_double(double value) {
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  if (std::isnan(value)) return "nan";
  char buffer[64];
  const auto [ptr, ec] = std::to_chars(buffer, buffer + sizeof(buffer), value);
  return std::string(buffer, ptr);
}

std::optional<double> parse_double(std::string_view text) {
  if (text == "inf" || text == "infinity" || text == "+inf") return std::numeric_limits<double>::infinity();
  if (text.empty()) return std::nullopt;
  if (text.front() == '+') text.remove_prefix(1);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size()) return std::nullopt;
  return value;
}

std::string write_curve_csv(const DecayCurve& curve) {
  curve.validate();
  std::string out = curve.stderrs ? "t_us,efficiency,stderr\n" : "t_us,efficiency\n";
  for (Eigen::Index i = 0; i < curve.size(); ++i) {
    out += format_double(units::to_us(curve.times[i]));
    out += ',';
    out += format_double(curve.efficiencies[i]);
    if (curve.stderrs) {
      out += ',';
      out += format_double((*curve.stderrs)[i]);
    }
    out += '\n';
  }
  return out;
}

DecayCurve read_curve_csv(std::string_view text) {
  const Table table = parse_table(text);
  expect_header(table, "t_us");
  const auto n = static_cast<Eigen::Index>(table.rows.size());
  DecayCurve curve;
  curve.times.resize(n);
  curve.efficiencies.resize(n);
  if (table.header.size() == 3) curve.stderrs = Eigen::VectorXd(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& row = table.rows[static_cast<std::size_t>(i)];
    curve.times[i] = units::seconds_from_us(row[0]);
    curve.efficiencies[i] = row[1];
    if (curve.stderrs) {
      if (row[2] < 0.0) throw ParseError("negative stderr", table.line_numbers[static_cast<std::size_t>(i)]);
      (*curve.stderrs)[i] = row[2];
    }
    const std::size_t line = table.line_numbers[static_cast<std::size_t>(i)];
    if (row[0] < 0.0) throw ParseError("negative time", line);
    if (i > 0 && !(curve.times[i] > curve.times[i - 1])) throw ParseError("times must be strictly increasing", line);
  }
  return curve;
}

std::string write_scan_csv(const OamScan& scan) {
  std::string out = scan.stderrs ? "m,efficiency,stderr\n" : "m,efficiency\n";
  for (Eigen::Index i = 0; i < scan.controls.size(); ++i) {
    out += format_double(scan.controls[i]);
    out += ',';
    out += format_double(scan.efficiencies[i]);
    if (scan.stderrs) {
      out += ',';
      out += format_double((*scan.stderrs)[i]);
    }
    out += '\n';
  }
  return out;
}

OamScan read_scan_csv(std::string_view text) {
  const Table table = parse_table(text);
  expect_header(table, "m");
  const auto n = static_cast<Eigen::Index>(table.rows.size());
  OamScan scan;
  scan.controls.resize(n);
  scan.efficiencies.resize(n);
  if (table.header.size() == 3) scan.stderrs = Eigen::VectorXd(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& row = table.rows[static_cast<std::size_t>(i)];
    const std::size_t line = table.line_numbers[static_cast<std::size_t>(i)];
    if (row[0] != std::round(row[0])) throw ParseError("control charge must be an integer", line);
    if (scan.stderrs && row[2] < 0.0) throw ParseError("negative stderr", line);
    scan.controls[i] = row[0];
    scan.efficiencies[i] = row[1];
    if (scan.stderrs) (*scan.stderrs)[i] = row[2];
  }
  return scan;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_file(const std::filesystem::path& path, std::string_view contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

std::string external_parameter_name(std::string_view canonical) {
  if (canonical == "tau_d") return "tau_d_us";
  if (canonical == "tau_0") return "tau0_us";
  if (canonical == "tau_1") return "tau1_us";
  return std::string(canonical);
}

std::pair<std::string, double> canonical_parameter_name(std::string_view external) {
  if (external == "tau_d_us" || external == "taud_us") return {"tau_d", units::kMicrosecond};
  if (external == "tau0_us" || external == "tau_0_us") return {"tau_0", units::kMicrosecond};
  if (external == "tau1_us" || external == "tau_1_us") return {"tau_1", units::kMicrosecond};
  if (external == "c1" || external == "c2" || external == "b" || external == "center") {
    return {std::string(external), 1.0};
  }
  throw ConfigError("unknown parameter '" + std::string(external) + "'");
}

namespace {

nlohmann::ordered_json number_or_label(double value) {
  if (std::isinf(value)) return value > 0 ? "infinite" : "-infinite";
  if (std::isnan(value)) return nullptr;
  return value;
}

double to_external_units(const std::string& canonical, double value) {
  return fit::is_lifetime(canonical) ? units::to_us(value) : value;
}

}  // namespace

std::string fit_result_json(const fit::FitResult& result) {
  nlohmann::ordered_json doc;
  doc["model"] = std::string(fit::to_string(result.model));
  doc["converged"] = result.converged;
  doc["n_iterations"] = result.n_iterations;
  doc["residual_norm"] = number_or_label(result.residual_norm);
  doc["diagnostics"] = result.diagnostics;
  auto shared = nlohmann::ordered_json::object();
  for (const auto& p : result.parameters) {
    if (p.dataset) continue;
    const std::string name = external_parameter_name(p.name);
    shared[name] = {{"value", number_or_label(to_external_units(p.name, p.value))},
                    {"stderr", number_or_label(to_external_units(p.name, p.standard_error))}};
  }
  doc["shared"] = shared;
  auto datasets = nlohmann::ordered_json::array();
  for (std::size_t k = 0; k < result.fixed.size(); ++k) {
    nlohmann::ordered_json entry;
    entry["label"] = k < result.dataset_labels.size() ? result.dataset_labels[k] : "";
    auto estimates = nlohmann::ordered_json::object();
    for (const auto& p : result.parameters) {
      if (!p.dataset || *p.dataset != k) continue;
      estimates[external_parameter_name(p.name)] = {
          {"value", number_or_label(to_external_units(p.name, p.value))},
          {"stderr", number_or_label(to_external_units(p.name, p.standard_error))}};
    }
    entry["estimates"] = estimates;
    auto fixed = nlohmann::ordered_json::object();
    for (const auto& name : fit::parameter_names(result.model)) {
      if (auto it = result.fixed[k].find(name); it != result.fixed[k].end()) {
        fixed[external_parameter_name(name)] = number_or_label(to_external_units(name, it->second));
      }
    }
    entry["fixed"] = fixed;
    datasets.push_back(entry);
  }
  doc["datasets"] = datasets;
  return doc.dump(2) + "\n";
}

}  // namespace oamd::io
