#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include "oamdephase/analytic.hpp"
#include "oamdephase/fitting.hpp"

namespace oamd::io {

/// Malformed input text; `line` is 1-based (0 when not line specific).
struct ParseError : std::runtime_error {
  ParseError(const std::string& what, std::size_t line_number)
      : std::runtime_error(line_number > 0 ? "line " + std::to_string(line_number) + ": " + what : what),
        line(line_number) {}
  std::size_t line;
};

/// Shortest decimal text that parses back to exactly `value`.
std::string format_double(double value);
/// Strict decimal parse of the whole string; accepts "inf"/"infinity".
std::optional<double> parse_double(std::string_view text);

/// Curve file: header `t_us,efficiency[,stderr]`, LF line endings, times in us.
std::string write_curve_csv(const DecayCurve& curve);
DecayCurve read_curve_csv(std::string_view text);

/// Efficiency-versus-control-charge scan: header `m,efficiency[,stderr]`.
struct OamScan {
  Eigen::VectorXd controls;
  Eigen::VectorXd efficiencies;
  std::optional<Eigen::VectorXd> stderrs;
};
std::string write_scan_csv(const OamScan& scan);
OamScan read_scan_csv(std::string_view text);

std::string read_file(const std::filesystem::path& path);
/// Throws std::runtime_error when the file cannot be written.
void write_file(const std::filesystem::path& path, std::string_view contents);

/// External (file/CLI) parameter name: lifetimes carry a `_us` suffix.
std::string external_parameter_name(std::string_view canonical);
/// Inverse of external_parameter_name; also returns the factor to SI.
std::pair<std::string, double> canonical_parameter_name(std::string_view external);

/// Structured fit result document (JSON), lifetimes in microseconds.
std::string fit_result_json(const fit::FitResult& result);

}  // namespace oamd::io
