#include <doctest.h>

#include <filesystem>
#include <json.hpp>
#include <sstream>

#include "oamdephase/cli.hpp"
#include "oamdephase/io.hpp"

using namespace oamd;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "oamdephase");
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::filesystem::path scratch(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("oamdephase_cli_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("analytic subcommand") {
  const Run r = invoke({"analytic", "--waist-mm", "2", "--l", "2", "--temperature-c", "55", "--t-us", "2"});
  CHECK(r.code == cli::kSuccess);
  CHECK(r.out.find("tau_d_us") != std::string::npos);
  CHECK(r.out.find("t_us,gamma_gaussian,gamma_radial,eta_total") != std::string::npos);
  CHECK(r.out.find("0.59602450748075") != std::string::npos);

  const Run zero = invoke({"analytic", "--waist-mm", "2", "--l", "0", "--temperature-c", "55"});
  CHECK(zero.code == cli::kSuccess);
  CHECK(zero.out.find("infinite") != std::string::npos);
}

TEST_CASE("usage errors") {
  CHECK(invoke({}).code == cli::kUsageError);
  CHECK(invoke({"analytic", "--l", "2"}).code == cli::kUsageError);
  CHECK(invoke({"frobnicate"}).code == cli::kUsageError);
  CHECK(invoke({"scenario"}).code == cli::kUsageError);
  CHECK(invoke({"--help"}).code == cli::kSuccess);
  const Run bad = invoke({"analytic", "--waist-mm", "-1", "--l", "2", "--temperature-c", "55"});
  CHECK(bad.code == cli::kRuntimeError);
  CHECK_FALSE(bad.err.empty());
}

TEST_CASE("simulate then fit") {
  const auto dir = scratch("simfit");
  io::write_file(dir / "config.json", R"({"scenario": "custom-sweep", "seed": 7, "n_atoms": 20000,
                                           "estimator": "conditional-incoherent"})");
  const Run sim = invoke({"simulate", (dir / "config.json").string(), "--out", (dir / "curve.csv").string()});
  REQUIRE(sim.code == cli::kSuccess);
  const DecayCurve curve = io::read_curve_csv(io::read_file(dir / "curve.csv"));
  CHECK(curve.size() == 40);
  CHECK(curve.stderrs.has_value());

  const Run fit = invoke({"fit", "--data", (dir / "curve.csv").string(), "--model", "single-gaussian", "--fix",
                          "c1=0", "--out", (dir / "fit.json").string()});
  CHECK(fit.code == cli::kSuccess);
  const auto doc = nlohmann::json::parse(io::read_file(dir / "fit.json"));
  CHECK(doc["converged"] == true);
  const double tau = doc["datasets"][0]["estimates"]["tau_d_us"]["value"].get<double>();
  CHECK(tau > 2.0);
  CHECK(tau < 5.0);

  // Same seed, same bytes; a different seed changes the file.
  const Run again = invoke({"simulate", (dir / "config.json").string(), "--out", (dir / "again.csv").string(),
                            "--workers", "3"});
  CHECK(io::read_file(dir / "again.csv") == io::read_file(dir / "curve.csv"));
  invoke({"simulate", (dir / "config.json").string(), "--out", (dir / "other.csv").string(), "--seed", "8"});
  CHECK(io::read_file(dir / "other.csv") != io::read_file(dir / "curve.csv"));
  std::filesystem::remove_all(dir);
}

TEST_CASE("fit input errors") {
  const auto dir = scratch("fiterr");
  io::write_file(dir / "bad.csv", "t_us,efficiency\n0,1\nx,2\n");
  const Run r = invoke({"fit", "--data", (dir / "bad.csv").string(), "--model", "single-gaussian"});
  CHECK(r.code == cli::kRuntimeError);
  CHECK(r.err.find("line 3") != std::string::npos);

  io::write_file(dir / "ok.csv", "t_us,efficiency\n0,1\n1,0.8\n2,0.4\n3,0.1\n");
  CHECK(invoke({"fit", "--data", (dir / "ok.csv").string(), "--model", "no-such"}).code != cli::kSuccess);
  CHECK(invoke({"fit", "--data", (dir / "ok.csv").string(), "--fix", "tau_d_us"}).code == cli::kUsageError);
  CHECK(invoke({"fit", "--data", (dir / "ok.csv").string(), "--model", "single-gaussian", "--fix", "c1@4=0"})
            .code == cli::kRuntimeError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("scenario subcommand") {
  const auto dir = scratch("scenario");
  const Run r = invoke({"scenario", "fig3", "--n-atoms", "2000", "--out", (dir / "out").string()});
  CHECK(r.code == cli::kSuccess);
  CHECK(std::filesystem::exists(dir / "out" / "report.json"));
  CHECK(std::filesystem::exists(dir / "out" / "scan_n20.csv"));
  std::filesystem::remove_all(dir);
}
