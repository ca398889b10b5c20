#include <sqft/cli/output.hpp>

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

using namespace sqft;
using namespace sqft::cli;

namespace {

RunConfig config_with(std::initializer_list<std::string> sets) {
  json tree = default_config();
  for (const auto& s : sets)
    apply_override(tree, s);
  return parse_config(tree);
}

std::string config_error_path(std::initializer_list<std::string> sets) {
  try {
    config_with(sets);
  } catch (const ConfigError& e) {
    return e.path();
  }
  return "";
}

std::filesystem::path fresh_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("sqft_cli_test_" + name);
  std::filesystem::remove_all(dir);
  return dir;
}

int run_cli(const std::string& args, const std::string& env = "") {
  const std::string cmd = env + (env.empty() ? "" : " ") + SQFT_CLI_PATH + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

} // namespace

TEST(CliConfig, DefaultsParse) {
  const auto rc = parse_config(default_config());
  EXPECT_EQ(rc.params.M, 1.0);
  EXPECT_TRUE(rc.state.is_ground());
  EXPECT_EQ(rc.tau, cplx(0.0, -0.3));
  EXPECT_EQ(rc.kms.cases.size(), 2u);
  EXPECT_EQ(rc.workers, 1);
}

TEST(CliConfig, OverridesAndRanges) {
  const auto rc = config_with({"params.M=0.5", "state.kind=thermal", "state.beta=3",
                               "modes.omega={\"start\":0.5,\"stop\":1.5,\"count\":3}", "modes.l={\"l_max\":2}"});
  EXPECT_EQ(rc.params.M, 0.5);
  EXPECT_FALSE(rc.state.is_ground());
  EXPECT_EQ(rc.state.beta, 3.0);
  EXPECT_EQ(rc.modes.omega, (std::vector<double>{0.5, 1.0, 1.5}));
  EXPECT_EQ(rc.modes.l, (std::vector<int>{0, 1, 2}));
}

TEST(CliConfig, DiagnosticsCarryTheFieldPath) {
  EXPECT_EQ(config_error_path({"params.m=-1"}), "params.m");
  EXPECT_EQ(config_error_path({"modes.nope=1"}), "modes.nope");
  EXPECT_EQ(config_error_path({"modes.l=[0,-1]"}), "modes.l[1]");
  EXPECT_EQ(config_error_path({"twopoint.probes=[{\"r\":1.0,\"r_prime\":5.0}]"}), "twopoint.probes[0].r");
  EXPECT_EQ(config_error_path({"kms.cases=[[1.0,2.0,0.0]]"}), "kms.cases[0]");
  EXPECT_EQ(config_error_path({"state.kind=warm"}), "state.kind");
  EXPECT_EQ(config_error_path({"state.kind=thermal", "state.beta=0.5", "tau.epsilon=0.3"}), "tau.epsilon");
  EXPECT_EQ(config_error_path({"output.format=xml"}), "output.format");
  EXPECT_EQ(config_error_path({"flat_compare.channels=[{\"omega\":1.2,\"l\":0,\"r\":10.0,\"r_prime\":70.0}]"}),
            "flat_compare.channels[0].r");
  json tree = default_config();
  EXPECT_THROW(apply_override(tree, "noequals"), ConfigError);
}

TEST(CliConfig, EchoRoundTrips) {
  const auto rc = config_with({"params.M=0", "green.omega=[0.7]", "green.l=[1]"});
  const auto first = cmd_green(rc);
  const auto second = cmd_green(parse_config(merge_config(first.report["config"])));
  EXPECT_EQ(report_text(first.report), report_text(second.report));
}

TEST(CliModes, MinimalConfigWritesOneCsv) {
  auto rc = config_with({"output.format=csv"});
  rc.out_dir = fresh_dir("modes_min").string();
  const auto res = cmd_modes(rc);
  const auto files = write_outputs("modes", res, rc, 0.0);
  ASSERT_EQ(files.size(), 1u);
  std::ifstream in(files.front());
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, "omega,l,solution,r,rstar,re_u,im_u,re_du,im_du");
  EXPECT_TRUE(res.pass.value());
}

TEST(CliModes, SweepSummaryAndSpread) {
  const auto rc = config_with({"modes.omega={\"start\":0.3,\"stop\":2.5,\"count\":20}", "modes.l={\"l_max\":4}",
                               "modes.write_samples=false"});
  const auto res = cmd_modes(rc);
  const auto& summary = res.report["results"]["summary"];
  ASSERT_EQ(summary.size(), 100u);
  for (const auto& row : summary) {
    ASSERT_EQ(row["status"], "ok");
    EXPECT_LE(row["wronskian"]["relative_spread"].get<double>(), 1e-6) << row["omega"] << " " << row["l"];
  }
  EXPECT_TRUE(res.pass.value());
}

TEST(CliModes, ThresholdRowIsFlaggedAndSkipped) {
  const auto rc = config_with({"modes.omega=[1.0, 1.2]", "modes.write_samples=false"});
  const auto res = cmd_modes(rc);
  EXPECT_EQ(res.report["results"]["summary"][0]["status"], "skipped-threshold");
  EXPECT_EQ(res.report["results"]["summary"][1]["status"], "ok");
  EXPECT_EQ(res.report["results"]["skipped_threshold"], 1);
  EXPECT_TRUE(res.pass.value());
}

TEST(CliCommands, KmsCheckOnFlatDefaults) {
  const auto res = cmd_kms_check(config_with({"params.M=0"}));
  EXPECT_TRUE(res.pass.value());
  EXPECT_EQ(res.report["results"]["rows"].size(), 2u);
}

TEST(CliCommands, FlatCompareDefaults) {
  const auto res = cmd_flat_compare(config_with({}));
  EXPECT_LE(res.report["results"]["max_deviation"].get<double>(), 0.01);
  for (const auto& row : res.report["results"]["rows"])
    EXPECT_TRUE(row["grows_with_mass"].get<bool>());
}

TEST(CliCommands, IntegrabilityGroundDefaults) {
  const auto res = cmd_integrability(config_with({}));
  EXPECT_TRUE(res.report["results"]["converged"].get<bool>());
  EXPECT_LT(res.report["results"]["ratio"].get<double>(), 1.0);
  EXPECT_TRUE(res.pass.value());
}

TEST(CliCommands, DecayFlatEqualTime) {
  const auto res = cmd_decay(config_with({"params.M=0"}));
  EXPECT_TRUE(res.pass.value());
  EXPECT_NEAR(res.report["results"]["kappa"].get<double>(), 1.0, 0.05);
}

TEST(CliCommands, ReportsAreWorkerIndependent) {
  for (const std::string cmd : {"modes", "green", "twopoint"}) {
    auto rc = config_with({"modes.omega=[0.5, 1.3, 2.0]", "modes.l=[0, 3]"});
    const auto one = report_text(run_command(cmd, rc).report);
    rc.workers = 4;
    EXPECT_EQ(one, report_text(run_command(cmd, rc).report)) << cmd;
  }
}

TEST(CliBinary, ExitCodesAndOutputDirectory) {
  const auto dir = fresh_dir("bin");
  const std::string out = " --out-dir " + dir.string();
  EXPECT_EQ(run_cli("green --set params.M=0" + out), 0);
  EXPECT_TRUE(std::filesystem::exists(dir / "green.json"));
  EXPECT_TRUE(std::filesystem::exists(dir / "green.csv"));
  EXPECT_TRUE(std::filesystem::exists(dir / "green.meta.json"));
  EXPECT_EQ(run_cli("green --set params.M=oops" + out), 2);
  EXPECT_EQ(run_cli("green --format xml" + out), 2);
  EXPECT_EQ(run_cli("nosuchcommand"), 2);
  EXPECT_EQ(run_cli("decay --set decay.omega=1.0" + out), 3);
  EXPECT_EQ(run_cli("decay --set params.M=0 --set decay.tolerance=1e-9" + out), 4);

  const auto env_dir = fresh_dir("env");
  EXPECT_EQ(run_cli("green --set params.M=0 --format json", "SQFT_OUT_DIR=" + env_dir.string()), 0);
  EXPECT_TRUE(std::filesystem::exists(env_dir / "green.json"));
  EXPECT_FALSE(std::filesystem::exists(env_dir / "green.csv"));
}

TEST(CliBinary, ConfigFileAndByteIdenticalReports) {
  const auto dir = fresh_dir("cfg");
  std::filesystem::create_directories(dir);
  const auto cfg = dir / "run.json";
  std::ofstream(cfg) << R"({"params": {"M": 0}, "green": {"omega": [0.5, 2.0], "l": [0, 1]}})";
  EXPECT_EQ(run_cli("green --config " + cfg.string() + " --workers 1 --out-dir " + (dir / "a").string()), 0);
  EXPECT_EQ(run_cli("green --config " + cfg.string() + " --workers 8 --out-dir " + (dir / "b").string()), 0);
  const auto a = slurp(dir / "a" / "green.json");
  EXPECT_FALSE(a.empty());
  EXPECT_EQ(a, slurp(dir / "b" / "green.json"));
  EXPECT_EQ(slurp(dir / "a" / "green.csv"), slurp(dir / "b" / "green.csv"));
}
