#include <sqft/cli/output.hpp>

#include <CLI11.hpp>

#include <chrono>
#include <iostream>
#include <string>
#include <vector>

namespace {

enum Exit { kOk = 0, kConfig = 2, kCompute = 3, kVerification = 4 };

int report_error(bool as_json, const std::string& kind, const std::string& message, int code,
                 const std::string& path = "") {
  if (as_json) {
    sqft::cli::json err{{"schema_version", sqft::cli::kSchemaVersion},
                        {"error", {{"kind", kind}, {"message", message}, {"exit_code", code}}}};
    if (!path.empty())
      err["error"]["path"] = path;
    std::cerr << err.dump() << "\n";
  } else {
    std::cerr << "sqft: " << kind << " error: " << message << "\n";
  }
  return code;
}

} // namespace

int main(int argc, char** argv) {
  using namespace sqft::cli;
  CLI::App app{"Scalar field modes, Green's functions and two-point functions on Schwarzschild"};
  app.require_subcommand(1, 1);

  std::string config_path, out_dir, format;
  std::vector<std::string> sets;
  int workers = 0;
  bool error_json = false;
  for (const auto& name : command_names()) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--config", config_path, "JSON config file")->check(CLI::ExistingFile);
    sub->add_option("--set", sets, "override one key, e.g. --set params.M=0.5 (repeatable)");
    sub->add_option("--workers", workers, "worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--out-dir", out_dir, "output directory (default $SQFT_OUT_DIR or sqft-out)");
    sub->add_option("--format", format, "csv, json or both")->check(CLI::IsMember({"csv", "json", "both"}));
    sub->add_flag("--error-json", error_json, "print errors as JSON on stderr");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfig;
  }
  const std::string command = app.get_subcommands().front()->get_name();

  RunConfig rc;
  try {
    json base = default_config();
    base["output"]["dir"] = default_out_dir();
    json tree = merge_config(config_path.empty() ? json::object() : load_config_file(config_path), base);
    for (const auto& s : sets)
      apply_override(tree, s);
    if (workers > 0)
      tree["workers"] = workers;
    if (!out_dir.empty())
      tree["output"]["dir"] = out_dir;
    if (!format.empty())
      tree["output"]["format"] = format;
    rc = parse_config(tree);
  } catch (const sqft::ConfigError& e) {
    return report_error(error_json, "config", e.what(), kConfig, e.path());
  }

  CommandResult res;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    res = run_command(command, rc);
  } catch (const sqft::ConfigError& e) {
    return report_error(error_json, "config", e.what(), kConfig, e.path());
  } catch (const std::exception& e) {
    return report_error(error_json, "computation", e.what(), kCompute);
  }
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  try {
    for (const auto& f : write_outputs(command, res, rc, wall))
      std::cout << f << "\n";
  } catch (const std::exception& e) {
    return report_error(error_json, "output", e.what(), kCompute);
  }
  if (res.pass && !*res.pass) {
    std::cerr << "sqft: " << command << ": verification failed\n";
    return kVerification;
  }
  return kOk;
}
