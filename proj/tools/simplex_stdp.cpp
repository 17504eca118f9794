#include <cstdint>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "simplex_stdp/scenarios.hpp"
#include "simplex_stdp/version.hpp"

int main(int argc, char** argv) {
  using namespace simplex_stdp;

  CLI::App app{"Hebbian STDP as noisy gradient descent on the probability simplex"};
  app.set_version_flag("--version", std::string(kVersion));

  std::string scenario;
  std::string config_file;
  std::uint64_t seed = 0;
  std::string out_dir;
  std::size_t threads = 0;
  std::vector<std::string> sets;
  bool assert_mode = false;
  bool list = false;
  bool show_defaults = false;

  app.add_option("scenario", scenario, "Scenario name");
  app.add_option("--config", config_file, "JSON configuration file")->check(CLI::ExistingFile);
  auto* seed_opt = app.add_option("--seed", seed, "Master seed");
  auto* out_opt = app.add_option("--out", out_dir, "Output directory (default: $SIMPLEX_STDP_OUT/<scenario>)");
  auto* threads_opt = app.add_option("--threads", threads, "Worker threads (default: logical cores)");
  app.add_option("--set", sets, "Parameter override key=value (value parsed as JSON when possible)");
  app.add_flag("--assert", assert_mode, "Exit with status 4 when a verification check fails");
  app.add_flag("--list", list, "List scenarios");
  app.add_flag("--defaults", show_defaults, "Print the scenario's default parameters");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : exit_config_error;
  }

  if (list) {
    for (const auto& n : scenario_names()) std::cout << n << '\n';
    return exit_ok;
  }
  if (scenario.empty()) {
    std::cerr << "missing scenario name (see --list)\n";
    return exit_config_error;
  }
  if (show_defaults) {
    try {
      std::cout << scenario_defaults(scenario) << '\n';
      return exit_ok;
    } catch (const std::exception&) {
      std::cerr << "unknown scenario '" << scenario << "'\n";
      return exit_unknown_scenario;
    }
  }

  ScenarioConfig config;
  config.scenario = scenario;
  config.assert_mode = assert_mode;
  if (!config_file.empty()) {
    std::ifstream in(config_file);
    std::ostringstream ss;
    ss << in.rdbuf();
    config.config_json = ss.str();
  }
  for (const auto& s : sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0) {
      std::cerr << "--set expects key=value, got '" << s << "'\n";
      return exit_config_error;
    }
    config.overrides.emplace_back(s.substr(0, eq), s.substr(eq + 1));
  }
  if (*seed_opt) config.seed = seed;
  if (*threads_opt) config.threads = threads;
  if (*out_opt) config.output_dir = out_dir;
  return run_scenario(config, std::cout, std::cerr);
}
