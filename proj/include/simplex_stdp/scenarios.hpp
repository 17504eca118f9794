#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "simplex_stdp/dynamics.hpp"
#include "simplex_stdp/simplex.hpp"

namespace simplex_stdp {

struct BarycentricPoint {
  double x = 0.0;
  double y = 0.0;
};

// (p_2 + p_3/2, (sqrt(3)/2) p_3); vertices go to (0,0), (1,0), (1/2, sqrt(3)/2).
BarycentricPoint barycentric(std::span<const double> p);

enum class LandscapeKind { cubic_quartic, shahshahani };

struct LandscapeSample {
  Vector p;
  BarycentricPoint xy;
  double value = 0.0;
};

// Points (n-i-j, i, j)/n with n = round(1/grid_step). Shahshahani values are
// -p^T Gamma p / 2 and need gamma.
std::vector<LandscapeSample> landscape_grid(std::size_t d, double grid_step, LandscapeKind kind,
                                            const std::optional<CorrelationMatrix>& gamma = std::nullopt);
void emit_landscape(const std::filesystem::path& path, std::size_t d, double grid_step, LandscapeKind kind,
                    const std::optional<CorrelationMatrix>& gamma = std::nullopt);

enum ExitCode : int {
  exit_ok = 0,
  exit_runtime_error = 1,
  exit_config_error = 2,
  exit_precondition = 3,
  exit_acceptance_failure = 4,
  exit_unknown_scenario = 5,
  exit_output_error = 6,
};

const std::vector<std::string>& scenario_names();
// Default parameters of a scenario as a JSON object; throws InvalidInput for unknown names.
std::string scenario_defaults(const std::string& scenario);

struct ScenarioConfig {
  std::string scenario;
  std::string config_json;  // contents of --config; may also carry seed, threads and out
  std::vector<std::pair<std::string, std::string>> overrides;  // --set key=value, value parsed as JSON if possible
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> threads;
  std::optional<std::filesystem::path> output_dir;
  bool assert_mode = false;
};

// Writes manifest.json, the scenario outputs and summary.txt into the output
// directory. Returns one of the ExitCode values; diagnostics go to err.
int run_scenario(const ScenarioConfig& config, std::ostream& out, std::ostream& err);

}  // namespace simplex_stdp
