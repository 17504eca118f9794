#include "simplex_stdp/errors.hpp"

namespace simplex_stdp {

namespace {

std::string join(const std::vector<std::string>& items) {
  std::string out = "invalid configuration";
  for (const auto& s : items) out += "\n  - " + s;
  return out;
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> violations)
    : std::invalid_argument(join(violations)), violations_(std::move(violations)) {}

}  // namespace simplex_stdp
