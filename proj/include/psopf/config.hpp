#pragma once

// Run configuration read from a key = value text file, then overridden by
// PSOPF_<KEY> environment variables (key upper-cased).
//
//   # swarm
//   n_particles = 10
//   c1 = 2.0
//   lambda = 1e6
//
// Recognised keys: n_particles c1 c2 w_max w_min iter_max v_max_fraction
// stagnation_window stagnation_digits seed threads lambda lambda_p lambda_v
// lambda_q lambda_s pf_tol pf_max_iter.

#include <map>
#include <string>
#include <string_view>

#include "psopf/opf.hpp"
#include "psopf/powerflow.hpp"
#include "psopf/pso.hpp"

namespace psopf {

struct RunConfig {
  PsoConfig pso;
  PenaltyConfig penalty;
  PowerFlowOptions powerflow;
};

inline constexpr std::string_view kEnvPrefix = "PSOPF_";

/// Parse key = value lines; unknown keys and malformed values throw
/// std::invalid_argument naming the line.
std::map<std::string, std::string> parse_key_values(std::string_view text);

/// Apply one setting; throws std::invalid_argument for unknown keys.
void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value);

RunConfig load_config(std::string_view text);
RunConfig load_config_file(const std::string& path);

/// Apply PSOPF_* environment overrides. Returns the keys that were applied.
std::map<std::string, std::string> apply_env_overrides(RunConfig& cfg);

/// All settings as key/value strings, in the format load_config accepts.
std::map<std::string, std::string> config_entries(const RunConfig& cfg);
std::string serialize_config(const RunConfig& cfg);

}  // namespace psopf
