#pragma once

#include <string>

#include <json.hpp>

namespace riskimit {

// Executes one CLI command against a fully resolved config and returns the
// process exit code: 0 success, 1 usage or config problem, 2 a training run
// diverged, 3 a verification suite failed. Commands throw ConfigError (or
// std::runtime_error for missing files); the caller maps those to 1.
int run_command(const std::string& command, const nlohmann::json& resolved);

}  // namespace riskimit
