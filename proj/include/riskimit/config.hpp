#pragma once

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "riskimit/environments.hpp"
#include "riskimit/train.hpp"

namespace riskimit {

// Config errors carry the offending key path; the CLI maps them to the
// usage exit code.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// The five-section config object with every default filled in.
nlohmann::json default_config();

// Rejects sections and keys outside the schema; typos must not become
// silent defaults.
void validate_config_keys(const nlohmann::json& cfg);

// Overrides are dotted key paths ("risk.alpha") or a bare shorthand from
// {algo -> algo.name, seed -> run.seed, iterations -> run.iterations,
// threads -> run.threads}. Values parse as JSON when they can (numbers,
// bools, arrays) and fall back to strings.
void apply_override(nlohmann::json& cfg, const std::string& key,
                    const std::string& value);

// defaults <- file <- RISKIMIT_SEED <- flag overrides, validated at each
// layer. env_seed is the raw environment variable value or null.
nlohmann::json resolve_config(
    const nlohmann::json& file_config,
    const std::vector<std::pair<std::string, std::string>>& overrides,
    const char* env_seed);

// Environment named by the env section, with the cost-noise wrapper applied
// when env.noise_model is set. The struct owns the whole chain.
struct BuiltEnv {
  std::unique_ptr<Environment> base;
  std::unique_ptr<Environment> wrapped;  // null without noise

  const Environment& env() const { return wrapped ? *wrapped : *base; }
};

BuiltEnv build_environment(const nlohmann::json& cfg);

// risk section + the env discount (the risk profile always discounts like
// the environment it scores). Rejects a lambda grid: commands that take a
// single profile must not silently pick a grid element.
RiskConfig risk_from_config(const nlohmann::json& cfg, double env_gamma);

// Lambda grid: scalar lambda gives one entry, an array gives the sweep.
std::vector<double> lambda_grid(const nlohmann::json& cfg);

// algo + optimizer sections assembled onto the variant's defaults, with the
// given risk profile (the caller pins the grid element).
ImitationAlgo algo_from_config(const nlohmann::json& cfg,
                               const RiskConfig& risk);

// Typed extraction with key-path errors; exposed for the command layer.
double cfg_number(const nlohmann::json& cfg, const std::string& section,
                  const std::string& key);
int cfg_int(const nlohmann::json& cfg, const std::string& section,
            const std::string& key);
bool cfg_bool(const nlohmann::json& cfg, const std::string& section,
              const std::string& key);
std::string cfg_string(const nlohmann::json& cfg, const std::string& section,
                       const std::string& key);
std::uint64_t cfg_seed(const nlohmann::json& cfg);

}  // namespace riskimit
