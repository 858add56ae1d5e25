#include "riskimit/config.hpp"

#include <algorithm>
#include <array>
#include <cstdlib>
#include <fstream>

#include "riskimit/costnoise.hpp"

namespace riskimit {
namespace {

struct SectionSchema {
  const char* name;
  std::vector<const char*> keys;
};

const std::array<SectionSchema, 5> kSchema = {{
    {"env", {"name", "horizon", "gamma", "noise_model", "noise_variant"}},
    {"risk", {"alpha", "lambda"}},
    {"algo",
     {"name", "entropy_weight", "generator_steps", "discriminator_steps",
      "pretrain_iters", "agent_trajectories", "clip_bound", "mean_baseline",
      "policy_hidden", "discriminator_hidden", "policy_lr",
      "discriminator_lr"}},
    {"optimizer",
     {"name", "max_kl", "cg_iterations", "backtrack_factor", "max_backtracks",
      "damping", "fisher_max_states"}},
    {"run",
     {"seed", "iterations", "threads", "output_dir", "expert_policy",
      "expert_dataset", "noise_model", "policy", "evaluation", "report",
      "dataset_count", "eval_trajectories", "expert_iterations",
      "expert_batch", "expert_lr", "logs", "aggregate_mode", "k", "m",
      "kmeans_k", "kmeans_iters", "report_format"}},
}};

const SectionSchema* find_section(const std::string& name) {
  for (const auto& s : kSchema)
    if (name == s.name) return &s;
  return nullptr;
}

const nlohmann::json& section_key(const nlohmann::json& cfg,
                                  const std::string& section,
                                  const std::string& key) {
  const auto sec = cfg.find(section);
  if (sec == cfg.end() || !sec->contains(key))
    throw ConfigError(section + "." + key + ": missing");
  return sec->at(key);
}

std::vector<int> cfg_int_list(const nlohmann::json& cfg,
                              const std::string& section,
                              const std::string& key) {
  const auto& v = section_key(cfg, section, key);
  if (!v.is_array())
    throw ConfigError(section + "." + key + ": expected an array of integers");
  std::vector<int> out;
  for (const auto& e : v) {
    if (!e.is_number_integer())
      throw ConfigError(section + "." + key +
                        ": expected an array of integers");
    out.push_back(e.get<int>());
  }
  return out;
}

}  // namespace

nlohmann::json default_config() {
  return {
      {"env", {{"name", "two_route_gridworld"}}},
      {"risk", {{"alpha", 0.3}, {"lambda", 0.5}}},
      {"algo",
       {{"name", "js-rs-gail"},
        {"entropy_weight", 1e-3},
        {"pretrain_iters", 0},
        {"agent_trajectories", 100},
        {"clip_bound", 0.05},
        {"mean_baseline", true},
        {"policy_hidden", {32}},
        {"discriminator_hidden", {32}},
        {"policy_lr", 1e-3},
        {"discriminator_lr", 1e-3}}},
      {"optimizer",
       {{"name", "reinforce_adam"},
        {"max_kl", 0.01},
        {"cg_iterations", 10},
        {"backtrack_factor", 0.5},
        {"max_backtracks", 10},
        {"damping", 0.1},
        {"fisher_max_states", 1024}}},
      {"run",
       {{"seed", 1},
        {"iterations", 300},
        {"threads", 1},
        {"output_dir", "."},
        {"expert_policy", "expert_policy.json"},
        {"expert_dataset", "expert_dataset.jsonl"},
        {"noise_model", "noise_model.json"},
        {"policy", ""},
        {"evaluation", "evaluation.json"},
        {"report", "report"},
        {"dataset_count", 100},
        {"eval_trajectories", 300},
        {"expert_iterations", 300},
        {"expert_batch", 100},
        {"expert_lr", 0.01},
        {"logs", nlohmann::json::array()},
        {"aggregate_mode", "last_k_iterations"},
        {"k", 100},
        {"m", 10},
        {"kmeans_k", 15},
        {"kmeans_iters", 100},
        {"report_format", "csv"}}},
  };
}

void validate_config_keys(const nlohmann::json& cfg) {
  if (!cfg.is_object()) throw ConfigError("config root must be an object");
  for (const auto& [section, body] : cfg.items()) {
    const SectionSchema* schema = find_section(section);
    if (schema == nullptr)
      throw ConfigError("unknown config section: " + section);
    if (!body.is_object())
      throw ConfigError("config section " + section + " must be an object");
    for (const auto& [key, value] : body.items()) {
      (void)value;
      if (std::find_if(schema->keys.begin(), schema->keys.end(),
                       [&](const char* k) { return key == k; }) ==
          schema->keys.end())
        throw ConfigError("unknown config key: " + section + "." + key);
    }
  }
}

void apply_override(nlohmann::json& cfg, const std::string& key,
                    const std::string& value) {
  std::string path = key;
  if (path.find('.') == std::string::npos) {
    if (path == "algo") path = "algo.name";
    else if (path == "seed") path = "run.seed";
    else if (path == "iterations") path = "run.iterations";
    else if (path == "threads") path = "run.threads";
    else
      throw ConfigError("override key must be section.key, got: " + key);
  }
  const auto dot = path.find('.');
  const std::string section = path.substr(0, dot);
  const std::string leaf = path.substr(dot + 1);
  if (leaf.empty() || leaf.find('.') != std::string::npos)
    throw ConfigError("override key must be section.key, got: " + key);

  nlohmann::json parsed = nlohmann::json::parse(value, nullptr, false);
  if (parsed.is_discarded()) parsed = value;  // plain string
  cfg[section][leaf] = std::move(parsed);
  validate_config_keys(cfg);
}

nlohmann::json resolve_config(
    const nlohmann::json& file_config,
    const std::vector<std::pair<std::string, std::string>>& overrides,
    const char* env_seed) {
  validate_config_keys(file_config);
  nlohmann::json cfg = default_config();
  for (const auto& [section, body] : file_config.items())
    for (const auto& [key, value] : body.items()) cfg[section][key] = value;

  if (env_seed != nullptr) {
    const std::string raw(env_seed);
    if (raw.empty() ||
        raw.find_first_not_of("0123456789") != std::string::npos)
      throw ConfigError("RISKIMIT_SEED must be a nonnegative integer, got: " +
                        raw);
    cfg["run"]["seed"] = std::stoull(raw);
  }
  for (const auto& [key, value] : overrides) apply_override(cfg, key, value);
  validate_config_keys(cfg);
  return cfg;
}

double cfg_number(const nlohmann::json& cfg, const std::string& section,
                  const std::string& key) {
  const auto& v = section_key(cfg, section, key);
  if (!v.is_number())
    throw ConfigError(section + "." + key + ": expected a number");
  return v.get<double>();
}

int cfg_int(const nlohmann::json& cfg, const std::string& section,
            const std::string& key) {
  const auto& v = section_key(cfg, section, key);
  if (!v.is_number_integer())
    throw ConfigError(section + "." + key + ": expected an integer");
  return v.get<int>();
}

bool cfg_bool(const nlohmann::json& cfg, const std::string& section,
              const std::string& key) {
  const auto& v = section_key(cfg, section, key);
  if (!v.is_boolean())
    throw ConfigError(section + "." + key + ": expected a boolean");
  return v.get<bool>();
}

std::string cfg_string(const nlohmann::json& cfg, const std::string& section,
                       const std::string& key) {
  const auto& v = section_key(cfg, section, key);
  if (!v.is_string())
    throw ConfigError(section + "." + key + ": expected a string");
  return v.get<std::string>();
}

std::uint64_t cfg_seed(const nlohmann::json& cfg) {
  const auto& v = section_key(cfg, "run", "seed");
  if (!v.is_number_unsigned() && !v.is_number_integer())
    throw ConfigError("run.seed: expected a nonnegative integer");
  if (v.is_number_integer() && v.get<std::int64_t>() < 0)
    throw ConfigError("run.seed: expected a nonnegative integer");
  return v.get<std::uint64_t>();
}

BuiltEnv build_environment(const nlohmann::json& cfg) {
  const std::string name = cfg_string(cfg, "env", "name");
  const bool has_horizon = cfg.at("env").contains("horizon");
  const bool has_gamma = cfg.at("env").contains("gamma");

  BuiltEnv built;
  if (name == "two_route_gridworld") {
    TabularMdp mdp = two_route_gridworld();
    if (has_horizon) mdp.horizon = cfg_int(cfg, "env", "horizon");
    if (has_gamma) mdp.gamma = cfg_number(cfg, "env", "gamma");
    built.base = std::make_unique<TabularEnv>(std::move(mdp), name);
  } else if (name == "cartpole" || name == "pendulum") {
    const int horizon = has_horizon ? cfg_int(cfg, "env", "horizon") : 200;
    const double gamma = has_gamma ? cfg_number(cfg, "env", "gamma") : 0.99;
    if (name == "cartpole")
      built.base = std::make_unique<CartPoleEnv>(horizon, gamma);
    else
      built.base = std::make_unique<PendulumEnv>(horizon, gamma);
  } else {
    throw ConfigError("env.name: unknown environment '" + name + "'");
  }

  // An empty path disables the wrapper so overrides can switch it off.
  if (cfg.at("env").contains("noise_model") &&
      !cfg_string(cfg, "env", "noise_model").empty()) {
    const std::string path = cfg_string(cfg, "env", "noise_model");
    std::ifstream in(path);
    if (!in)
      throw std::runtime_error("cannot open noise model: " + path);
    nlohmann::json artifact;
    in >> artifact;
    ClusterModel model = ClusterModel::from_json(artifact.at("model"));
    const std::string variant_name =
        cfg.at("env").contains("noise_variant")
            ? cfg_string(cfg, "env", "noise_variant")
            : "hopper_style";
    built.wrapped = std::make_unique<NoisyCostEnv>(
        *built.base, std::move(model),
        noise_variant_from_name(variant_name));
  }
  return built;
}

RiskConfig risk_from_config(const nlohmann::json& cfg, double env_gamma) {
  RiskConfig risk;
  risk.alpha = cfg_number(cfg, "risk", "alpha");
  const auto& lambda = section_key(cfg, "risk", "lambda");
  if (lambda.is_array())
    throw ConfigError(
        "risk.lambda: this command takes a single value, not a grid");
  if (!lambda.is_number())
    throw ConfigError("risk.lambda: expected a number or an array");
  risk.lambda = lambda.get<double>();
  risk.gamma = env_gamma;
  risk.validate();
  return risk;
}

std::vector<double> lambda_grid(const nlohmann::json& cfg) {
  const auto& lambda = section_key(cfg, "risk", "lambda");
  std::vector<double> grid;
  if (lambda.is_number()) {
    grid.push_back(lambda.get<double>());
  } else if (lambda.is_array()) {
    for (const auto& e : lambda) {
      if (!e.is_number())
        throw ConfigError("risk.lambda: grid entries must be numbers");
      grid.push_back(e.get<double>());
    }
    if (grid.empty()) throw ConfigError("risk.lambda: empty grid");
  } else {
    throw ConfigError("risk.lambda: expected a number or an array");
  }
  return grid;
}

ImitationAlgo algo_from_config(const nlohmann::json& cfg,
                               const RiskConfig& risk) {
  ImitationAlgo algo = default_algo(
      variant_from_name(cfg_string(cfg, "algo", "name")));
  algo.risk = risk;
  const auto& section = cfg.at("algo");
  if (section.contains("entropy_weight"))
    algo.entropy_weight = cfg_number(cfg, "algo", "entropy_weight");
  if (section.contains("generator_steps"))
    algo.generator_steps = cfg_int(cfg, "algo", "generator_steps");
  if (section.contains("discriminator_steps"))
    algo.discriminator_steps = cfg_int(cfg, "algo", "discriminator_steps");
  if (section.contains("pretrain_iters"))
    algo.pretrain_iters = cfg_int(cfg, "algo", "pretrain_iters");
  if (section.contains("agent_trajectories"))
    algo.agent_trajectories = cfg_int(cfg, "algo", "agent_trajectories");
  if (section.contains("clip_bound"))
    algo.clip_bound = cfg_number(cfg, "algo", "clip_bound");
  if (section.contains("mean_baseline"))
    algo.mean_baseline = cfg_bool(cfg, "algo", "mean_baseline");
  if (section.contains("policy_hidden"))
    algo.policy_hidden = cfg_int_list(cfg, "algo", "policy_hidden");
  if (section.contains("discriminator_hidden"))
    algo.discriminator_hidden =
        cfg_int_list(cfg, "algo", "discriminator_hidden");
  if (section.contains("policy_lr"))
    algo.policy_adam.lr = cfg_number(cfg, "algo", "policy_lr");
  if (section.contains("discriminator_lr"))
    algo.discriminator_adam.lr = cfg_number(cfg, "algo", "discriminator_lr");

  algo.policy_optimizer =
      optimizer_from_name(cfg_string(cfg, "optimizer", "name"));
  algo.kl.max_kl = cfg_number(cfg, "optimizer", "max_kl");
  algo.kl.cg_iterations = cfg_int(cfg, "optimizer", "cg_iterations");
  algo.kl.backtrack_factor = cfg_number(cfg, "optimizer", "backtrack_factor");
  algo.kl.max_backtracks = cfg_int(cfg, "optimizer", "max_backtracks");
  algo.kl.damping = cfg_number(cfg, "optimizer", "damping");
  algo.kl.fisher_max_states = cfg_int(cfg, "optimizer", "fisher_max_states");
  algo.threads = cfg_int(cfg, "run", "threads");
  algo.validate();
  return algo;
}

}  // namespace riskimit
