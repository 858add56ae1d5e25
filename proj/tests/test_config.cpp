#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <doctest.h>

#include "riskimit/config.hpp"
#include "riskimit/costnoise.hpp"

using namespace riskimit;

namespace {

struct TempPath {
  std::string path;
  explicit TempPath(const std::string& name)
      : path((std::filesystem::temp_directory_path() / name).string()) {}
  ~TempPath() { std::remove(path.c_str()); }
};

using Overrides = std::vector<std::pair<std::string, std::string>>;

// A valid one-cluster noise model artifact on disk, shaped like the
// fit-noise command writes it.
void write_noise_model(const std::string& path, int obs_dim,
                       int action_count) {
  ClusterModel model;
  model.centroids = {std::vector<double>(obs_dim + action_count, 0.0)};
  model.weights = {1.0};
  model.action_count = action_count;
  std::ofstream out(path);
  out << nlohmann::json{{"model", model.to_json()}} << '\n';
}

}  // namespace

TEST_CASE("default config has the five sections and passes validation") {
  const nlohmann::json cfg = default_config();
  for (const char* section : {"env", "risk", "algo", "optimizer", "run"})
    CHECK(cfg.contains(section));
  CHECK_NOTHROW(validate_config_keys(cfg));
  CHECK(cfg["risk"]["alpha"].get<double>() == 0.3);
  CHECK(cfg["run"]["seed"].get<int>() == 1);
  // The step counts stay unset so each variant keeps its own default.
  CHECK_FALSE(cfg["algo"].contains("generator_steps"));
  CHECK_FALSE(cfg["algo"].contains("discriminator_steps"));
}

TEST_CASE("unknown sections and keys are rejected, not defaulted") {
  nlohmann::json cfg = default_config();
  cfg["rsik"] = nlohmann::json::object();
  CHECK_THROWS_WITH_AS(validate_config_keys(cfg),
                       "unknown config section: rsik", ConfigError);

  cfg = default_config();
  cfg["risk"]["alhpa"] = 0.3;
  CHECK_THROWS_WITH_AS(validate_config_keys(cfg),
                       "unknown config key: risk.alhpa", ConfigError);

  cfg = default_config();
  cfg["risk"] = 3;
  CHECK_THROWS_AS(validate_config_keys(cfg), ConfigError);
  CHECK_THROWS_AS(validate_config_keys(nlohmann::json::array()), ConfigError);
}

TEST_CASE("overrides take dotted paths and known shorthands") {
  nlohmann::json cfg = default_config();
  apply_override(cfg, "risk.alpha", "0.25");
  CHECK(cfg["risk"]["alpha"].get<double>() == 0.25);

  apply_override(cfg, "algo", "w-rs-gail");
  CHECK(cfg["algo"]["name"] == "w-rs-gail");
  apply_override(cfg, "seed", "17");
  CHECK(cfg["run"]["seed"].get<int>() == 17);
  apply_override(cfg, "iterations", "12");
  CHECK(cfg["run"]["iterations"].get<int>() == 12);
  apply_override(cfg, "threads", "4");
  CHECK(cfg["run"]["threads"].get<int>() == 4);

  // JSON values parse; everything else stays a plain string.
  apply_override(cfg, "risk.lambda", "[0.0, 0.5, 2.0]");
  CHECK(cfg["risk"]["lambda"].is_array());
  CHECK(cfg["risk"]["lambda"].size() == 3);
  apply_override(cfg, "algo.mean_baseline", "false");
  CHECK(cfg["algo"]["mean_baseline"].get<bool>() == false);
  apply_override(cfg, "env.name", "cartpole");
  CHECK(cfg["env"]["name"].is_string());
  apply_override(cfg, "risk.lambda", "-0.5");
  CHECK(cfg["risk"]["lambda"].get<double>() == -0.5);

  CHECK_THROWS_AS(apply_override(cfg, "alpha", "0.3"), ConfigError);
  CHECK_THROWS_AS(apply_override(cfg, "risk.alpha.x", "0.3"), ConfigError);
  CHECK_THROWS_AS(apply_override(cfg, "risk.", "0.3"), ConfigError);
  CHECK_THROWS_AS(apply_override(cfg, "risk.alhpa", "0.3"), ConfigError);
}

TEST_CASE("resolution layers: defaults, file, env seed, flags") {
  nlohmann::json file = {{"run", {{"seed", 5}, {"iterations", 7}}}};

  nlohmann::json cfg = resolve_config(file, {}, nullptr);
  CHECK(cfg["run"]["seed"].get<int>() == 5);
  CHECK(cfg["run"]["iterations"].get<int>() == 7);
  CHECK(cfg["risk"]["alpha"].get<double>() == 0.3);  // default survives

  cfg = resolve_config(file, {}, "7001");
  CHECK(cfg["run"]["seed"].get<std::uint64_t>() == 7001);

  cfg = resolve_config(file, {{"seed", "9"}, {"risk.alpha", "0.5"}}, "7001");
  CHECK(cfg["run"]["seed"].get<int>() == 9);
  CHECK(cfg["risk"]["alpha"].get<double>() == 0.5);

  CHECK_THROWS_AS(resolve_config(file, {}, "12cows"), ConfigError);
  CHECK_THROWS_AS(resolve_config(file, {}, ""), ConfigError);
  CHECK_THROWS_AS(resolve_config(file, {}, "-3"), ConfigError);
  CHECK_THROWS_AS(
      resolve_config(nlohmann::json{{"run", {{"sede", 1}}}}, {}, nullptr),
      ConfigError);
}

TEST_CASE("typed extraction reports the key path") {
  nlohmann::json cfg = default_config();
  CHECK(cfg_number(cfg, "risk", "alpha") == 0.3);
  CHECK(cfg_int(cfg, "run", "iterations") == 300);
  CHECK(cfg_bool(cfg, "algo", "mean_baseline") == true);
  CHECK(cfg_string(cfg, "env", "name") == "two_route_gridworld");
  CHECK(cfg_seed(cfg) == 1);

  cfg["risk"]["alpha"] = "wide";
  CHECK_THROWS_WITH_AS((void)cfg_number(cfg, "risk", "alpha"),
                       "risk.alpha: expected a number", ConfigError);
  cfg["run"]["iterations"] = 2.5;
  CHECK_THROWS_AS((void)cfg_int(cfg, "run", "iterations"), ConfigError);
  cfg["run"]["seed"] = -4;
  CHECK_THROWS_AS((void)cfg_seed(cfg), ConfigError);
  CHECK_THROWS_WITH_AS((void)cfg_string(cfg, "run", "nope"),
                       "run.nope: missing", ConfigError);
}

TEST_CASE("environments build from the env section") {
  nlohmann::json cfg = default_config();
  BuiltEnv built = build_environment(cfg);
  CHECK(built.env().spec().name == "two_route_gridworld");
  CHECK(built.wrapped == nullptr);

  cfg["env"]["horizon"] = 9;
  cfg["env"]["gamma"] = 0.8;
  built = build_environment(cfg);
  CHECK(built.env().spec().horizon == 9);
  CHECK(built.env().spec().gamma == 0.8);

  cfg = default_config();
  cfg["env"]["name"] = "cartpole";
  CHECK(build_environment(cfg).env().spec().name == "cartpole");
  cfg["env"]["name"] = "pendulum";
  cfg["env"]["horizon"] = 50;
  built = build_environment(cfg);
  CHECK(built.env().spec().name == "pendulum");
  CHECK(built.env().spec().horizon == 50);

  cfg["env"]["name"] = "mountain_car";
  CHECK_THROWS_AS((void)build_environment(cfg), ConfigError);
}

TEST_CASE("noise model path wraps the environment") {
  nlohmann::json cfg = default_config();
  const EnvSpec base_spec = build_environment(cfg).env().spec();

  TempPath model_file("riskimit_config_noise_model.json");
  write_noise_model(model_file.path, base_spec.observation_dim,
                    base_spec.action_count);

  cfg["env"]["noise_model"] = model_file.path;
  BuiltEnv built = build_environment(cfg);
  CHECK(built.wrapped != nullptr);
  CHECK(built.env().spec().name == "two_route_gridworld+hopper_style");
  CHECK(built.base->spec().name == "two_route_gridworld");

  cfg["env"]["noise_variant"] = "walker_style";
  built = build_environment(cfg);
  CHECK(built.env().spec().name == "two_route_gridworld+walker_style");

  cfg["env"]["noise_model"] = "";  // explicit off switch
  CHECK(build_environment(cfg).wrapped == nullptr);

  cfg["env"]["noise_model"] = "/nonexistent/model.json";
  CHECK_THROWS_AS((void)build_environment(cfg), std::runtime_error);
}

TEST_CASE("risk profile comes from the risk section plus the env discount") {
  nlohmann::json cfg = default_config();
  const RiskConfig risk = risk_from_config(cfg, 0.97);
  CHECK(risk.alpha == 0.3);
  CHECK(risk.lambda == 0.5);
  CHECK(risk.gamma == 0.97);

  cfg["risk"]["lambda"] = {0.0, 0.5};
  CHECK_THROWS_WITH_AS(
      (void)risk_from_config(cfg, 0.97),
      "risk.lambda: this command takes a single value, not a grid",
      ConfigError);
  cfg["risk"]["lambda"] = "big";
  CHECK_THROWS_AS((void)risk_from_config(cfg, 0.97), ConfigError);
  cfg["risk"]["lambda"] = 0.5;
  cfg["risk"]["alpha"] = 0.0;
  CHECK_THROWS_AS((void)risk_from_config(cfg, 0.97), std::invalid_argument);
}

TEST_CASE("lambda grids accept scalars and arrays") {
  nlohmann::json cfg = default_config();
  CHECK(lambda_grid(cfg) == std::vector<double>{0.5});
  cfg["risk"]["lambda"] = {0.0, 0.5, 2.0};
  CHECK(lambda_grid(cfg) == std::vector<double>{0.0, 0.5, 2.0});
  cfg["risk"]["lambda"] = nlohmann::json::array();
  CHECK_THROWS_AS((void)lambda_grid(cfg), ConfigError);
  cfg["risk"]["lambda"] = {0.0, "x"};
  CHECK_THROWS_AS((void)lambda_grid(cfg), ConfigError);
}

TEST_CASE("algo assembly keeps per-variant step defaults") {
  nlohmann::json cfg = default_config();
  RiskConfig risk;
  risk.alpha = 0.3;
  risk.lambda = 0.5;

  cfg["algo"]["name"] = "gail";
  ImitationAlgo algo = algo_from_config(cfg, risk);
  CHECK(algo.variant == ImitationVariant::kGail);
  CHECK(algo.generator_steps == 3);  // gail's own default

  cfg["algo"]["name"] = "js-rs-gail";
  algo = algo_from_config(cfg, risk);
  CHECK(algo.variant == ImitationVariant::kJsRsGail);
  CHECK(algo.generator_steps == 1);
  CHECK(algo.risk.lambda == 0.5);

  cfg["algo"]["generator_steps"] = 5;
  cfg["algo"]["discriminator_steps"] = 2;
  cfg["algo"]["policy_hidden"] = {16, 8};
  cfg["algo"]["policy_lr"] = 0.02;
  cfg["optimizer"]["name"] = "kl_constrained";
  cfg["optimizer"]["max_kl"] = 0.05;
  cfg["run"]["threads"] = 3;
  algo = algo_from_config(cfg, risk);
  CHECK(algo.generator_steps == 5);
  CHECK(algo.discriminator_steps == 2);
  CHECK(algo.policy_hidden == std::vector<int>{16, 8});
  CHECK(algo.policy_adam.lr == 0.02);
  CHECK(algo.policy_optimizer == PolicyOptimizer::kKlConstrained);
  CHECK(algo.kl.max_kl == 0.05);
  CHECK(algo.threads == 3);

  cfg["algo"]["policy_hidden"] = {16.5};
  CHECK_THROWS_AS((void)algo_from_config(cfg, risk), ConfigError);
  cfg["algo"]["policy_hidden"] = {16};
  cfg["algo"]["generator_steps"] = 0;
  CHECK_THROWS_AS((void)algo_from_config(cfg, risk), std::invalid_argument);
}
