#include "riskimit/commands.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>

#include "riskimit/config.hpp"
#include "riskimit/costnoise.hpp"
#include "riskimit/expert.hpp"
#include "riskimit/harness.hpp"
#include "riskimit/selfcheck.hpp"

namespace riskimit {
namespace {

namespace fs = std::filesystem;

// Relative artifact paths land under run.output_dir; absolute ones are
// taken as given.
fs::path artifact_path(const nlohmann::json& cfg, const std::string& key) {
  fs::path p = cfg_string(cfg, "run", key);
  if (p.empty()) throw ConfigError("run." + key + ": no path configured");
  if (p.is_relative()) p = fs::path(cfg_string(cfg, "run", "output_dir")) / p;
  return p;
}

void ensure_output_dir(const nlohmann::json& cfg) {
  fs::create_directories(cfg_string(cfg, "run", "output_dir"));
}

nlohmann::json artifact_base(const nlohmann::json& resolved,
                             std::uint64_t seed) {
  return {{"format_version", 1}, {"config", resolved}, {"seed", seed}};
}

void write_artifact(const fs::path& path, const nlohmann::json& artifact) {
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw std::runtime_error("cannot open for write: " + path.string());
  out << artifact.dump(2) << '\n';
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

nlohmann::json read_artifact(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open: " + path.string());
  nlohmann::json j;
  in >> j;
  return j;
}

CategoricalPolicy load_policy(const fs::path& path) {
  const nlohmann::json j = read_artifact(path);
  if (!j.contains("policy_net"))
    throw std::runtime_error("no policy_net in artifact: " + path.string());
  return CategoricalPolicy(Mlp::from_json(j.at("policy_net")));
}

std::vector<Trajectory> load_dataset(const nlohmann::json& cfg,
                                     const EnvSpec& spec) {
  const fs::path path = artifact_path(cfg, "expert_dataset");
  const TrajectoryDataset dataset = read_trajectory_dataset(path);
  if (dataset.trajectories.empty())
    throw std::runtime_error("empty expert dataset: " + path.string());
  if (dataset.header.env_name != spec.name)
    throw std::runtime_error("expert dataset was generated on '" +
                             dataset.header.env_name + "', not '" + spec.name +
                             "': " + path.string());
  return dataset.trajectories;
}

int cmd_train_expert(const nlohmann::json& cfg) {
  ensure_output_dir(cfg);
  const BuiltEnv built = build_environment(cfg);
  const std::uint64_t seed = cfg_seed(cfg);

  ExpertTrainConfig ecfg;
  ecfg.risk = risk_from_config(cfg, built.env().spec().gamma);
  ecfg.batch_trajectories = cfg_int(cfg, "run", "expert_batch");
  ecfg.adam.lr = cfg_number(cfg, "run", "expert_lr");
  ecfg.threads = cfg_int(cfg, "run", "threads");
  const ExpertTrainResult result = train_cvar_expert(
      ecfg, built.env(), cfg_int(cfg, "run", "expert_iterations"), seed);

  nlohmann::json artifact = artifact_base(cfg, seed);
  artifact["kind"] = "expert_policy";
  artifact["policy_net"] = result.policy.net().to_json();
  artifact["best_rho"] = result.best_rho;
  artifact["iterations"] = result.rho_curve.size();
  const fs::path path = artifact_path(cfg, "expert_policy");
  write_artifact(path, artifact);
  std::cout << "expert_policy=" << path.string()
            << " best_rho=" << format_double(result.best_rho) << '\n';
  if (result.diverged) {
    std::cerr << "diverged: " << result.divergence_detail << '\n';
    return 2;
  }
  return 0;
}

int cmd_gen_dataset(const nlohmann::json& cfg) {
  ensure_output_dir(cfg);
  const BuiltEnv built = build_environment(cfg);
  const std::uint64_t seed = cfg_seed(cfg);
  const CategoricalPolicy policy =
      load_policy(artifact_path(cfg, "expert_policy"));
  const fs::path path = artifact_path(cfg, "expert_dataset");
  const auto trajectories = generate_expert_dataset(
      policy, built.env(), cfg_int(cfg, "run", "dataset_count"), seed,
      path.string(), cfg_int(cfg, "run", "threads"), cfg);
  std::cout << "expert_dataset=" << path.string()
            << " trajectories=" << trajectories.size() << '\n';
  return 0;
}

int cmd_fit_noise(const nlohmann::json& cfg) {
  ensure_output_dir(cfg);
  const BuiltEnv built = build_environment(cfg);
  const EnvSpec& spec = built.base->spec();
  const std::uint64_t seed = cfg_seed(cfg);
  const auto trajectories = load_dataset(cfg, spec);
  const auto pairs = dataset_pairs(trajectories);
  RngStream rng(seed);
  const ClusterModel model =
      fit_kmeans(pairs, cfg_int(cfg, "run", "kmeans_k"), spec.action_count,
                 rng, cfg_int(cfg, "run", "kmeans_iters"));

  nlohmann::json artifact = artifact_base(cfg, seed);
  artifact["kind"] = "noise_model";
  artifact["model"] = model.to_json();
  const fs::path path = artifact_path(cfg, "noise_model");
  write_artifact(path, artifact);
  std::cout << "noise_model=" << path.string() << " clusters=" << model.k()
            << '\n';
  return 0;
}

int cmd_train(const nlohmann::json& cfg) {
  ensure_output_dir(cfg);
  const BuiltEnv built = build_environment(cfg);
  const EnvSpec& spec = built.env().spec();
  const std::uint64_t seed = cfg_seed(cfg);
  const auto expert_data = load_dataset(cfg, built.base->spec());
  if (static_cast<int>(expert_data.front().states.front().size()) !=
      spec.observation_dim)
    throw std::runtime_error(
        "expert dataset observation width does not match the environment");

  const std::string algo_name = cfg_string(cfg, "algo", "name");
  const fs::path out_dir = cfg_string(cfg, "run", "output_dir");
  bool any_diverged = false;
  for (const double lambda : lambda_grid(cfg)) {
    RiskConfig risk;
    risk.alpha = cfg_number(cfg, "risk", "alpha");
    risk.lambda = lambda;
    risk.gamma = spec.gamma;
    risk.validate();
    const ImitationAlgo algo = algo_from_config(cfg, risk);

    nlohmann::json resolved_l = cfg;
    resolved_l["risk"]["lambda"] = lambda;
    const TrainResult result =
        train_imitation(algo, built.env(), expert_data,
                        cfg_int(cfg, "run", "iterations"), seed);

    const std::string tag = algo_name + "_lambda" + format_double(lambda);
    const fs::path log_path = out_dir / ("train_" + tag + ".jsonl");
    write_training_log(log_path.string(), result.log, resolved_l, seed);

    nlohmann::json checkpoint = artifact_base(resolved_l, seed);
    checkpoint["kind"] = "imitation_checkpoint";
    checkpoint["algo"] = algo_name;
    checkpoint["lambda"] = lambda;
    checkpoint["policy_net"] = result.policy.net().to_json();
    checkpoint["discriminator_net"] = result.discriminator.to_json();
    checkpoint["diverged"] = result.diverged;
    checkpoint["divergence_detail"] = result.divergence_detail;
    checkpoint["warnings"] = result.warnings;
    const fs::path ckpt_path = out_dir / ("checkpoint_" + tag + ".json");
    write_artifact(ckpt_path, checkpoint);

    std::cout << "lambda=" << format_double(lambda)
              << " iterations=" << result.log.size() << " log="
              << log_path.string() << " checkpoint=" << ckpt_path.string()
              << (result.diverged ? " diverged" : "") << '\n';
    if (result.diverged) {
      std::cerr << "diverged: " << result.divergence_detail << '\n';
      any_diverged = true;
    }
    for (const auto& w : result.warnings)
      std::cerr << "warning: " << w << '\n';
  }
  return any_diverged ? 2 : 0;
}

int cmd_evaluate(const nlohmann::json& cfg) {
  ensure_output_dir(cfg);
  const BuiltEnv built = build_environment(cfg);
  const std::uint64_t seed = cfg_seed(cfg);
  const CategoricalPolicy policy = load_policy(artifact_path(cfg, "policy"));
  const RiskConfig risk = risk_from_config(cfg, built.env().spec().gamma);
  const int n_traj = cfg_int(cfg, "run", "eval_trajectories");
  const PolicyStats stats =
      evaluate_policy(built.env(), policy.as_fn(), n_traj, risk,
                      RngStream(seed), cfg_int(cfg, "run", "threads"));

  nlohmann::json artifact = artifact_base(cfg, seed);
  artifact["kind"] = "evaluation";
  artifact["trajectories"] = n_traj;
  artifact["stats"] = stats.to_json();
  const fs::path path = artifact_path(cfg, "evaluation");
  write_artifact(path, artifact);
  std::cout << "evaluation=" << path.string()
            << " mean=" << format_double(stats.mean)
            << " var_alpha=" << format_double(stats.var_alpha)
            << " cvar_alpha=" << format_double(stats.cvar_alpha)
            << " rho_lambda=" << format_double(stats.rho_lambda) << '\n';
  return 0;
}

int cmd_report(const nlohmann::json& cfg) {
  ensure_output_dir(cfg);
  const auto& logs = cfg.at("run").at("logs");
  if (!logs.is_array() || logs.empty())
    throw ConfigError("run.logs: list the training logs to aggregate");
  std::vector<SeedRun> runs;
  const fs::path out_dir = cfg_string(cfg, "run", "output_dir");
  for (const auto& entry : logs) {
    if (!entry.is_string())
      throw ConfigError("run.logs: entries must be file paths");
    // Same resolution rule as the other artifacts: relative means under
    // run.output_dir, where cmd_train put the logs in the first place.
    fs::path p = entry.get<std::string>();
    if (p.is_relative()) p = out_dir / p;
    const std::string path = p.string();
    const TrainingLogFile log = read_training_log(path);
    if (!log.config.contains("algo") ||
        !log.config.at("algo").contains("name"))
      throw std::runtime_error("training log lacks algo.name: " + path);
    runs.push_back({log.config.at("algo").at("name").get<std::string>(),
                    log.seed, log.records});
    const fs::path curves =
        out_dir / (fs::path(path).stem().string() + "_curves.csv");
    emit_curves_csv(curves.string(), log.records);
    std::cout << "curves=" << curves.string() << '\n';
  }

  const AggregationMode mode =
      aggregation_mode_from_name(cfg_string(cfg, "run", "aggregate_mode"));
  const EvaluationReport report = aggregate(
      runs, mode, cfg_int(cfg, "run", "k"), cfg_int(cfg, "run", "m"));

  const std::string format_name = cfg_string(cfg, "run", "report_format");
  ReportFormat format;
  if (format_name == "csv") format = ReportFormat::kCsv;
  else if (format_name == "json") format = ReportFormat::kJson;
  else throw ConfigError("run.report_format: expected csv or json");
  fs::path path = artifact_path(cfg, "report");
  path += format_name == "csv" ? ".csv" : ".json";
  emit_report(report, format, path.string(), cfg, cfg_seed(cfg));
  std::cout << "report=" << path.string() << '\n';
  for (const auto& row : report.rows)
    std::cout << row.algo << ' ' << row.criterion << ' '
              << format_double(row.estimate) << " +- "
              << format_double(row.ci_halfwidth) << '\n';
  return 0;
}

int cmd_verify(const nlohmann::json& cfg) {
  const std::uint64_t seed = cfg_seed(cfg);
  std::vector<selfcheck::CheckResult> checks = selfcheck::run_risk_checks(seed);
  const auto gradient_checks = selfcheck::run_gradient_checks(seed);
  checks.insert(checks.end(), gradient_checks.begin(), gradient_checks.end());
  bool all_passed = true;
  for (const auto& check : checks) {
    std::cout << (check.passed ? "PASS " : "FAIL ") << check.name << ": "
              << check.detail << '\n';
    all_passed = all_passed && check.passed;
  }
  return all_passed ? 0 : 3;
}

}  // namespace

int run_command(const std::string& command, const nlohmann::json& resolved) {
  if (command == "train-expert") return cmd_train_expert(resolved);
  if (command == "gen-dataset") return cmd_gen_dataset(resolved);
  if (command == "fit-noise") return cmd_fit_noise(resolved);
  if (command == "train") return cmd_train(resolved);
  if (command == "evaluate") return cmd_evaluate(resolved);
  if (command == "report") return cmd_report(resolved);
  if (command == "verify") return cmd_verify(resolved);
  throw ConfigError("unknown command: " + command);
}

}  // namespace riskimit
