#include "riskimit/expert.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "riskimit/policy_gradient.hpp"

namespace riskimit {
namespace {

constexpr std::uint64_t kPolicyInitStream = 0xFFFFFFFF00000001ull;

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(),
                     [](double x) { return std::isfinite(x); });
}

}  // namespace

void ExpertTrainConfig::validate() const {
  risk.validate();
  if (batch_trajectories < 1)
    throw std::invalid_argument("batch_trajectories must be positive");
  if (threads < 1) throw std::invalid_argument("threads must be positive");
  for (int h : hidden)
    if (h < 1) throw std::invalid_argument("hidden sizes must be positive");
}

ExpertTrainResult train_cvar_expert(const ExpertTrainConfig& cfg,
                                    const Environment& env, int iterations,
                                    std::uint64_t seed) {
  cfg.validate();
  if (iterations < 0) throw std::invalid_argument("iterations must be >= 0");
  const EnvSpec& spec = env.spec();

  RngStream run(seed);
  RngStream init = run.substream(kPolicyInitStream);
  CategoricalPolicy policy = CategoricalPolicy::random_init(
      spec.observation_dim, spec.action_count, cfg.hidden, init);

  ExpertTrainResult result{policy, std::numeric_limits<double>::infinity(),
                           {},     false,
                           {}};
  AdamState adam(policy.net().param_count(), cfg.adam);

  for (int it = 0; it < iterations; ++it) {
    const auto batch =
        sample_batch(env, policy.as_fn(), cfg.batch_trajectories, spec.horizon,
                     run.substream(static_cast<std::uint64_t>(it)), 0,
                     cfg.threads);
    // LossBatch rejects non-finite losses outright; divergence must be a
    // reported outcome here, so screen first.
    if (std::any_of(batch.begin(), batch.end(), [](const Trajectory& t) {
          return !std::isfinite(t.discounted_loss());
        })) {
      result.diverged = true;
      result.divergence_detail =
          "iteration " + std::to_string(it + 1) + ": non-finite rollout costs";
      break;
    }
    const LossBatch costs = LossBatch::from_trajectories(batch);
    const double rho = mean_cvar(costs, cfg.risk);
    result.rho_curve.push_back(rho);
    if (rho < result.best_rho) {
      result.best_rho = rho;
      result.policy = policy;
    }

    std::vector<std::vector<double>> scores(batch.size());
    for (std::size_t j = 0; j < batch.size(); ++j)
      scores[j] = policy.trajectory_score(batch[j]);
    std::vector<double> grad =
        mean_policy_gradient(scores, costs.losses(), cfg.mean_baseline);
    if (cfg.risk.lambda > 0.0) {
      const auto tail =
          cvar_policy_gradient(scores, costs.losses(), cfg.risk.alpha);
      for (std::size_t i = 0; i < grad.size(); ++i)
        grad[i] += cfg.risk.lambda * tail.gradient[i];
    }
    if (!all_finite(grad)) {
      result.diverged = true;
      result.divergence_detail =
          "iteration " + std::to_string(it + 1) + ": non-finite gradient";
      break;
    }
    policy.set_params(
        adam.update(policy.net().params(), grad, StepDirection::kDescend));
    if (!all_finite(policy.net().params())) {
      result.diverged = true;
      result.divergence_detail = "iteration " + std::to_string(it + 1) +
                                 ": non-finite policy parameters";
      break;
    }
  }
  return result;
}

PolicyFn tabular_policy_fn(std::vector<int> actions, int action_count) {
  for (int a : actions)
    if (a < 0 || a >= action_count)
      throw std::invalid_argument("action table entry out of range");
  return [actions = std::move(actions),
          action_count](std::span<const double> obs) {
    const int s = TabularEnv::state_index(obs);
    if (s < 0 || static_cast<std::size_t>(s) >= actions.size())
      throw std::invalid_argument("observation outside the action table");
    return one_hot(actions[s], action_count);
  };
}

TabularExpert exact_tabular_expert(const TabularMdp& mdp,
                                   const RiskConfig& risk,
                                   std::size_t max_policies,
                                   std::size_t max_outcomes) {
  mdp.validate();
  risk.validate();
  double policy_count = 1.0;
  for (int s = 0; s < mdp.state_count; ++s) policy_count *= mdp.action_count;
  if (policy_count > static_cast<double>(max_policies))
    throw std::length_error("deterministic policy space exceeds the guard");

  TabularExpert best;
  best.rho = std::numeric_limits<double>::infinity();
  std::vector<int> actions(mdp.state_count, 0);
  const auto total = static_cast<std::size_t>(policy_count);
  for (std::size_t index = 0; index < total; ++index) {
    std::size_t rem = index;
    for (int s = 0; s < mdp.state_count; ++s) {
      actions[s] = static_cast<int>(rem % mdp.action_count);
      rem /= mdp.action_count;
    }
    const auto outcomes = enumerate_trajectories(
        mdp, tabular_policy_fn(actions, mdp.action_count), max_outcomes);
    std::vector<double> losses(outcomes.size());
    std::vector<double> probs(outcomes.size());
    for (std::size_t k = 0; k < outcomes.size(); ++k) {
      losses[k] = outcomes[k].trajectory.discounted_loss();
      probs[k] = outcomes[k].probability;
    }
    const double rho = mean_cvar(LossBatch(losses, probs), risk);
    if (rho < best.rho ||
        (rho == best.rho && (best.actions.empty() || actions < best.actions))) {
      best.rho = rho;
      best.actions = actions;
    }
  }
  return best;
}

std::vector<Trajectory> generate_expert_dataset(
    const CategoricalPolicy& policy, const Environment& env, int count,
    std::uint64_t seed, const std::string& path, int threads,
    const nlohmann::json& config) {
  if (count < 1) throw std::invalid_argument("dataset count must be positive");
  const EnvSpec& spec = env.spec();
  const auto trajectories = sample_batch(env, policy.as_fn(), count,
                                         spec.horizon, RngStream(seed), 0,
                                         threads);
  DatasetHeader header;
  header.env_name = spec.name;
  header.seed = seed;
  header.policy_checksum = params_checksum(policy.net());
  header.config = config.is_null() ? nlohmann::json{{"count", count},
                                                    {"horizon", spec.horizon},
                                                    {"gamma", spec.gamma}}
                                   : config;
  write_trajectory_dataset(path, header, trajectories);
  return trajectories;
}

}  // namespace riskimit
