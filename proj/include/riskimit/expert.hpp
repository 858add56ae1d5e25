#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "riskimit/environments.hpp"
#include "riskimit/mlp.hpp"
#include "riskimit/policy.hpp"
#include "riskimit/risk.hpp"

namespace riskimit {

// Knobs for the CVaR-REINFORCE expert. The defaults are deliberate: 100
// rollouts per update keep the alpha tail populated down to alpha = 0.02,
// and the 1e-2 Adam step converges on the desk-scale fixtures within a few
// hundred iterations.
struct ExpertTrainConfig {
  RiskConfig risk;
  int batch_trajectories = 100;
  std::vector<int> hidden = {32};
  AdamConfig adam{0.01, 0.9, 0.999, 1e-8};
  bool mean_baseline = true;
  int threads = 1;

  void validate() const;
};

struct ExpertTrainResult {
  CategoricalPolicy policy;       // best checkpoint seen
  double best_rho = 0.0;          // its batch mean-CVaR estimate
  std::vector<double> rho_curve;  // batch estimate per iteration, pre-update
  bool diverged = false;
  std::string divergence_detail;
};

// REINFORCE on the true environment costs with objective
// mean + lambda * cvar_alpha. Every iteration scores the current policy on
// its own sampling batch and keeps the best checkpoint by that estimate, so
// a late divergence cannot wipe out a usable expert. Randomness mirrors the
// imitation loop: substream(iter) of `seed` drives iteration iter's batch,
// the reserved substream 0xFFFFFFFF00000001 the policy initialization.
ExpertTrainResult train_cvar_expert(const ExpertTrainConfig& cfg,
                                    const Environment& env, int iterations,
                                    std::uint64_t seed);

struct TabularExpert {
  std::vector<int> actions;  // one action per state
  double rho = 0.0;          // exact mean-CVaR of that policy
};

// Exhaustive search over stationary deterministic policies, each scored by
// exact enumeration of its outcome distribution. Ground truth for small
// fixtures. Throws std::length_error when action_count^state_count exceeds
// max_policies or an enumeration pass exceeds max_outcomes. Ties resolve to
// the lexicographically smallest action table.
TabularExpert exact_tabular_expert(const TabularMdp& mdp,
                                   const RiskConfig& risk,
                                   std::size_t max_policies = 1u << 20,
                                   std::size_t max_outcomes = 10'000'000);

// Deterministic action table as a PolicyFn over one-hot observations.
PolicyFn tabular_policy_fn(std::vector<int> actions, int action_count);

// count rollouts of `policy` written to `path` in the trajectory dataset
// format. The header records the environment name, the seed, and the policy
// parameter checksum so downstream runs can detect dataset drift; `config`
// replaces the default {count, horizon, gamma} summary when given (the CLI
// embeds its full resolved config). Returns the written trajectories.
std::vector<Trajectory> generate_expert_dataset(
    const CategoricalPolicy& policy, const Environment& env, int count,
    std::uint64_t seed, const std::string& path, int threads = 1,
    const nlohmann::json& config = nullptr);

}  // namespace riskimit
