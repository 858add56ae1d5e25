#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "riskimit/environments.hpp"
#include "riskimit/mlp.hpp"
#include "riskimit/policy.hpp"
#include "riskimit/policy_gradient.hpp"
#include "riskimit/risk.hpp"
#include "riskimit/surrogate.hpp"

namespace riskimit {

// kGail: risk-neutral baseline (identical arithmetic to kJsRsGail at
// lambda=0). kRail: agent-side tail weighting only, expert term stays a
// plain mean. kJsRsGail: tail weighting on both sides. kWRsGail: the
// clipped-critic variant scoring raw discounted sums.
enum class ImitationVariant { kGail, kRail, kJsRsGail, kWRsGail };

enum class PolicyOptimizer { kReinforceAdam, kKlConstrained };

std::string variant_name(ImitationVariant v);
ImitationVariant variant_from_name(const std::string& name);
std::string optimizer_name(PolicyOptimizer o);
PolicyOptimizer optimizer_from_name(const std::string& name);

struct ImitationAlgo {
  ImitationVariant variant = ImitationVariant::kJsRsGail;
  RiskConfig risk;
  double entropy_weight = 1e-3;
  PolicyOptimizer policy_optimizer = PolicyOptimizer::kReinforceAdam;
  int generator_steps = 1;
  int discriminator_steps = 1;
  int pretrain_iters = 0;   // leading iterations run with lambda forced to 0
  int agent_trajectories = 100;
  double clip_bound = 0.05;  // wasserstein critic box
  bool mean_baseline = true;
  std::vector<int> policy_hidden{32};
  std::vector<int> discriminator_hidden{32};
  AdamConfig policy_adam;
  AdamConfig discriminator_adam;
  KlStepConfig kl;
  int threads = 1;

  void validate() const;
};

// Step-ratio defaults per variant: the risk-neutral baseline takes three
// generator steps per discriminator step, the risk-sensitive variants one.
ImitationAlgo default_algo(ImitationVariant variant);

// One training-log line. Serialized with exactly these keys:
// iter, mean, var_alpha, cvar_alpha, rho_lambda, disc_objective, kl, entropy.
// The risk statistics are of the true environment cost on the iteration's
// agent batch; disc_objective is the discriminator blend before its last
// update; kl measures the policy movement over the iteration's generator
// steps; entropy is the sampling policy's own empirical causal entropy.
struct IterationRecord {
  int iter = 0;
  double mean = 0.0;
  double var_alpha = 0.0;
  double cvar_alpha = 0.0;
  double rho_lambda = 0.0;
  double disc_objective = 0.0;
  double kl = 0.0;
  double entropy = 0.0;

  nlohmann::json to_json() const;
  static IterationRecord from_json(const nlohmann::json& j);
};

// Called after each completed iteration with the post-update nets. Used by
// tests to watch invariants (critic box, parameter drift) without widening
// the log schema.
using IterationObserver = std::function<void(
    const IterationRecord&, const CategoricalPolicy&, const Mlp&)>;

struct TrainResult {
  CategoricalPolicy policy;
  Mlp discriminator;
  std::vector<IterationRecord> log;
  bool diverged = false;
  std::string divergence_detail;
  std::vector<std::string> warnings;  // deduplicated, e.g. thin tail batches
};

// Alternating adversarial loop. Per iteration: sample agent_trajectories
// rollouts, take discriminator_steps ascent steps on the blend objective
// (re-scoring the fixed expert set each time, since the discriminator
// moved), then generator_steps policy steps, resampling fresh rollouts for
// each policy step after the first. All randomness derives from
// substreams of `seed`: substream(iter) owns an iteration, its substream(j)
// the j-th batch, so logs are byte-stable for any thread count. The policy
// and discriminator initializations draw from the reserved substreams
// 0xFFFFFFFF00000001 and 0xFFFFFFFF00000002, out of reach of any iteration
// index. Non-finite losses or parameters stop the run with diverged set and
// a partial log.
TrainResult train_imitation(const ImitationAlgo& algo, const Environment& env,
                            std::span<const Trajectory> expert_data,
                            int iterations, std::uint64_t seed,
                            const IterationObserver& observer = {});

// Training-log file: one JSON header line {format_version, config, seed},
// then one line per IterationRecord. No timestamps; reruns are
// byte-identical.
void write_training_log(const std::string& path,
                        std::span<const IterationRecord> log,
                        const nlohmann::json& config, std::uint64_t seed);

struct TrainingLogFile {
  nlohmann::json config;
  std::uint64_t seed = 0;
  std::vector<IterationRecord> records;
};

TrainingLogFile read_training_log(const std::string& path);

}  // namespace riskimit
