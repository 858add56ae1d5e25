#include "riskimit/train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace riskimit {
namespace {

void axpy(double a, std::span<const double> x, std::vector<double>& y) {
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += a * x[i];
}

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(),
                     [](double x) { return std::isfinite(x); });
}

// Init streams sit far above any plausible iteration index so adding
// iterations never reuses their randomness.
constexpr std::uint64_t kPolicyInitStream = 0xFFFFFFFF00000001ull;
constexpr std::uint64_t kDiscInitStream = 0xFFFFFFFF00000002ull;

std::vector<Activation> hidden_then(const std::vector<int>& hidden,
                                    Activation head) {
  std::vector<Activation> acts(hidden.size(), Activation::kTanh);
  acts.push_back(head);
  return acts;
}

std::vector<int> layer_plan(int in, const std::vector<int>& hidden, int out) {
  std::vector<int> sizes{in};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(out);
  return sizes;
}

// Quantile code sorts these, so screen out NaN before it gets there.
bool scores_finite(const SurrogateLosses& s, DiscriminatorHead head) {
  if (head == DiscriminatorHead::kWasserstein) return all_finite(s.cf);
  return all_finite(s.f1) && all_finite(s.f2);
}

}  // namespace

std::string variant_name(ImitationVariant v) {
  switch (v) {
    case ImitationVariant::kGail: return "gail";
    case ImitationVariant::kRail: return "rail";
    case ImitationVariant::kJsRsGail: return "js-rs-gail";
    case ImitationVariant::kWRsGail: return "w-rs-gail";
  }
  throw std::logic_error("unreachable");
}

ImitationVariant variant_from_name(const std::string& name) {
  if (name == "gail") return ImitationVariant::kGail;
  if (name == "rail") return ImitationVariant::kRail;
  if (name == "js-rs-gail") return ImitationVariant::kJsRsGail;
  if (name == "w-rs-gail") return ImitationVariant::kWRsGail;
  throw std::invalid_argument("unknown algo: " + name);
}

std::string optimizer_name(PolicyOptimizer o) {
  return o == PolicyOptimizer::kReinforceAdam ? "reinforce_adam"
                                              : "kl_constrained";
}

PolicyOptimizer optimizer_from_name(const std::string& name) {
  if (name == "reinforce_adam") return PolicyOptimizer::kReinforceAdam;
  if (name == "kl_constrained") return PolicyOptimizer::kKlConstrained;
  throw std::invalid_argument("unknown optimizer: " + name);
}

void ImitationAlgo::validate() const {
  risk.validate();
  kl.validate();
  if (!(entropy_weight >= 0.0))
    throw std::invalid_argument("entropy_weight must be >= 0");
  if (generator_steps < 1 || discriminator_steps < 1)
    throw std::invalid_argument("step counts must be positive");
  if (pretrain_iters < 0)
    throw std::invalid_argument("pretrain_iters must be >= 0");
  if (agent_trajectories < 1)
    throw std::invalid_argument("agent_trajectories must be positive");
  if (!(clip_bound > 0.0))
    throw std::invalid_argument("clip_bound must be positive");
  if (threads < 1) throw std::invalid_argument("threads must be positive");
  for (int h : policy_hidden)
    if (h < 1) throw std::invalid_argument("policy_hidden sizes must be positive");
  for (int h : discriminator_hidden)
    if (h < 1)
      throw std::invalid_argument("discriminator_hidden sizes must be positive");
}

ImitationAlgo default_algo(ImitationVariant variant) {
  ImitationAlgo algo;
  algo.variant = variant;
  if (variant == ImitationVariant::kGail) algo.generator_steps = 3;
  return algo;
}

nlohmann::json IterationRecord::to_json() const {
  return {{"iter", iter},
          {"mean", mean},
          {"var_alpha", var_alpha},
          {"cvar_alpha", cvar_alpha},
          {"rho_lambda", rho_lambda},
          {"disc_objective", disc_objective},
          {"kl", kl},
          {"entropy", entropy}};
}

IterationRecord IterationRecord::from_json(const nlohmann::json& j) {
  if (!j.is_object() || j.size() != 8)
    throw std::runtime_error("training log record: unexpected schema");
  IterationRecord r;
  r.iter = j.at("iter").get<int>();
  r.mean = j.at("mean").get<double>();
  r.var_alpha = j.at("var_alpha").get<double>();
  r.cvar_alpha = j.at("cvar_alpha").get<double>();
  r.rho_lambda = j.at("rho_lambda").get<double>();
  r.disc_objective = j.at("disc_objective").get<double>();
  r.kl = j.at("kl").get<double>();
  r.entropy = j.at("entropy").get<double>();
  return r;
}

TrainResult train_imitation(const ImitationAlgo& algo, const Environment& env,
                            std::span<const Trajectory> expert_data,
                            int iterations, std::uint64_t seed,
                            const IterationObserver& observer) {
  algo.validate();
  if (expert_data.empty())
    throw std::invalid_argument("expert dataset is empty");
  if (iterations < 0) throw std::invalid_argument("iterations must be >= 0");
  const EnvSpec& spec = env.spec();
  const bool wasserstein = algo.variant == ImitationVariant::kWRsGail;
  const DiscriminatorHead head =
      wasserstein ? DiscriminatorHead::kWasserstein : DiscriminatorHead::kJs;

  RngStream run(seed);
  RngStream policy_init = run.substream(kPolicyInitStream);
  RngStream disc_init = run.substream(kDiscInitStream);
  CategoricalPolicy policy = CategoricalPolicy::random_init(
      spec.observation_dim, spec.action_count, algo.policy_hidden, policy_init);
  Mlp disc = Mlp::random_init(
      layer_plan(spec.observation_dim + spec.action_count,
                 algo.discriminator_hidden, 1),
      hidden_then(algo.discriminator_hidden,
                  wasserstein ? Activation::kIdentity : Activation::kSigmoid),
      disc_init);
  if (wasserstein) disc = clip_weights(disc, algo.clip_bound);

  TrainResult result{std::move(policy), std::move(disc), {}, false, {}, {}};
  auto warn = [&](const std::string& msg) {
    if (std::find(result.warnings.begin(), result.warnings.end(), msg) ==
        result.warnings.end())
      result.warnings.push_back(msg);
  };
  auto diverge = [&](int iter, const std::string& what) {
    result.diverged = true;
    result.divergence_detail =
        "iteration " + std::to_string(iter) + ": " + what;
  };

  const auto min_tail =
      static_cast<std::size_t>(std::ceil(1.0 / algo.risk.alpha - 1e-12));
  if (static_cast<std::size_t>(algo.agent_trajectories) < min_tail)
    warn("agent batch holds less than one alpha-tail sample");
  if (expert_data.size() < min_tail)
    warn("expert dataset holds less than one alpha-tail sample");

  AdamState disc_adam(result.discriminator.param_count(),
                      algo.discriminator_adam);
  AdamState policy_adam(result.policy.net().param_count(), algo.policy_adam);

  for (int it = 0; it < iterations && !result.diverged; ++it) {
    RngStream iter_stream = run.substream(static_cast<std::uint64_t>(it));
    const bool pretrain = it < algo.pretrain_iters;
    const double lambda_eff =
        (pretrain || algo.variant == ImitationVariant::kGail)
            ? 0.0
            : algo.risk.lambda;
    const ExpertWeighting weighting =
        (!pretrain && algo.variant == ImitationVariant::kJsRsGail)
            ? ExpertWeighting::kRiskProfile
            : ExpertWeighting::kMeanOnly;
    RiskConfig risk_eff = algo.risk;
    risk_eff.lambda = lambda_eff;

    auto sample = [&](std::uint64_t j) {
      return sample_batch(env, result.policy.as_fn(), algo.agent_trajectories,
                          spec.horizon, iter_stream.substream(j), 0,
                          algo.threads);
    };
    const std::vector<Trajectory> batch0 = sample(0);

    IterationRecord rec;
    rec.iter = it + 1;
    {
      // LossBatch rejects non-finite losses outright; divergence must be a
      // reported outcome here, so screen first.
      if (std::any_of(batch0.begin(), batch0.end(), [](const Trajectory& t) {
            return !std::isfinite(t.discounted_loss());
          })) {
        diverge(rec.iter, "non-finite rollout costs");
        break;
      }
      const LossBatch true_costs = LossBatch::from_trajectories(batch0);
      rec.mean = true_costs.mean();
      rec.var_alpha = value_at_risk(true_costs, algo.risk.alpha);
      rec.cvar_alpha = cvar(true_costs, algo.risk.alpha);
      rec.rho_lambda = mean_cvar(true_costs, algo.risk);
      rec.entropy = empirical_entropy(result.policy, batch0);
    }
    if (!std::isfinite(rec.entropy)) {
      diverge(rec.iter, "non-finite rollout statistics");
      break;
    }

    for (int dstep = 0; dstep < algo.discriminator_steps; ++dstep) {
      const auto agent_s = surrogate_losses(result.discriminator, batch0, head);
      const auto expert_s =
          surrogate_losses(result.discriminator, expert_data, head);
      if (!scores_finite(agent_s, head) || !scores_finite(expert_s, head)) {
        diverge(rec.iter, "non-finite discriminator scores");
        break;
      }
      const DiscriminatorGradient g =
          wasserstein
              ? discriminator_gradient_w(agent_s, expert_s, risk_eff)
              : discriminator_gradient_js(agent_s, expert_s, risk_eff,
                                          weighting);
      if (g.small_batch) warn("discriminator tail estimated from a thin batch");
      rec.disc_objective = g.objective;
      if (!std::isfinite(g.objective) || !all_finite(g.ascent)) {
        diverge(rec.iter, "non-finite discriminator objective or gradient");
        break;
      }
      auto params = disc_adam.update(result.discriminator.params(), g.ascent,
                                     StepDirection::kAscend);
      result.discriminator.set_params(params);
      if (wasserstein)
        result.discriminator =
            clip_weights(result.discriminator, algo.clip_bound);
    }
    if (result.diverged) break;

    const CategoricalPolicy before = result.policy;
    for (int gstep = 0; gstep < algo.generator_steps && !result.diverged;
         ++gstep) {
      const std::vector<Trajectory> batch =
          gstep == 0 ? batch0 : sample(static_cast<std::uint64_t>(gstep));
      const auto scored = surrogate_losses(result.discriminator, batch, head);
      if (!scores_finite(scored, head)) {
        diverge(rec.iter, "non-finite discriminator scores");
        break;
      }
      const std::vector<double>& losses = wasserstein ? scored.cf : scored.f1;
      std::vector<std::vector<double>> scores(batch.size());
      for (std::size_t j = 0; j < batch.size(); ++j)
        scores[j] = result.policy.trajectory_score(batch[j]);

      std::vector<double> grad =
          mean_policy_gradient(scores, losses, algo.mean_baseline);
      if (lambda_eff > 0.0)
        axpy(lambda_eff,
             cvar_policy_gradient(scores, losses, algo.risk.alpha).gradient,
             grad);
      if (algo.entropy_weight > 0.0)
        axpy(-algo.entropy_weight, entropy_gradient(result.policy, batch),
             grad);
      if (!all_finite(grad)) {
        diverge(rec.iter, "non-finite policy gradient");
        break;
      }

      if (algo.policy_optimizer == PolicyOptimizer::kReinforceAdam) {
        auto params = policy_adam.update(result.policy.net().params(), grad,
                                         StepDirection::kDescend);
        result.policy.set_params(params);
      } else {
        // Frozen per-trajectory samples of the surrogate objective for the
        // line search: tail weight times loss, minus the entropy bonus.
        std::vector<double> zeta;
        if (lambda_eff > 0.0)
          zeta = cvar_dual(LossBatch{std::vector<double>(losses)},
                           algo.risk.alpha)
                     .density.zeta;
        std::vector<double> objectives(batch.size());
        for (std::size_t j = 0; j < batch.size(); ++j) {
          objectives[j] =
              (1.0 + (zeta.empty() ? 0.0 : lambda_eff * zeta[j])) * losses[j];
          if (algo.entropy_weight > 0.0) {
            const std::span<const Trajectory> one(&batch[j], 1);
            objectives[j] -=
                algo.entropy_weight * empirical_entropy(result.policy, one);
          }
        }
        const KlStepResult step = kl_constrained_step(
            result.policy, grad, batch, objectives, algo.kl);
        if (step.cg_fallback) warn("conjugate gradient fell back to the plain gradient");
        result.policy = step.policy;
      }
      if (!all_finite(result.policy.net().params())) {
        diverge(rec.iter, "non-finite policy parameters");
        break;
      }
    }
    if (result.diverged) break;

    rec.kl = mean_state_kl(before, result.policy, batch0);
    result.log.push_back(rec);
    if (observer) observer(rec, result.policy, result.discriminator);
  }
  return result;
}

void write_training_log(const std::string& path,
                        std::span<const IterationRecord> log,
                        const nlohmann::json& config, std::uint64_t seed) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write training log: " + path);
  out << nlohmann::json{{"format_version", 1},
                        {"config", config},
                        {"seed", seed}}
             .dump()
      << '\n';
  for (const auto& rec : log) out << rec.to_json().dump() << '\n';
  if (!out) throw std::runtime_error("short write on training log: " + path);
}

TrainingLogFile read_training_log(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read training log: " + path);
  std::string line;
  if (!std::getline(in, line))
    throw std::runtime_error("training log is empty: " + path);
  const auto header = nlohmann::json::parse(line);
  if (header.at("format_version").get<int>() != 1)
    throw std::runtime_error("training log format version mismatch: " + path);
  TrainingLogFile file;
  file.config = header.at("config");
  file.seed = header.at("seed").get<std::uint64_t>();
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    file.records.push_back(
        IterationRecord::from_json(nlohmann::json::parse(line)));
  }
  return file;
}

}  // namespace riskimit
