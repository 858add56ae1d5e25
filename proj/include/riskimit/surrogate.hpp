#pragma once

#include <span>
#include <vector>

#include "riskimit/mlp.hpp"
#include "riskimit/risk.hpp"
#include "riskimit/trajectory.hpp"

namespace riskimit {

// Which functional of the discriminator a batch is scored with. The js head
// reads a sigmoid output f in (0,1) and works in log space; the wasserstein
// head reads a raw (identity) output and sums it directly.
enum class DiscriminatorHead { kJs, kWasserstein };

// Per-trajectory discounted discriminator losses plus their parameter
// gradients. For the js head `f1[j]` is sum_t gamma^t log f(s_t,a_t) and
// `f2[j]` is sum_t gamma^t log(1-f); for the wasserstein head `cf[j]` is
// sum_t gamma^t f. Only the fields belonging to the requested head are
// populated; the others stay empty.
struct SurrogateLosses {
  std::vector<double> f1;
  std::vector<double> f2;
  std::vector<double> cf;
  std::vector<std::vector<double>> f1_grad;
  std::vector<std::vector<double>> f2_grad;
  std::vector<std::vector<double>> cf_grad;

  std::size_t size() const;
};

// Scores every trajectory with the discriminator. The discriminator input is
// the state concatenated with a one-hot action, so disc.input_dim() must be
// state_dim + action_count and the output must be a single sigmoid (js) or
// identity (wasserstein) unit. Sigmoid outputs are clamped to
// [1e-7, 1-1e-7] before the log; a clamped step contributes its clamped
// value but a zero gradient (the clamp is flat there).
SurrogateLosses surrogate_losses(const Mlp& disc,
                                 std::span<const Trajectory> trajs,
                                 DiscriminatorHead head);

// How the expert batch enters the discriminator objective. kRiskProfile
// applies the same tail reweighting as the agent side; kMeanOnly keeps a
// plain (1+lambda)-scaled mean, which drops the expert's tail emphasis.
enum class ExpertWeighting { kRiskProfile, kMeanOnly };

struct DiscriminatorGradient {
  std::vector<double> ascent;  // d objective / d w; feed to an ascending step
  double objective = 0.0;      // the blended value the gradient differentiates
  bool small_batch = false;    // a batch was shorter than ceil(1/alpha)
};

// Gradient of
//   mean(F1) + lambda*cvar_alpha(F1) + mean(F2) - lambda*cvar_alpha(-F2)
// with respect to the discriminator parameters, where F1 scores the agent
// batch and F2 the expert batch. Tail terms differentiate through the dual
// density of the empirical CVaR (1/alpha on samples strictly above the
// quantile, a fractional weight on the quantile atom), which is exactly the
// gradient of the batch functional wherever losses are tie-free. kMeanOnly
// replaces the expert term by (1+lambda)*mean(F2).
DiscriminatorGradient discriminator_gradient_js(const SurrogateLosses& agent,
                                                const SurrogateLosses& expert,
                                                const RiskConfig& risk,
                                                ExpertWeighting weighting);

// Wasserstein counterpart: gradient of
//   [mean + lambda*cvar_alpha](Cf_agent) - [mean + lambda*cvar_alpha](Cf_expert)
// using the same dual-density tail weights on both batches. The caller is
// responsible for clipping the critic weights after stepping.
DiscriminatorGradient discriminator_gradient_w(const SurrogateLosses& agent,
                                               const SurrogateLosses& expert,
                                               const RiskConfig& risk);

}  // namespace riskimit
