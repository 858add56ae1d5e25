#pragma once

#include <functional>
#include <span>
#include <vector>

#include "riskimit/policy.hpp"
#include "riskimit/trajectory.hpp"

namespace riskimit {

struct PolicyGradientTerm {
  std::vector<double> gradient;
  bool degenerate_tail = false;  // every excess (loss - nu)+ was zero
};

// Likelihood-ratio gradient of the batch CVaR of per-trajectory losses:
// (1/(alpha*N)) sum_j (loss_j - nu_hat)+ * score_j, with nu_hat the batch
// value-at-risk. scores[j] must be the parameter gradient of
// log pi(trajectory_j), i.e. the per-step log-prob gradients summed.
PolicyGradientTerm cvar_policy_gradient(
    std::span<const std::vector<double>> scores, std::span<const double> losses,
    double alpha);

// REINFORCE gradient of the batch mean loss: (1/N) sum_j loss_j * score_j.
// With `center` the batch mean is subtracted from every loss first, which
// leaves the expectation unchanged and cuts variance.
std::vector<double> mean_policy_gradient(
    std::span<const std::vector<double>> scores, std::span<const double> losses,
    bool center);

// Discounted causal entropy of the policy on sampled trajectories:
// mean over the batch of sum_t gamma^t * (-log pi(a_t|s_t)).
double empirical_entropy(const CategoricalPolicy& policy,
                         std::span<const Trajectory> trajs);

// Score-function estimator of the entropy gradient. Each step's log-prob
// gradient is paired with the discounted tail sum of -log pi from that step
// on; earlier steps drop out of the pairing because their scores are
// conditionally mean-zero.
std::vector<double> entropy_gradient(const CategoricalPolicy& policy,
                                     std::span<const Trajectory> trajs);

struct KlStepConfig {
  double max_kl = 0.01;
  int cg_iterations = 10;
  double backtrack_factor = 0.5;
  int max_backtracks = 10;
  double damping = 0.1;
  // Fisher estimation caps the state sample; states are taken evenly spaced
  // across the batch so the subset is deterministic.
  std::size_t fisher_max_states = 1024;

  void validate() const;
};

using FisherVectorProduct =
    std::function<std::vector<double>(std::span<const double>)>;

// Conjugate-gradient solve of fisher_vp(d) = gradient, started from zero.
// fisher_vp must be the complete (already damped) operator. Returns the
// iterate after cg_iterations or earlier on a tiny residual; no finiteness
// guarantees, callers check.
std::vector<double> natural_gradient_direction(const FisherVectorProduct& fvp,
                                               std::span<const double> gradient,
                                               const KlStepConfig& cfg);

struct KlStepResult {
  CategoricalPolicy policy;
  bool accepted = false;      // false means the input policy came back
  double kl = 0.0;            // measured KL(old || new) of the accepted step
  bool cg_fallback = false;   // conjugate gradient went non-finite
  int backtracks = 0;
};

// One trust-region policy improvement step minimizing a surrogate objective.
// descent_gradient is d objective / d theta; traj_objectives are per-
// trajectory objective samples (weights frozen) whose importance-reweighted
// mean must improve for a step to be accepted, alongside the sampled-state
// KL staying at or under max_kl. Backtracks geometrically and returns the
// input policy unchanged if every scale fails.
KlStepResult kl_constrained_step(const CategoricalPolicy& policy,
                                 std::span<const double> descent_gradient,
                                 std::span<const Trajectory> trajs,
                                 std::span<const double> traj_objectives,
                                 const KlStepConfig& cfg);

// Mean KL(old || new) over every state visited in the batch.
double mean_state_kl(const CategoricalPolicy& old_policy,
                     const CategoricalPolicy& new_policy,
                     std::span<const Trajectory> trajs);

}  // namespace riskimit
