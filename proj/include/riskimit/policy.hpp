#pragma once

#include <span>
#include <vector>

#include "riskimit/environments.hpp"
#include "riskimit/mlp.hpp"
#include "riskimit/trajectory.hpp"

namespace riskimit {

// Stochastic discrete policy: softmax-headed net mapping observations to
// action probabilities. Log-likelihood gradients go through the logits,
// where grad log pi(a|s) = backward_logits(s, e_a - pi(.|s)); this form is
// exact and stable even for near-zero probabilities.
class CategoricalPolicy {
 public:
  explicit CategoricalPolicy(Mlp net);  // requires softmax head

  static CategoricalPolicy random_init(int observation_dim, int action_count,
                                       const std::vector<int>& hidden,
                                       RngStream& rng);

  int action_count() const { return net_.output_dim(); }
  int observation_dim() const { return net_.input_dim(); }
  const Mlp& net() const { return net_; }
  void set_params(std::span<const double> params) { net_.set_params(params); }

  std::vector<double> action_probs(std::span<const double> obs) const {
    return net_.forward(obs);
  }
  double log_prob(std::span<const double> obs, int action) const;
  std::vector<double> log_prob_gradient(std::span<const double> obs,
                                        int action) const;

  // sum_t grad log pi(a_t | s_t): the score of the whole trajectory.
  std::vector<double> trajectory_score(const Trajectory& traj) const;

  // Adapter for rollout/enumeration call sites.
  PolicyFn as_fn() const;

 private:
  Mlp net_;
};

}  // namespace riskimit
