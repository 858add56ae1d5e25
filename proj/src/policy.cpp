#include "riskimit/policy.hpp"

#include <cmath>
#include <stdexcept>

namespace riskimit {

CategoricalPolicy::CategoricalPolicy(Mlp net) : net_(std::move(net)) {
  if (net_.activations().back() != Activation::kSoftmax)
    throw std::invalid_argument("CategoricalPolicy: net must end in softmax");
}

CategoricalPolicy CategoricalPolicy::random_init(int observation_dim,
                                                 int action_count,
                                                 const std::vector<int>& hidden,
                                                 RngStream& rng) {
  std::vector<int> sizes{observation_dim};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(action_count);
  std::vector<Activation> acts(hidden.size(), Activation::kTanh);
  acts.push_back(Activation::kSoftmax);
  return CategoricalPolicy(Mlp::random_init(std::move(sizes), std::move(acts), rng));
}

double CategoricalPolicy::log_prob(std::span<const double> obs,
                                   int action) const {
  if (action < 0 || action >= action_count())
    throw std::invalid_argument("log_prob: action out of range");
  const auto probs = net_.forward(obs);
  // Softmax output is strictly positive for finite logits; the floor only
  // guards against denormal underflow.
  return std::log(std::max(probs[static_cast<std::size_t>(action)], 1e-300));
}

std::vector<double> CategoricalPolicy::log_prob_gradient(
    std::span<const double> obs, int action) const {
  if (action < 0 || action >= action_count())
    throw std::invalid_argument("log_prob_gradient: action out of range");
  std::vector<double> cotangent = net_.forward(obs);
  for (double& p : cotangent) p = -p;
  cotangent[static_cast<std::size_t>(action)] += 1.0;
  return net_.backward_logits(obs, cotangent);
}

std::vector<double> CategoricalPolicy::trajectory_score(
    const Trajectory& traj) const {
  std::vector<double> score(static_cast<std::size_t>(net_.param_count()), 0.0);
  for (int t = 0; t < traj.step_count(); ++t) {
    const auto g = log_prob_gradient(traj.states[static_cast<std::size_t>(t)],
                                     traj.actions[static_cast<std::size_t>(t)]);
    for (std::size_t i = 0; i < score.size(); ++i) score[i] += g[i];
  }
  return score;
}

PolicyFn CategoricalPolicy::as_fn() const {
  // Copies the net: the closure must stay valid after the policy steps.
  return [net = net_](std::span<const double> obs) { return net.forward(obs); };
}

}  // namespace riskimit
