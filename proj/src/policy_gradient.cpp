#include "riskimit/policy_gradient.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "riskimit/risk.hpp"

namespace riskimit {
namespace {

void axpy(double a, std::span<const double> x, std::vector<double>& y) {
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += a * x[i];
}

double dot(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(),
                     [](double x) { return std::isfinite(x); });
}

void check_batch(std::span<const std::vector<double>> scores,
                 std::span<const double> losses) {
  if (scores.empty() || scores.size() != losses.size())
    throw std::invalid_argument("scores and losses must pair up nonempty");
}

double trajectory_log_prob(const CategoricalPolicy& policy,
                           const Trajectory& traj) {
  double acc = 0.0;
  for (std::size_t t = 0; t < traj.actions.size(); ++t)
    acc += policy.log_prob(traj.states[t], traj.actions[t]);
  return acc;
}

// Evenly spaced indices so the Fisher subsample is independent of batch
// iteration order details and needs no extra randomness.
std::vector<std::size_t> spread_indices(std::size_t n, std::size_t cap) {
  std::vector<std::size_t> idx;
  if (n <= cap) {
    idx.resize(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    return idx;
  }
  idx.resize(cap);
  for (std::size_t i = 0; i < cap; ++i) idx[i] = i * n / cap;
  return idx;
}

}  // namespace

PolicyGradientTerm cvar_policy_gradient(
    std::span<const std::vector<double>> scores, std::span<const double> losses,
    double alpha) {
  check_batch(scores, losses);
  const double nu =
      value_at_risk(LossBatch(std::vector<double>(losses.begin(), losses.end())),
                    alpha);
  const double n = static_cast<double>(losses.size());
  PolicyGradientTerm out;
  out.gradient.assign(scores[0].size(), 0.0);
  double excess_total = 0.0;
  for (std::size_t j = 0; j < losses.size(); ++j) {
    const double excess = std::max(0.0, losses[j] - nu);
    excess_total += excess;
    if (excess > 0.0) axpy(excess / (alpha * n), scores[j], out.gradient);
  }
  out.degenerate_tail = excess_total == 0.0;
  return out;
}

std::vector<double> mean_policy_gradient(
    std::span<const std::vector<double>> scores, std::span<const double> losses,
    bool center) {
  check_batch(scores, losses);
  const double n = static_cast<double>(losses.size());
  double baseline = 0.0;
  if (center) {
    for (double l : losses) baseline += l;
    baseline /= n;
  }
  std::vector<double> grad(scores[0].size(), 0.0);
  for (std::size_t j = 0; j < losses.size(); ++j)
    axpy((losses[j] - baseline) / n, scores[j], grad);
  return grad;
}

double empirical_entropy(const CategoricalPolicy& policy,
                         std::span<const Trajectory> trajs) {
  if (trajs.empty()) throw std::invalid_argument("empty trajectory batch");
  double total = 0.0;
  for (const Trajectory& traj : trajs) {
    double discount = 1.0;
    for (std::size_t t = 0; t < traj.actions.size(); ++t) {
      total -= discount * policy.log_prob(traj.states[t], traj.actions[t]);
      discount *= traj.gamma;
    }
  }
  return total / static_cast<double>(trajs.size());
}

std::vector<double> entropy_gradient(const CategoricalPolicy& policy,
                                     std::span<const Trajectory> trajs) {
  if (trajs.empty()) throw std::invalid_argument("empty trajectory batch");
  std::vector<double> grad(
      static_cast<std::size_t>(policy.net().param_count()), 0.0);
  for (const Trajectory& traj : trajs) {
    const std::size_t steps = traj.actions.size();
    std::vector<double> neg_log(steps);
    for (std::size_t t = 0; t < steps; ++t)
      neg_log[t] = -policy.log_prob(traj.states[t], traj.actions[t]);

    // q[t] = sum_{k>=t} gamma^k * (-log pi_k); the discount stays anchored
    // at step zero so q[0] is the trajectory's entropy sample.
    std::vector<double> disc(steps);
    double d = 1.0;
    for (std::size_t t = 0; t < steps; ++t) {
      disc[t] = d;
      d *= traj.gamma;
    }
    std::vector<double> q(steps + 1, 0.0);
    for (std::size_t t = steps; t-- > 0;) q[t] = q[t + 1] + disc[t] * neg_log[t];
    for (std::size_t t = 0; t < steps; ++t)
      axpy(q[t], policy.log_prob_gradient(traj.states[t], traj.actions[t]),
           grad);
  }
  for (double& g : grad) g /= static_cast<double>(trajs.size());
  return grad;
}

void KlStepConfig::validate() const {
  if (!(max_kl > 0.0)) throw std::invalid_argument("max_kl must be positive");
  if (cg_iterations < 1)
    throw std::invalid_argument("cg_iterations must be at least 1");
  if (!(backtrack_factor > 0.0 && backtrack_factor < 1.0))
    throw std::invalid_argument("backtrack_factor must lie in (0,1)");
  if (max_backtracks < 0)
    throw std::invalid_argument("max_backtracks must be nonnegative");
  if (!(damping >= 0.0)) throw std::invalid_argument("damping must be >= 0");
  if (fisher_max_states < 1)
    throw std::invalid_argument("fisher_max_states must be at least 1");
}

std::vector<double> natural_gradient_direction(const FisherVectorProduct& fvp,
                                               std::span<const double> gradient,
                                               const KlStepConfig& cfg) {
  cfg.validate();
  std::vector<double> x(gradient.size(), 0.0);
  std::vector<double> r(gradient.begin(), gradient.end());
  std::vector<double> p = r;
  double rs = dot(r, r);
  for (int it = 0; it < cfg.cg_iterations && rs > 1e-24; ++it) {
    const std::vector<double> ap = fvp(p);
    const double pap = dot(p, ap);
    if (!(pap > 0.0)) break;  // lost positive definiteness; keep the iterate
    const double step = rs / pap;
    for (std::size_t i = 0; i < x.size(); ++i) {
      x[i] += step * p[i];
      r[i] -= step * ap[i];
    }
    const double rs_next = dot(r, r);
    const double mix = rs_next / rs;
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = r[i] + mix * p[i];
    rs = rs_next;
  }
  return x;
}

double mean_state_kl(const CategoricalPolicy& old_policy,
                     const CategoricalPolicy& new_policy,
                     std::span<const Trajectory> trajs) {
  double total = 0.0;
  std::size_t states = 0;
  for (const Trajectory& traj : trajs) {
    for (std::size_t t = 0; t < traj.actions.size(); ++t) {
      const auto p = old_policy.action_probs(traj.states[t]);
      const auto q = new_policy.action_probs(traj.states[t]);
      for (std::size_t a = 0; a < p.size(); ++a)
        total += p[a] * (std::log(p[a]) - std::log(q[a]));
      ++states;
    }
  }
  if (states == 0) throw std::invalid_argument("no visited states");
  return total / static_cast<double>(states);
}

KlStepResult kl_constrained_step(const CategoricalPolicy& policy,
                                 std::span<const double> descent_gradient,
                                 std::span<const Trajectory> trajs,
                                 std::span<const double> traj_objectives,
                                 const KlStepConfig& cfg) {
  cfg.validate();
  if (trajs.size() != traj_objectives.size())
    throw std::invalid_argument("one objective sample per trajectory");
  if (trajs.empty()) throw std::invalid_argument("empty trajectory batch");

  KlStepResult result{.policy = policy};
  if (dot(descent_gradient, descent_gradient) == 0.0) {
    result.accepted = true;  // trust region trivially satisfied
    return result;
  }

  std::vector<const std::vector<double>*> visited;
  for (const Trajectory& traj : trajs)
    for (std::size_t t = 0; t < traj.actions.size(); ++t)
      visited.push_back(&traj.states[t]);
  const auto fisher_idx =
      spread_indices(visited.size(), cfg.fisher_max_states);

  const Mlp& net = policy.net();
  auto fvp = [&](std::span<const double> v) {
    std::vector<double> out(v.size(), 0.0);
    for (const std::size_t i : fisher_idx) {
      const auto& s = *visited[i];
      const auto dz = net.logits_jvp(s, v);
      const auto probs = policy.action_probs(s);
      double mean_dz = 0.0;
      for (std::size_t a = 0; a < probs.size(); ++a) mean_dz += probs[a] * dz[a];
      std::vector<double> u(dz.size());
      for (std::size_t a = 0; a < probs.size(); ++a)
        u[a] = probs[a] * (dz[a] - mean_dz);
      axpy(1.0, net.backward_logits(s, u), out);
    }
    const double count = static_cast<double>(fisher_idx.size());
    for (std::size_t i = 0; i < out.size(); ++i)
      out[i] = out[i] / count + cfg.damping * v[i];
    return out;
  };

  std::vector<double> direction =
      natural_gradient_direction(fvp, descent_gradient, cfg);
  if (!all_finite(direction)) {
    result.cg_fallback = true;
    direction.assign(descent_gradient.begin(), descent_gradient.end());
  }
  double dfd = dot(direction, fvp(direction));
  if (!std::isfinite(dfd) || dfd <= 0.0) {
    if (!result.cg_fallback) {
      result.cg_fallback = true;
      direction.assign(descent_gradient.begin(), descent_gradient.end());
      dfd = dot(direction, fvp(direction));
    }
    if (!std::isfinite(dfd) || dfd <= 0.0) return result;  // nothing usable
  }
  const double full_step = std::sqrt(2.0 * cfg.max_kl / dfd);

  double old_objective = 0.0;
  std::vector<double> old_logp(trajs.size());
  for (std::size_t j = 0; j < trajs.size(); ++j) {
    old_objective += traj_objectives[j];
    old_logp[j] = trajectory_log_prob(policy, trajs[j]);
  }
  old_objective /= static_cast<double>(trajs.size());

  double scale = full_step;
  for (int attempt = 0; attempt <= cfg.max_backtracks; ++attempt) {
    std::vector<double> params = net.params();
    for (std::size_t i = 0; i < params.size(); ++i)
      params[i] -= scale * direction[i];
    if (!all_finite(params)) {
      scale *= cfg.backtrack_factor;
      continue;
    }
    CategoricalPolicy candidate = policy;
    candidate.set_params(params);

    const double kl = mean_state_kl(policy, candidate, trajs);
    // Importance-reweighted objective under the candidate, with the
    // per-trajectory weights frozen at sampling time.
    double new_objective = 0.0;
    for (std::size_t j = 0; j < trajs.size(); ++j) {
      const double ratio =
          std::exp(trajectory_log_prob(candidate, trajs[j]) - old_logp[j]);
      new_objective += ratio * traj_objectives[j];
    }
    new_objective /= static_cast<double>(trajs.size());

    if (std::isfinite(kl) && kl <= cfg.max_kl &&
        std::isfinite(new_objective) && new_objective < old_objective) {
      result.policy = std::move(candidate);
      result.accepted = true;
      result.kl = kl;
      result.backtracks = attempt;
      return result;
    }
    scale *= cfg.backtrack_factor;
  }
  return result;  // every scale failed; caller keeps the old policy
}

}  // namespace riskimit
