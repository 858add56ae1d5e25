#include "riskimit/risk.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace riskimit {

namespace {
// Slack for comparing accumulated probability weights against targets; the
// weights themselves are validated to sum to 1 within 1e-12.
constexpr double kWeightSlack = 1e-12;
}  // namespace

void RiskConfig::validate() const {
  if (!(alpha > 0.0 && alpha <= 1.0))
    throw std::invalid_argument("RiskConfig: alpha must lie in (0, 1]");
  if (!(lambda >= 0.0))
    throw std::invalid_argument("RiskConfig: lambda must be >= 0");
  if (!(gamma >= 0.0 && gamma < 1.0))
    throw std::invalid_argument("RiskConfig: gamma must lie in [0, 1)");
}

LossBatch::LossBatch(std::vector<double> losses) : losses_(std::move(losses)) {
  if (losses_.empty()) throw std::invalid_argument("LossBatch: empty");
  for (double l : losses_)
    if (!std::isfinite(l))
      throw std::invalid_argument("LossBatch: non-finite loss");
  weights_.assign(losses_.size(), 1.0 / static_cast<double>(losses_.size()));
}

LossBatch::LossBatch(std::vector<double> losses, std::vector<double> weights)
    : losses_(std::move(losses)), weights_(std::move(weights)) {
  if (losses_.empty()) throw std::invalid_argument("LossBatch: empty");
  if (weights_.size() != losses_.size())
    throw std::invalid_argument("LossBatch: weights size mismatch");
  double total = 0.0;
  for (std::size_t i = 0; i < losses_.size(); ++i) {
    if (!std::isfinite(losses_[i]))
      throw std::invalid_argument("LossBatch: non-finite loss");
    if (!(weights_[i] >= 0.0))
      throw std::invalid_argument("LossBatch: negative weight");
    total += weights_[i];
  }
  if (std::abs(total - 1.0) > kWeightSlack)
    throw std::invalid_argument("LossBatch: weights must sum to 1 (got " +
                                std::to_string(total) + ")");
}

LossBatch LossBatch::from_trajectories(std::span<const Trajectory> trajs) {
  std::vector<double> losses;
  losses.reserve(trajs.size());
  for (const auto& t : trajs) losses.push_back(t.discounted_loss());
  return LossBatch(std::move(losses));
}

double LossBatch::mean() const {
  double m = 0.0;
  for (std::size_t i = 0; i < losses_.size(); ++i)
    m += weights_[i] * losses_[i];
  return m;
}

namespace {

std::vector<std::size_t> ascending_order(const std::vector<double>& values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  return order;
}

void check_alpha(double alpha) {
  if (!(alpha > 0.0 && alpha <= 1.0))
    throw std::invalid_argument("alpha must lie in (0, 1]");
}

}  // namespace

double value_at_risk(const LossBatch& batch, double alpha) {
  check_alpha(alpha);
  const auto order = ascending_order(batch.losses());
  const double target = 1.0 - alpha;
  double cum = 0.0;
  for (std::size_t idx : order) {
    cum += batch.weights()[idx];
    if (cum >= target - kWeightSlack) return batch.losses()[idx];
  }
  return batch.losses()[order.back()];  // unreachable for valid weights
}

double cvar(const LossBatch& batch, double alpha) {
  check_alpha(alpha);
  const double nu = value_at_risk(batch, alpha);
  double excess = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const double gap = batch.losses()[i] - nu;
    if (gap > 0.0) excess += batch.weights()[i] * gap;
  }
  return nu + excess / alpha;
}

void RiskEnvelopeDensity::validate(double alpha) const {
  check_alpha(alpha);
  if (zeta.size() != weights.size())
    throw std::invalid_argument("RiskEnvelopeDensity: size mismatch");
  const double cap = 1.0 / alpha;
  double total = 0.0;
  for (std::size_t i = 0; i < zeta.size(); ++i) {
    if (!(zeta[i] >= 0.0 && zeta[i] <= cap + 1e-9))
      throw std::invalid_argument("RiskEnvelopeDensity: zeta outside [0, 1/alpha]");
    total += zeta[i] * weights[i];
  }
  if (std::abs(total - 1.0) > 1e-9)
    throw std::invalid_argument("RiskEnvelopeDensity: E[zeta] != 1");
}

DualResult cvar_dual(const LossBatch& batch, double alpha) {
  check_alpha(alpha);
  const auto order = ascending_order(batch.losses());
  DualResult result;
  result.density.zeta.assign(batch.size(), 0.0);
  result.density.weights = batch.weights();
  // Walk losses in descending order, spending the tail budget alpha. Atoms
  // tied at the value the budget runs out on share the remainder in
  // proportion to their weights, so equal losses always get equal zeta (a
  // constant batch comes back as zeta = 1 everywhere).
  double budget = alpha;
  for (auto it = order.rbegin(); it != order.rend() && budget > 0.0;) {
    auto group_end = it;
    double group_w = 0.0;
    while (group_end != order.rend() &&
           batch.losses()[*group_end] == batch.losses()[*it]) {
      group_w += batch.weights()[*group_end];
      ++group_end;
    }
    if (group_w > 0.0) {
      const double fill = std::min(1.0, budget / group_w);
      for (auto g = it; g != group_end; ++g)
        result.density.zeta[*g] = fill / alpha;
      budget -= fill * group_w;
    }
    it = group_end;
  }
  double value = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i)
    value +=
        batch.weights()[i] * result.density.zeta[i] * batch.losses()[i];
  result.value = value;
  result.density.validate(alpha);
  return result;
}

double mean_cvar(const LossBatch& batch, const RiskConfig& cfg) {
  cfg.validate();
  return (batch.mean() + cfg.lambda * cvar(batch, cfg.alpha)) /
         (1.0 + cfg.lambda);
}

double scaled_mean_cvar(const LossBatch& batch, const RiskConfig& cfg) {
  cfg.validate();
  return batch.mean() + cfg.lambda * cvar(batch, cfg.alpha);
}

double DistortedOccupancy::total_mass() const {
  return std::accumulate(measure.begin(), measure.end(), 0.0);
}

DistortedOccupancy distorted_occupancy(const TabularMdp& mdp,
                                       const PolicyFn& policy,
                                       const RiskConfig& cfg) {
  cfg.validate();
  const auto outcomes = enumerate_trajectories(mdp, policy);
  std::vector<double> losses, probs;
  losses.reserve(outcomes.size());
  probs.reserve(outcomes.size());
  for (const auto& wt : outcomes) {
    losses.push_back(wt.trajectory.discounted_loss());
    probs.push_back(wt.probability);
  }
  const LossBatch batch(losses, probs);
  const DualResult dual = cvar_dual(batch, cfg.alpha);

  DistortedOccupancy occ;
  occ.state_count = mdp.state_count;
  occ.action_count = mdp.action_count;
  occ.measure.assign(
      static_cast<std::size_t>(mdp.state_count) * mdp.action_count, 0.0);
  occ.xi.resize(outcomes.size());
  for (std::size_t j = 0; j < outcomes.size(); ++j) {
    const double xi =
        (1.0 + cfg.lambda * dual.density.zeta[j]) / (1.0 + cfg.lambda);
    occ.xi[j] = xi;
    const double mass = probs[j] * xi;
    const auto& wt = outcomes[j];
    double scale = 1.0;
    for (int t = 0; t < wt.trajectory.step_count(); ++t) {
      const int s = wt.state_indices[static_cast<std::size_t>(t)];
      const int a = wt.trajectory.actions[static_cast<std::size_t>(t)];
      occ.measure[static_cast<std::size_t>(s) * mdp.action_count + a] +=
          mass * scale;
      occ.expected_cost +=
          mass * scale * wt.trajectory.costs[static_cast<std::size_t>(t)];
      scale *= mdp.gamma;
    }
  }
  return occ;
}

}  // namespace riskimit
