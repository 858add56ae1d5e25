#include "riskimit/surrogate.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace riskimit {
namespace {

constexpr double kSigmoidFloor = 1e-7;
constexpr double kSigmoidCeil = 1.0 - 1e-7;

void check_head(const Mlp& disc, DiscriminatorHead head) {
  if (disc.output_dim() != 1)
    throw std::invalid_argument("discriminator must have one output unit");
  const Activation last = disc.activations().back();
  if (head == DiscriminatorHead::kJs && last != Activation::kSigmoid)
    throw std::invalid_argument("js head needs a sigmoid output");
  if (head == DiscriminatorHead::kWasserstein && last != Activation::kIdentity)
    throw std::invalid_argument("wasserstein head needs an identity output");
}

void axpy(double a, std::span<const double> x, std::vector<double>& y) {
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += a * x[i];
}

// Number of samples below which the alpha-tail holds less than one sample.
std::size_t min_tail_batch(double alpha) {
  return static_cast<std::size_t>(std::ceil(1.0 / alpha - 1e-12));
}

// Per-sample coefficients differentiating mean + lambda * cvar_alpha exactly:
// 1/N for the mean plus lambda times the dual tail density mass of sample j.
std::vector<double> blend_weights(const std::vector<double>& losses,
                                  const RiskConfig& risk) {
  const DualResult dual = cvar_dual(LossBatch(losses), risk.alpha);
  const double n = static_cast<double>(losses.size());
  std::vector<double> coeff(losses.size());
  for (std::size_t j = 0; j < losses.size(); ++j)
    coeff[j] = (1.0 + risk.lambda * dual.density.zeta[j]) / n;
  return coeff;
}

double blend_value(const std::vector<double>& losses, const RiskConfig& risk) {
  const LossBatch batch{std::vector<double>(losses)};
  return batch.mean() + risk.lambda * cvar(batch, risk.alpha);
}

}  // namespace

std::size_t SurrogateLosses::size() const {
  return std::max({f1.size(), f2.size(), cf.size()});
}

SurrogateLosses surrogate_losses(const Mlp& disc,
                                 std::span<const Trajectory> trajs,
                                 DiscriminatorHead head) {
  check_head(disc, head);
  if (trajs.empty()) throw std::invalid_argument("empty trajectory batch");

  const std::size_t obs_dim = trajs[0].states.at(0).size();
  const int action_count = disc.input_dim() - static_cast<int>(obs_dim);
  if (action_count <= 0)
    throw std::invalid_argument(
        "discriminator input narrower than the observation");

  const std::size_t p = static_cast<std::size_t>(disc.param_count());
  SurrogateLosses out;
  const bool js = head == DiscriminatorHead::kJs;
  out.f1.reserve(js ? trajs.size() : 0);

  std::vector<double> input(static_cast<std::size_t>(disc.input_dim()));
  for (const Trajectory& traj : trajs) {
    double f1 = 0.0, f2 = 0.0, cf = 0.0;
    std::vector<double> g1(js ? p : 0, 0.0), g2(js ? p : 0, 0.0);
    std::vector<double> gc(js ? 0 : p, 0.0);
    double discount = 1.0;
    for (std::size_t t = 0; t < traj.actions.size(); ++t) {
      const auto& s = traj.states[t];
      if (s.size() != obs_dim)
        throw std::invalid_argument("state width changed mid-trajectory");
      const int a = traj.actions[t];
      if (a < 0 || a >= action_count)
        throw std::invalid_argument("action outside the discriminator's range");
      std::copy(s.begin(), s.end(), input.begin());
      std::fill(input.begin() + obs_dim, input.end(), 0.0);
      input[obs_dim + static_cast<std::size_t>(a)] = 1.0;

      const double raw = disc.forward(input)[0];
      const std::vector<double> unit{1.0};
      if (js) {
        const double f = std::clamp(raw, kSigmoidFloor, kSigmoidCeil);
        f1 += discount * std::log(f);
        f2 += discount * std::log1p(-f);
        if (raw > kSigmoidFloor && raw < kSigmoidCeil) {
          // d log f / d logit = 1-f, d log(1-f) / d logit = -f.
          const auto gz = disc.backward_logits(input, unit);
          axpy(discount * (1.0 - f), gz, g1);
          axpy(discount * -f, gz, g2);
        }
      } else {
        cf += discount * raw;
        axpy(discount, disc.backward(input, unit), gc);
      }
      discount *= traj.gamma;
    }
    if (js) {
      out.f1.push_back(f1);
      out.f2.push_back(f2);
      out.f1_grad.push_back(std::move(g1));
      out.f2_grad.push_back(std::move(g2));
    } else {
      out.cf.push_back(cf);
      out.cf_grad.push_back(std::move(gc));
    }
  }
  return out;
}

DiscriminatorGradient discriminator_gradient_js(const SurrogateLosses& agent,
                                                const SurrogateLosses& expert,
                                                const RiskConfig& risk,
                                                ExpertWeighting weighting) {
  risk.validate();
  if (agent.f1.empty() || expert.f2.empty())
    throw std::invalid_argument("both batches must be scored with the js head");

  const std::size_t p = agent.f1_grad[0].size();
  DiscriminatorGradient out;
  out.ascent.assign(p, 0.0);
  out.small_batch = agent.f1.size() < min_tail_batch(risk.alpha) ||
                    expert.f2.size() < min_tail_batch(risk.alpha);

  const auto agent_coeff = blend_weights(agent.f1, risk);
  for (std::size_t j = 0; j < agent.f1.size(); ++j)
    axpy(agent_coeff[j], agent.f1_grad[j], out.ascent);
  out.objective = blend_value(agent.f1, risk);

  if (weighting == ExpertWeighting::kRiskProfile) {
    // The expert enters through -cvar(-F2), whose chain rule flips the dual
    // weights back to +1 on the F2 gradients.
    std::vector<double> neg(expert.f2.size());
    for (std::size_t j = 0; j < neg.size(); ++j) neg[j] = -expert.f2[j];
    const DualResult dual = cvar_dual(LossBatch(neg), risk.alpha);
    const double ne = static_cast<double>(expert.f2.size());
    for (std::size_t j = 0; j < expert.f2.size(); ++j)
      axpy((1.0 + risk.lambda * dual.density.zeta[j]) / ne, expert.f2_grad[j],
           out.ascent);
    out.objective += LossBatch(expert.f2).mean() - risk.lambda * dual.value;
  } else {
    const double w =
        (1.0 + risk.lambda) / static_cast<double>(expert.f2.size());
    for (std::size_t j = 0; j < expert.f2.size(); ++j)
      axpy(w, expert.f2_grad[j], out.ascent);
    out.objective += (1.0 + risk.lambda) * LossBatch(expert.f2).mean();
  }
  return out;
}

DiscriminatorGradient discriminator_gradient_w(const SurrogateLosses& agent,
                                               const SurrogateLosses& expert,
                                               const RiskConfig& risk) {
  risk.validate();
  if (agent.cf.empty() || expert.cf.empty())
    throw std::invalid_argument(
        "both batches must be scored with the wasserstein head");

  const std::size_t p = agent.cf_grad[0].size();
  DiscriminatorGradient out;
  out.ascent.assign(p, 0.0);
  out.small_batch = agent.cf.size() < min_tail_batch(risk.alpha) ||
                    expert.cf.size() < min_tail_batch(risk.alpha);

  const auto agent_coeff = blend_weights(agent.cf, risk);
  for (std::size_t j = 0; j < agent.cf.size(); ++j)
    axpy(agent_coeff[j], agent.cf_grad[j], out.ascent);
  const auto expert_coeff = blend_weights(expert.cf, risk);
  for (std::size_t j = 0; j < expert.cf.size(); ++j)
    axpy(-expert_coeff[j], expert.cf_grad[j], out.ascent);

  out.objective = blend_value(agent.cf, risk) - blend_value(expert.cf, risk);
  return out;
}

}  // namespace riskimit
