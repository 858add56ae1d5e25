#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "riskimit/mlp.hpp"
#include "riskimit/rng.hpp"
#include "riskimit/risk.hpp"
#include "riskimit/selfcheck.hpp"
#include "riskimit/surrogate.hpp"

namespace riskimit::selfcheck {
namespace {

struct WorstError {
  double value = 0.0;
  void fold(double analytic, double fd) {
    const double denom = std::max({std::abs(analytic), std::abs(fd), 1e-8});
    value = std::max(value, std::abs(analytic - fd) / denom);
  }
};

Trajectory random_trajectory(RngStream& rng, int obs_dim, int action_count,
                             int steps, double gamma) {
  Trajectory t;
  t.gamma = gamma;
  t.states.resize(static_cast<std::size_t>(steps) + 1);
  for (auto& s : t.states) {
    s.resize(static_cast<std::size_t>(obs_dim));
    for (double& v : s) v = rng.uniform(-1.0, 1.0);
  }
  t.actions.resize(static_cast<std::size_t>(steps));
  for (int& a : t.actions) a = rng.uniform_int(action_count);
  t.costs.assign(static_cast<std::size_t>(steps), 0.0);
  return t;
}

std::vector<Trajectory> random_batch(RngStream& rng, int obs_dim,
                                     int action_count, int count) {
  std::vector<Trajectory> batch;
  batch.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i)
    batch.push_back(random_trajectory(rng, obs_dim, action_count,
                                      2 + rng.uniform_int(3), 0.9));
  return batch;
}

// The tail weights are only a gradient where the batch order is locally
// stable, so fixtures with near-equal losses are discarded upstream.
bool well_separated(const std::vector<double>& values) {
  std::vector<double> sorted = values;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i + 1 < sorted.size(); ++i)
    if (sorted[i + 1] - sorted[i] <
        1e-7 * std::max(1.0, std::abs(sorted[i])))
      return false;
  return true;
}

std::vector<double> random_direction(RngStream& rng, std::size_t n) {
  std::vector<double> d(n);
  double norm = 0.0;
  for (double& v : d) {
    v = rng.normal();
    norm += v * v;
  }
  norm = std::sqrt(norm);
  for (double& v : d) v /= norm;
  return d;
}

double js_objective(const Mlp& disc, const std::vector<Trajectory>& agent,
                    const std::vector<Trajectory>& expert,
                    const RiskConfig& risk) {
  const auto a = surrogate_losses(disc, agent, DiscriminatorHead::kJs);
  const auto e = surrogate_losses(disc, expert, DiscriminatorHead::kJs);
  std::vector<double> neg(e.f2.size());
  for (std::size_t j = 0; j < neg.size(); ++j) neg[j] = -e.f2[j];
  const LossBatch a1{std::vector<double>(a.f1)};
  return a1.mean() + risk.lambda * cvar(a1, risk.alpha) +
         LossBatch{std::vector<double>(e.f2)}.mean() -
         risk.lambda * cvar(LossBatch{std::move(neg)}, risk.alpha);
}

double w_objective(const Mlp& disc, const std::vector<Trajectory>& agent,
                   const std::vector<Trajectory>& expert,
                   const RiskConfig& risk) {
  const auto a = surrogate_losses(disc, agent, DiscriminatorHead::kWasserstein);
  const auto e = surrogate_losses(disc, expert, DiscriminatorHead::kWasserstein);
  const LossBatch ba{std::vector<double>(a.cf)};
  const LossBatch be{std::vector<double>(e.cf)};
  return ba.mean() + risk.lambda * cvar(ba, risk.alpha) - be.mean() -
         risk.lambda * cvar(be, risk.alpha);
}

}  // namespace

std::vector<CheckResult> run_gradient_checks(std::uint64_t seed,
                                             int fixtures) {
  RngStream master(seed);
  WorstError backward_err, js_err, w_err;
  const double lambdas[] = {0.0, 0.5, 2.0};
  const double alphas[] = {0.2, 0.3, 0.45};
  int built = 0;

  for (int i = 0; built < fixtures && i < fixtures * 4; ++i) {
    RngStream rng = master.substream(static_cast<std::uint64_t>(i));

    // Plain net pullback against coordinate-wise differences.
    {
      Mlp net = Mlp::random_init(
          {3, 5, 2}, {Activation::kTanh, Activation::kSigmoid}, rng);
      std::vector<double> x{rng.uniform(-1, 1), rng.uniform(-1, 1),
                            rng.uniform(-1, 1)};
      std::vector<double> cot{rng.uniform(-1, 1), rng.uniform(-1, 1)};
      const auto grad = net.backward(x, cot);
      auto f = [&](std::span<const double> theta) {
        Mlp probe = net;
        probe.set_params(theta);
        const auto y = probe.forward(x);
        return cot[0] * y[0] + cot[1] * y[1];
      };
      const auto fd = central_difference(f, net.params(), 1e-6);
      for (std::size_t k = 0; k < fd.size(); ++k)
        backward_err.fold(grad[k], fd[k]);
    }

    const int obs_dim = 2 + rng.uniform_int(2);
    const int action_count = 2 + rng.uniform_int(2);
    const int in = obs_dim + action_count;
    Mlp js_net = Mlp::random_init(
        {in, 4 + rng.uniform_int(4), 1},
        {Activation::kTanh, Activation::kSigmoid}, rng);
    Mlp w_net(js_net.layer_sizes(),
              {Activation::kTanh, Activation::kIdentity});
    w_net.set_params(js_net.params());

    const auto agent = random_batch(rng, obs_dim, action_count,
                                    6 + rng.uniform_int(6));
    const auto expert = random_batch(rng, obs_dim, action_count,
                                     6 + rng.uniform_int(6));

    const auto js_agent = surrogate_losses(js_net, agent, DiscriminatorHead::kJs);
    const auto js_expert =
        surrogate_losses(js_net, expert, DiscriminatorHead::kJs);
    const auto w_agent =
        surrogate_losses(w_net, agent, DiscriminatorHead::kWasserstein);
    const auto w_expert =
        surrogate_losses(w_net, expert, DiscriminatorHead::kWasserstein);
    std::vector<double> neg_f2(js_expert.f2.size());
    for (std::size_t j = 0; j < neg_f2.size(); ++j) neg_f2[j] = -js_expert.f2[j];
    if (!well_separated(js_agent.f1) || !well_separated(neg_f2) ||
        !well_separated(w_agent.cf) || !well_separated(w_expert.cf))
      continue;
    ++built;

    RiskConfig risk;
    risk.alpha = alphas[rng.uniform_int(3)];
    for (const double lambda : lambdas) {
      risk.lambda = lambda;
      const auto gj = discriminator_gradient_js(js_agent, js_expert, risk,
                                                ExpertWeighting::kRiskProfile);
      const auto gw = discriminator_gradient_w(w_agent, w_expert, risk);
      for (int rep = 0; rep < 3; ++rep) {
        const auto dir = random_direction(rng, gj.ascent.size());
        double analytic = 0.0;
        for (std::size_t k = 0; k < dir.size(); ++k)
          analytic += gj.ascent[k] * dir[k];
        auto fj = [&](std::span<const double> theta) {
          Mlp probe = js_net;
          probe.set_params(theta);
          return js_objective(probe, agent, expert, risk);
        };
        js_err.fold(analytic,
                    directional_difference(fj, js_net.params(), dir, 1e-6));

        analytic = 0.0;
        for (std::size_t k = 0; k < dir.size(); ++k)
          analytic += gw.ascent[k] * dir[k];
        auto fw = [&](std::span<const double> theta) {
          Mlp probe = w_net;
          probe.set_params(theta);
          return w_objective(probe, agent, expert, risk);
        };
        w_err.fold(analytic,
                   directional_difference(fw, w_net.params(), dir, 1e-6));
      }
    }
  }

  auto result = [&](const char* name, const WorstError& err, bool complete) {
    CheckResult r;
    r.name = name;
    r.passed = complete && err.value <= 1e-4;
    r.detail = "max relative error " + std::to_string(err.value) +
               (complete ? "" : " (fixture generation starved)");
    return r;
  };
  const bool complete = built >= fixtures;
  return {result("mlp_backward_vs_fd", backward_err, true),
          result("discriminator_js_vs_fd", js_err, complete),
          result("discriminator_w_vs_fd", w_err, complete)};
}

}  // namespace riskimit::selfcheck
