#include <doctest.h>

#include <cmath>
#include <vector>

#include "riskimit/selfcheck.hpp"
#include "riskimit/surrogate.hpp"

using namespace riskimit;

namespace {

Trajectory make_traj(std::vector<std::vector<double>> states,
                     std::vector<int> actions, double gamma) {
  Trajectory t;
  t.states = std::move(states);
  t.actions = std::move(actions);
  t.costs.assign(t.actions.size(), 0.0);
  t.gamma = gamma;
  return t;
}

std::vector<Trajectory> random_batch(RngStream& rng, int obs_dim,
                                     int action_count, int count, int steps,
                                     double gamma) {
  std::vector<Trajectory> out;
  for (int i = 0; i < count; ++i) {
    std::vector<std::vector<double>> states(steps + 1);
    for (auto& s : states) {
      s.resize(obs_dim);
      for (double& v : s) v = rng.uniform(-1.0, 1.0);
    }
    std::vector<int> actions(steps);
    for (int& a : actions) a = rng.uniform_int(action_count);
    out.push_back(make_traj(std::move(states), std::move(actions), gamma));
  }
  return out;
}

Mlp js_disc(int in, std::uint64_t seed) {
  RngStream rng(seed);
  return Mlp::random_init({in, 6, 1},
                          {Activation::kTanh, Activation::kSigmoid}, rng);
}

Mlp w_disc(const Mlp& like) {
  Mlp net(like.layer_sizes(), {Activation::kTanh, Activation::kIdentity});
  net.set_params(like.params());
  return net;
}

}  // namespace

TEST_CASE("zero discriminator scores every step at one half") {
  Mlp disc({4, 3, 1}, {Activation::kTanh, Activation::kSigmoid});
  // all-zero params: logits vanish, f = 0.5 everywhere
  const double gamma = 0.9;
  const auto trajs = std::vector<Trajectory>{
      make_traj({{0.1, 0.2}, {0.3, 0.4}, {0.5, 0.6}, {0.7, 0.8}}, {0, 1, 0},
                gamma)};
  const auto s = surrogate_losses(disc, trajs, DiscriminatorHead::kJs);
  const double series = 1.0 + gamma + gamma * gamma;
  CHECK(s.f1[0] == doctest::Approx(std::log(0.5) * series).epsilon(1e-14));
  CHECK(s.f2[0] == doctest::Approx(std::log(0.5) * series).epsilon(1e-14));
  CHECK(s.f1[0] < 0.0);
  CHECK(s.f2[0] < 0.0);
}

TEST_CASE("gamma zero keeps only the first step") {
  const Mlp disc = js_disc(5, 41);
  const auto trajs = std::vector<Trajectory>{make_traj(
      {{0.1, -0.2, 0.4}, {1.0, 1.0, 1.0}, {-1.0, 0.0, 2.0}}, {1, 0}, 0.0)};
  const auto s = surrogate_losses(disc, trajs, DiscriminatorHead::kJs);
  const std::vector<double> input{0.1, -0.2, 0.4, 0.0, 1.0};
  const double f = disc.forward(input)[0];
  CHECK(s.f1[0] == doctest::Approx(std::log(f)).epsilon(1e-14));
  CHECK(s.f2[0] == doctest::Approx(std::log1p(-f)).epsilon(1e-14));
}

TEST_CASE("per-trajectory loss gradients match finite differences") {
  RngStream rng(7);
  const auto trajs = random_batch(rng, 3, 2, 1, 3, 0.95);
  const Mlp disc = js_disc(5, 42);
  const Mlp critic = w_disc(disc);
  const auto js = surrogate_losses(disc, trajs, DiscriminatorHead::kJs);
  const auto w = surrogate_losses(critic, trajs, DiscriminatorHead::kWasserstein);

  auto check = [&](const Mlp& net, DiscriminatorHead head, int field,
                   std::span<const double> grad) {
    auto f = [&](std::span<const double> theta) {
      Mlp probe = net;
      probe.set_params(theta);
      const auto s = surrogate_losses(probe, trajs, head);
      return field == 0 ? s.f1[0] : field == 1 ? s.f2[0] : s.cf[0];
    };
    const auto fd = selfcheck::central_difference(f, net.params(), 1e-6);
    for (std::size_t i = 0; i < fd.size(); ++i)
      CHECK(grad[i] == doctest::Approx(fd[i]).epsilon(1e-6).scale(1.0));
  };
  check(disc, DiscriminatorHead::kJs, 0, js.f1_grad[0]);
  check(disc, DiscriminatorHead::kJs, 1, js.f2_grad[0]);
  check(critic, DiscriminatorHead::kWasserstein, 2, w.cf_grad[0]);
}

TEST_CASE("saturated sigmoid clamps the value and zeroes the gradient") {
  Mlp disc({3, 1}, {Activation::kSigmoid});
  disc.set_params(std::vector<double>{0.0, 0.0, 0.0, 50.0});  // logit 50
  const auto trajs =
      std::vector<Trajectory>{make_traj({{0.0, 0.0}, {0.0, 0.0}}, {0}, 0.9)};
  const auto s = surrogate_losses(disc, trajs, DiscriminatorHead::kJs);
  CHECK(s.f2[0] == doctest::Approx(std::log(1e-7)).epsilon(1e-9));
  CHECK(s.f1[0] == doctest::Approx(std::log1p(-1e-7)).epsilon(1e-9));
  for (double g : s.f1_grad[0]) CHECK(g == 0.0);
  for (double g : s.f2_grad[0]) CHECK(g == 0.0);
}

TEST_CASE("lambda zero collapses both variants to the plain saddle gradient") {
  RngStream rng(11);
  const auto agent = random_batch(rng, 2, 2, 7, 3, 0.9);
  const auto expert = random_batch(rng, 2, 2, 5, 3, 0.9);
  const Mlp disc = js_disc(4, 43);
  const auto sa = surrogate_losses(disc, agent, DiscriminatorHead::kJs);
  const auto se = surrogate_losses(disc, expert, DiscriminatorHead::kJs);

  RiskConfig risk;
  risk.alpha = 0.3;
  risk.lambda = 0.0;
  const auto grad = discriminator_gradient_js(sa, se, risk,
                                              ExpertWeighting::kRiskProfile);
  const auto rail =
      discriminator_gradient_js(sa, se, risk, ExpertWeighting::kMeanOnly);

  std::vector<double> plain(grad.ascent.size(), 0.0);
  for (std::size_t j = 0; j < sa.f1.size(); ++j)
    for (std::size_t i = 0; i < plain.size(); ++i)
      plain[i] += sa.f1_grad[j][i] / static_cast<double>(sa.f1.size());
  for (std::size_t j = 0; j < se.f2.size(); ++j)
    for (std::size_t i = 0; i < plain.size(); ++i)
      plain[i] += se.f2_grad[j][i] / static_cast<double>(se.f2.size());

  for (std::size_t i = 0; i < plain.size(); ++i) {
    // The two weightings share the exact arithmetic at lambda = 0.
    CHECK(grad.ascent[i] == rail.ascent[i]);
    CHECK(grad.ascent[i] == doctest::Approx(plain[i]).epsilon(1e-12).scale(1e-14));
  }
}

TEST_CASE("alpha one weights every trajectory uniformly by 1+lambda") {
  RngStream rng(13);
  const auto agent = random_batch(rng, 2, 2, 6, 2, 0.9);
  const auto expert = random_batch(rng, 2, 2, 4, 2, 0.9);
  const Mlp disc = js_disc(4, 44);
  const auto sa = surrogate_losses(disc, agent, DiscriminatorHead::kJs);
  const auto se = surrogate_losses(disc, expert, DiscriminatorHead::kJs);

  RiskConfig risk;
  risk.alpha = 1.0;
  risk.lambda = 0.7;
  const auto grad = discriminator_gradient_js(sa, se, risk,
                                              ExpertWeighting::kRiskProfile);
  std::vector<double> uniform(grad.ascent.size(), 0.0);
  for (std::size_t j = 0; j < sa.f1.size(); ++j)
    for (std::size_t i = 0; i < uniform.size(); ++i)
      uniform[i] += 1.7 * sa.f1_grad[j][i] / static_cast<double>(sa.f1.size());
  for (std::size_t j = 0; j < se.f2.size(); ++j)
    for (std::size_t i = 0; i < uniform.size(); ++i)
      uniform[i] += 1.7 * se.f2_grad[j][i] / static_cast<double>(se.f2.size());
  for (std::size_t i = 0; i < uniform.size(); ++i)
    CHECK(grad.ascent[i] == doctest::Approx(uniform[i]).epsilon(1e-13));
}

TEST_CASE("constant expert batch makes the risk profile match the mean term") {
  RngStream rng(17);
  const auto agent = random_batch(rng, 2, 2, 6, 2, 0.9);
  // identical copies: every expert F2 coincides, so CVaR of -F2 is a mean
  const auto one = random_batch(rng, 2, 2, 1, 3, 0.9);
  const std::vector<Trajectory> expert(5, one[0]);
  const Mlp disc = js_disc(4, 45);
  const auto sa = surrogate_losses(disc, agent, DiscriminatorHead::kJs);
  const auto se = surrogate_losses(disc, expert, DiscriminatorHead::kJs);

  RiskConfig risk;
  risk.alpha = 0.3;
  risk.lambda = 1.2;
  const auto profile = discriminator_gradient_js(sa, se, risk,
                                                 ExpertWeighting::kRiskProfile);
  const auto mean_only =
      discriminator_gradient_js(sa, se, risk, ExpertWeighting::kMeanOnly);
  for (std::size_t i = 0; i < profile.ascent.size(); ++i)
    CHECK(profile.ascent[i] ==
          doctest::Approx(mean_only.ascent[i]).epsilon(1e-12).scale(1.0));
  CHECK(profile.objective ==
        doctest::Approx(mean_only.objective).epsilon(1e-12));
}

TEST_CASE("js gradient matches directional finite differences of the blend") {
  RngStream rng(19);
  const auto agent = random_batch(rng, 3, 2, 9, 3, 0.9);
  const auto expert = random_batch(rng, 3, 2, 7, 3, 0.9);
  const Mlp disc = js_disc(5, 46);

  RiskConfig risk;
  risk.alpha = 0.3;
  for (const double lambda : {0.0, 0.5, 2.0}) {
    risk.lambda = lambda;
    for (const auto weighting :
         {ExpertWeighting::kRiskProfile, ExpertWeighting::kMeanOnly}) {
      const auto sa = surrogate_losses(disc, agent, DiscriminatorHead::kJs);
      const auto se = surrogate_losses(disc, expert, DiscriminatorHead::kJs);
      const auto grad = discriminator_gradient_js(sa, se, risk, weighting);

      auto objective = [&](std::span<const double> theta) {
        Mlp probe = disc;
        probe.set_params(theta);
        const auto a = surrogate_losses(probe, agent, DiscriminatorHead::kJs);
        const auto e = surrogate_losses(probe, expert, DiscriminatorHead::kJs);
        const LossBatch f1{std::vector<double>(a.f1)};
        double value = f1.mean() + risk.lambda * cvar(f1, risk.alpha);
        const LossBatch f2{std::vector<double>(e.f2)};
        if (weighting == ExpertWeighting::kMeanOnly) {
          value += (1.0 + risk.lambda) * f2.mean();
        } else {
          std::vector<double> neg(e.f2.size());
          for (std::size_t j = 0; j < neg.size(); ++j) neg[j] = -e.f2[j];
          value += f2.mean() -
                   risk.lambda * cvar(LossBatch{std::move(neg)}, risk.alpha);
        }
        return value;
      };
      CHECK(grad.objective ==
            doctest::Approx(objective(disc.params())).epsilon(1e-12));

      for (int rep = 0; rep < 20; ++rep) {
        std::vector<double> dir(grad.ascent.size());
        for (double& v : dir) v = rng.normal();
        double analytic = 0.0;
        for (std::size_t i = 0; i < dir.size(); ++i)
          analytic += grad.ascent[i] * dir[i];
        const double fd = selfcheck::directional_difference(
            objective, disc.params(), dir, 1e-6);
        CHECK(analytic == doctest::Approx(fd).epsilon(1e-4).scale(1e-8));
      }
    }
  }
}

TEST_CASE("wasserstein gradient matches finite differences and cancels") {
  RngStream rng(23);
  const auto agent = random_batch(rng, 2, 3, 8, 3, 0.9);
  const auto expert = random_batch(rng, 2, 3, 6, 3, 0.9);
  Mlp critic = w_disc(js_disc(5, 47));

  RiskConfig risk;
  risk.alpha = 0.25;
  for (const double lambda : {0.0, 0.5, 2.0}) {
    risk.lambda = lambda;
    const auto sa = surrogate_losses(critic, agent, DiscriminatorHead::kWasserstein);
    const auto se = surrogate_losses(critic, expert, DiscriminatorHead::kWasserstein);
    const auto grad = discriminator_gradient_w(sa, se, risk);

    auto objective = [&](std::span<const double> theta) {
      Mlp probe = critic;
      probe.set_params(theta);
      const auto a = surrogate_losses(probe, agent, DiscriminatorHead::kWasserstein);
      const auto e = surrogate_losses(probe, expert, DiscriminatorHead::kWasserstein);
      const LossBatch ba{std::vector<double>(a.cf)};
      const LossBatch be{std::vector<double>(e.cf)};
      return ba.mean() + risk.lambda * cvar(ba, risk.alpha) - be.mean() -
             risk.lambda * cvar(be, risk.alpha);
    };
    for (int rep = 0; rep < 20; ++rep) {
      std::vector<double> dir(grad.ascent.size());
      for (double& v : dir) v = rng.normal();
      double analytic = 0.0;
      for (std::size_t i = 0; i < dir.size(); ++i)
        analytic += grad.ascent[i] * dir[i];
      const double fd = selfcheck::directional_difference(
          objective, critic.params(), dir, 1e-6);
      CHECK(analytic == doctest::Approx(fd).epsilon(1e-4).scale(1e-8));
    }

    const auto self = discriminator_gradient_w(sa, sa, risk);
    for (double g : self.ascent)
      CHECK(g == doctest::Approx(0.0).scale(1.0).epsilon(1e-13));
    CHECK(self.objective == 0.0);
  }
}

TEST_CASE("short batches raise the small-batch flag") {
  RngStream rng(29);
  const Mlp disc = js_disc(4, 48);
  RiskConfig risk;
  risk.alpha = 0.3;  // tail needs ceil(1/0.3) = 4 samples
  const auto four = random_batch(rng, 2, 2, 4, 2, 0.9);
  const auto three = random_batch(rng, 2, 2, 3, 2, 0.9);
  const auto s4 = surrogate_losses(disc, four, DiscriminatorHead::kJs);
  const auto s3 = surrogate_losses(disc, three, DiscriminatorHead::kJs);
  CHECK_FALSE(discriminator_gradient_js(s4, s4, risk,
                                        ExpertWeighting::kRiskProfile)
                  .small_batch);
  CHECK(discriminator_gradient_js(s3, s4, risk, ExpertWeighting::kRiskProfile)
            .small_batch);
  CHECK(discriminator_gradient_js(s4, s3, risk, ExpertWeighting::kRiskProfile)
            .small_batch);
}

TEST_CASE("surrogate scoring rejects malformed inputs") {
  const Mlp disc = js_disc(4, 49);
  RngStream rng(31);
  const auto trajs = random_batch(rng, 2, 2, 2, 2, 0.9);
  CHECK_THROWS_AS(surrogate_losses(disc, trajs, DiscriminatorHead::kWasserstein),
                  std::invalid_argument);
  CHECK_THROWS_AS(
      surrogate_losses(disc, std::vector<Trajectory>{}, DiscriminatorHead::kJs),
      std::invalid_argument);
  const auto wide = random_batch(rng, 5, 2, 1, 2, 0.9);
  CHECK_THROWS_AS(surrogate_losses(disc, wide, DiscriminatorHead::kJs),
                  std::invalid_argument);
  auto bad_action = trajs;
  bad_action[0].actions[0] = 7;
  CHECK_THROWS_AS(surrogate_losses(disc, bad_action, DiscriminatorHead::kJs),
                  std::invalid_argument);
}

TEST_CASE("gradient self-check battery passes") {
  for (const auto& r : selfcheck::run_gradient_checks(314, 25)) {
    INFO(r.name, ": ", r.detail);
    CHECK(r.passed);
  }
}
