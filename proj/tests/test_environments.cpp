#include <doctest.h>

#include <cmath>
#include <numbers>
#include <set>
#include <vector>

#include "riskimit/environments.hpp"
#include "riskimit/trajectory.hpp"

using namespace riskimit;

namespace {

PolicyFn constant_policy(std::vector<double> probs) {
  return [probs = std::move(probs)](std::span<const double>) { return probs; };
}

}  // namespace

TEST_CASE("spec and trajectory validation") {
  EnvSpec bad{.name = "x", .observation_dim = 2, .action_count = 2,
              .horizon = 0, .gamma = 0.9};
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad.horizon = 10;
  bad.gamma = 1.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

  Trajectory t;
  t.states = {{0.0}, {1.0}};
  t.actions = {0};
  t.costs = {1.0, 2.0};
  CHECK_THROWS_AS(t.validate(), std::invalid_argument);
  t.costs = {1.0};
  t.validate();
  t.gamma = 0.5;
  t.costs = {2.0};
  CHECK(t.discounted_loss() == 2.0);
  t.states.push_back({3.0});
  t.actions.push_back(1);
  t.costs.push_back(4.0);
  CHECK(t.discounted_loss() == doctest::Approx(4.0).epsilon(1e-15));
}

TEST_CASE("cartpole: deterministic right push matches the integrator") {
  CartPoleEnv env;
  RngStream rng(3);
  const std::vector<double> state{0.01, -0.02, 0.03, 0.04};
  const StepResult r = env.step(state, 1, rng);
  const auto expected = CartPoleEnv::integrate(state, 10.0);
  for (int i = 0; i < 4; ++i) CHECK(r.state[i] == expected[i]);
  CHECK(r.cost == -1.0);
  CHECK_FALSE(r.done);
}

TEST_CASE("cartpole: perturbed push with K=1 reproduces the nominal push") {
  CartPoleEnv env;
  const std::vector<double> state{0.0, 0.0, 0.05, -0.01};
  const auto nominal = CartPoleEnv::integrate(state, -10.0);
  int k1_seen = 0, resampled_seen = 0;
  for (std::uint64_t seed = 0; seed < 400; ++seed) {
    RngStream probe(seed);
    const bool resampled = probe.uniform() >= 0.8;
    const int k = resampled ? probe.uniform_int(9) : 1;
    RngStream rng(seed);
    const StepResult r = env.step(state, 0, rng);
    if (resampled) {
      ++resampled_seen;
      const auto expected =
          CartPoleEnv::integrate(state, -static_cast<double>(k) * 10.0);
      for (int i = 0; i < 4; ++i) CHECK(r.state[i] == expected[i]);
      if (k == 1)
        for (int i = 0; i < 4; ++i) CHECK(r.state[i] == nominal[i]);
      if (k == 1) ++k1_seen;
    } else {
      for (int i = 0; i < 4; ++i) CHECK(r.state[i] == nominal[i]);
    }
  }
  CHECK(k1_seen > 0);          // the interesting branch actually fired
  CHECK(resampled_seen > 40);  // ~20% of 400
}

TEST_CASE("cartpole: done exactly at the documented thresholds") {
  CartPoleEnv env;
  RngStream rng(5);
  // theta large enough that one step keeps it far beyond 12 degrees.
  StepResult r = env.step(std::vector<double>{0.0, 0.0, 0.5, 0.0}, 1, rng);
  CHECK(r.done);
  r = env.step(std::vector<double>{2.39, 5.0, 0.0, 0.0}, 1, rng);  // x -> 2.49
  CHECK(r.done);
  r = env.step(std::vector<double>{0.0, 0.0, 0.0, 0.0}, 1, rng);
  CHECK_FALSE(r.done);
}

TEST_CASE("pendulum: zero torque is noise-free and costs the state penalty") {
  PendulumEnv env;
  const double theta = std::numbers::pi / 4;
  const std::vector<double> state{std::cos(theta), std::sin(theta), 0.5};
  std::vector<double> first;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    RngStream rng(seed);
    const StepResult r = env.step(state, 2, rng);
    CHECK(r.cost ==
          doctest::Approx(theta * theta + 0.1 * 0.25).epsilon(1e-12));
    CHECK_FALSE(r.done);
    if (first.empty())
      first = r.state;
    else
      for (int i = 0; i < 3; ++i) CHECK(r.state[i] == first[i]);
  }
}

TEST_CASE("pendulum: angle wraps into [-pi, pi] for the cost") {
  PendulumEnv env;
  RngStream rng(1);
  const double theta = std::numbers::pi + 0.1;
  const std::vector<double> state{std::cos(theta), std::sin(theta), 0.0};
  const StepResult r = env.step(state, 2, rng);
  const double wrapped = std::numbers::pi - 0.1;
  CHECK(r.cost == doctest::Approx(wrapped * wrapped).epsilon(1e-9));
}

TEST_CASE("pendulum: angular velocity saturates at 8") {
  for (int action : {0, 4}) {
    const std::vector<double> state{1.0, 0.0, action == 0 ? -7.9 : 7.9};
    const auto next =
        PendulumEnv::integrate(state, PendulumEnv::torque_for_action(action));
    CHECK(std::abs(next[2]) <= 8.0);
  }
  CHECK(PendulumEnv::torque_for_action(0) == -2.0);
  CHECK(PendulumEnv::torque_for_action(4) == 2.0);
}

TEST_CASE("pendulum: noisy branch scales torque but never flips its sign") {
  PendulumEnv env;
  const std::vector<double> state{1.0, 0.0, 0.0};
  const auto nominal = PendulumEnv::integrate(state, 2.0);
  int noisy_seen = 0;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    RngStream probe(seed);
    const bool noisy = probe.uniform() < 0.2;
    RngStream rng(seed);
    const StepResult r = env.step(state, 4, rng);
    if (!noisy) {
      for (int i = 0; i < 3; ++i) CHECK(r.state[i] == nominal[i]);
    } else {
      ++noisy_seen;
      // Multiplier 1+|Z| >= 1 pushes at least as hard.
      CHECK(r.state[2] >= nominal[2] - 1e-12);
      CHECK(r.cost >= 0.001 * 4.0 - 1e-12);
    }
  }
  CHECK(noisy_seen > 20);
}

TEST_CASE("gridworld routes have the documented costs") {
  const TabularMdp mdp = two_route_gridworld();
  TabularEnv env(mdp, "gridworld");
  const double g = mdp.gamma;

  const auto safe = rollout(env, constant_policy({1.0, 0.0}), mdp.horizon,
                            RngStream(7).substream(0));
  CHECK(safe.discounted_loss() ==
        doctest::Approx(1.0 + g + g * g + g * g * g).epsilon(1e-12));

  // Risky-route losses are 0/10 spikes on the first two steps only.
  double mean = 0.0;
  const int n = 4000;
  for (int i = 0; i < n; ++i) {
    const auto t = rollout(env, constant_policy({0.0, 1.0}), mdp.horizon,
                           RngStream(8).substream(static_cast<std::uint64_t>(i)));
    for (int step = 2; step < t.step_count(); ++step) CHECK(t.costs[static_cast<std::size_t>(step)] == 0.0);
    mean += t.discounted_loss() / n;
  }
  CHECK(mean == doctest::Approx(1.5 * (1.0 + g)).epsilon(0.07));
}

TEST_CASE("rollout: shapes, determinism, and early-termination padding") {
  CartPoleEnv env(40);
  // A policy that always pushes right tips the pole quickly.
  const PolicyFn push_right = constant_policy({0.0, 1.0});
  const RngStream master(99);
  const Trajectory a = rollout(env, push_right, 40, master.substream(3));
  const Trajectory b = rollout(env, push_right, 40, master.substream(3));
  a.validate();
  CHECK(a.states.size() == 41);
  CHECK(a.actions.size() == 40);
  CHECK(a.costs.size() == 40);
  CHECK(a.gamma == env.spec().gamma);
  for (std::size_t i = 0; i < a.costs.size(); ++i) CHECK(a.costs[i] == b.costs[i]);

  // Survival costs -1 until done, 0 afterwards; the state freezes.
  bool seen_padding = false;
  for (std::size_t t = 0; t < a.costs.size(); ++t) {
    if (a.costs[t] == 0.0) {
      seen_padding = true;
      CHECK(a.states[t + 1] == a.states[t]);
    } else {
      CHECK(a.costs[t] == -1.0);
      CHECK_FALSE(seen_padding);  // no -1 after padding started
    }
  }
  CHECK(seen_padding);  // push-right cannot balance for 40 steps
}

TEST_CASE("sample_batch is invariant to thread count") {
  const TabularMdp mdp = two_route_gridworld();
  TabularEnv env(mdp, "gridworld");
  const PolicyFn policy = constant_policy({0.5, 0.5});
  const RngStream master(1234);
  const auto serial = sample_batch(env, policy, 64, mdp.horizon, master, 0, 1);
  const auto threaded = sample_batch(env, policy, 64, mdp.horizon, master, 0, 4);
  REQUIRE(serial.size() == threaded.size());
  for (std::size_t i = 0; i < serial.size(); ++i) {
    CHECK(serial[i].actions == threaded[i].actions);
    CHECK(serial[i].costs == threaded[i].costs);
    CHECK(serial[i].states == threaded[i].states);
  }
}

TEST_CASE("rollout rejects invalid policy outputs") {
  const TabularMdp mdp = two_route_gridworld();
  TabularEnv env(mdp, "gridworld");
  CHECK_THROWS_AS(rollout(env, constant_policy({0.5, 0.4}), 3, RngStream(1)),
                  std::domain_error);
  CHECK_THROWS_AS(rollout(env, constant_policy({1.2, -0.2}), 3, RngStream(1)),
                  std::domain_error);
  CHECK_THROWS_AS(rollout(env, constant_policy({0.5, 0.25, 0.25}), 3, RngStream(1)),
                  std::domain_error);
}

TEST_CASE("enumeration of the gridworld routes") {
  const TabularMdp mdp = two_route_gridworld();
  const double g = mdp.gamma;

  const auto safe_outcomes =
      enumerate_trajectories(mdp, constant_policy({1.0, 0.0}));
  REQUIRE(safe_outcomes.size() == 1);
  CHECK(safe_outcomes[0].probability == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(safe_outcomes[0].trajectory.discounted_loss() ==
        doctest::Approx(1.0 + g + g * g + g * g * g).epsilon(1e-12));

  const auto risky_outcomes =
      enumerate_trajectories(mdp, constant_policy({0.0, 1.0}));
  REQUIRE(risky_outcomes.size() == 4);
  double total = 0.0;
  std::multiset<double> losses;
  for (const auto& wt : risky_outcomes) {
    total += wt.probability;
    losses.insert(wt.trajectory.discounted_loss());
  }
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  const std::multiset<double> expected{0.0, 10.0 * g, 10.0, 10.0 + 10.0 * g};
  auto it = expected.begin();
  for (double l : losses) CHECK(l == doctest::Approx(*it++).epsilon(1e-12));
}

TEST_CASE("tabular env exposes one-hot states and deterministic arcs") {
  const TabularMdp mdp = two_route_gridworld();
  TabularEnv env(mdp, "gridworld");
  RngStream rng(17);
  const auto s0 = env.initial_state(rng);
  CHECK(TabularEnv::state_index(s0) == 0);
  const StepResult r = env.step(s0, 0, rng);
  CHECK(TabularEnv::state_index(r.state) == 1);
  CHECK(r.cost == 1.0);
  CHECK_FALSE(r.done);
  CHECK_THROWS_AS(TabularEnv::state_index(std::vector<double>{0.5, 0.5}),
                  std::invalid_argument);
}

// Frozen dynamics fingerprints. These pin the integrators and the rollout
// draw order; any change to physics constants, integration order, or rng
// consumption shows up here first.
TEST_CASE("golden: cartpole integrator") {
  const std::vector<double> s{0.013, -0.42, 0.071, 0.33};
  const auto right = CartPoleEnv::integrate(s, 10.0);
  CHECK(right[0] == doctest::Approx(0.0045999999999999999).epsilon(1e-15));
  CHECK(right[1] == doctest::Approx(-0.2259567905330559).epsilon(1e-15));
  CHECK(right[2] == doctest::Approx(0.077599999999999988).epsilon(1e-15));
  CHECK(right[3] == doctest::Approx(0.060524973311129437).epsilon(1e-15));
  const auto strong = CartPoleEnv::integrate(s, -40.0);
  CHECK(strong[1] == doctest::Approx(-1.2012074259171488).epsilon(1e-15));
  CHECK(strong[3] == doctest::Approx(1.5197152962096709).epsilon(1e-15));
}

TEST_CASE("golden: pendulum integrator") {
  const double theta = -1.2;
  const std::vector<double> s{std::cos(theta), std::sin(theta), -1.7};
  const auto coast = PendulumEnv::integrate(s, 0.0);
  CHECK(coast[0] == doctest::Approx(0.24822246724631281).epsilon(1e-15));
  CHECK(coast[1] == doctest::Approx(-0.96870305396140521).epsilon(1e-15));
  CHECK(coast[2] == doctest::Approx(-2.3990293144754196).epsilon(1e-15));
  const auto pushed = PendulumEnv::integrate(s, 3.4);
  CHECK(pushed[2] == doctest::Approx(-1.8890293144754198).epsilon(1e-15));
}

TEST_CASE("golden: cartpole rollout fingerprint") {
  CartPoleEnv env(12);
  const auto t = rollout(
      env, [](std::span<const double>) { return std::vector<double>{0.0, 1.0}; },
      12, RngStream(2718).substream(0));
  CHECK(t.discounted_loss() == doctest::Approx(-9.5617924991195498).epsilon(1e-15));
  CHECK(t.states.back()[3] == doctest::Approx(-3.0917167284718712).epsilon(1e-15));
}
