#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <limits>

#include "doctest.h"
#include "riskimit/expert.hpp"
#include "riskimit/policy_gradient.hpp"

using namespace riskimit;

namespace {

// One state, two arms, one step. Arm 0 costs 1 surely; arm 1 costs 0 or
// `hi` with P(hi) = p_hi.
TabularMdp bandit(double hi, double p_hi) {
  TabularMdp m;
  m.state_count = 1;
  m.action_count = 2;
  m.horizon = 1;
  m.gamma = 0.99;
  m.transition = {1.0, 1.0};
  m.cost = {CostAtoms{{1.0}, {1.0}},
            CostAtoms{{0.0, hi}, {1.0 - p_hi, p_hi}}};
  m.initial = {1.0};
  return m;
}

RiskConfig profile(double alpha, double lambda) {
  RiskConfig rc;
  rc.alpha = alpha;
  rc.lambda = lambda;
  rc.gamma = 0.99;
  return rc;
}

double exact_policy_rho(const TabularMdp& mdp, const PolicyFn& policy,
                        const RiskConfig& risk) {
  const auto outcomes = enumerate_trajectories(mdp, policy);
  std::vector<double> losses(outcomes.size()), probs(outcomes.size());
  for (std::size_t k = 0; k < outcomes.size(); ++k) {
    losses[k] = outcomes[k].trajectory.discounted_loss();
    probs[k] = outcomes[k].probability;
  }
  return mean_cvar(LossBatch(losses, probs), risk);
}

// Independent expected-cost oracle: backward induction with stage costs
// discounted from episode start, allowing time-dependent action choice.
double dp_expected_cost(const TabularMdp& m) {
  std::vector<double> next(m.state_count, 0.0);
  for (int t = m.horizon - 1; t >= 0; --t) {
    std::vector<double> cur(m.state_count);
    const double disc = std::pow(m.gamma, t);
    for (int s = 0; s < m.state_count; ++s) {
      double best = std::numeric_limits<double>::infinity();
      for (int a = 0; a < m.action_count; ++a) {
        double q = disc * m.cost_atoms(s, a).mean();
        for (int sn = 0; sn < m.state_count; ++sn)
          q += m.p(s, a, sn) * next[sn];
        best = std::min(best, q);
      }
      cur[s] = best;
    }
    next = cur;
  }
  double v = 0.0;
  for (int s = 0; s < m.state_count; ++s) v += m.initial[s] * next[s];
  return v;
}

struct TempPath {
  std::string path;
  explicit TempPath(const std::string& name)
      : path((std::filesystem::temp_directory_path() / name).string()) {}
  ~TempPath() { std::remove(path.c_str()); }
};

}  // namespace

TEST_CASE("tabular policy fn emits one-hot action distributions") {
  const PolicyFn fn = tabular_policy_fn({1, 0}, 2);
  CHECK(fn(one_hot(0, 2)) == std::vector<double>{0.0, 1.0});
  CHECK(fn(one_hot(1, 2)) == std::vector<double>{1.0, 0.0});
  CHECK_THROWS_AS((void)tabular_policy_fn({2}, 2), std::invalid_argument);
}

TEST_CASE("single-action mdp has the unique trivial expert") {
  TabularMdp m;
  m.state_count = 2;
  m.action_count = 1;
  m.horizon = 3;
  m.gamma = 0.5;
  m.transition = {0.0, 1.0, 0.0, 1.0};  // everything drains into state 1
  m.cost = {CostAtoms{{2.0}, {1.0}}, CostAtoms{{0.0}, {1.0}}};
  m.initial = {1.0, 0.0};
  const TabularExpert best = exact_tabular_expert(m, profile(0.3, 0.5));
  CHECK(best.actions == std::vector<int>{0, 0});
  // Deterministic outcome: cost 2 at t=0 only, so every risk profile sees 2.
  CHECK(best.rho == 2.0);
}

TEST_CASE("risk-sensitive bandit expert picks the safe arm") {
  // alpha=0.2, lambda=1: exact rho is 1 for the safe arm and 6 for the
  // risky one, so the search must return arm 0.
  const TabularMdp m = bandit(10.0, 0.2);
  const RiskConfig rc = profile(0.2, 1.0);
  const TabularExpert best = exact_tabular_expert(m, rc);
  CHECK(best.actions == std::vector<int>{0});
  CHECK(best.rho == 1.0);
  CHECK(exact_policy_rho(m, tabular_policy_fn({1}, 2), rc) == 6.0);
}

TEST_CASE("risk-neutral bandit expert flips to the cheaper risky arm") {
  // Same machinery at lambda=0: risky arm {0 w.p. 0.9, 8 w.p. 0.1} has mean
  // 0.8 against the safe arm's 1, and the profile ignores the tail.
  const TabularMdp m = bandit(8.0, 0.1);
  const TabularExpert neutral = exact_tabular_expert(m, profile(0.2, 0.0));
  CHECK(neutral.actions == std::vector<int>{1});
  CHECK(neutral.rho == 0.8);
  // Turning the tail term back on flips the same fixture to the safe arm.
  const TabularExpert averse = exact_tabular_expert(m, profile(0.2, 1.0));
  CHECK(averse.actions == std::vector<int>{0});
  CHECK(averse.rho == 1.0);
  CHECK(exact_policy_rho(m, tabular_policy_fn({1}, 2), profile(0.2, 1.0)) ==
        2.4);
}

TEST_CASE("risk-neutral gridworld expert matches a value-iteration oracle") {
  const TabularMdp m = two_route_gridworld();
  const TabularExpert best = exact_tabular_expert(m, profile(0.3, 0.0));
  CHECK(best.actions[0] == 1);  // takes the shortcut
  CHECK(best.rho == doctest::Approx(dp_expected_cost(m)).epsilon(1e-12));
  // The experiment profile flips the start decision to the safe corridor.
  const TabularExpert averse = exact_tabular_expert(m, profile(0.3, 0.5));
  CHECK(averse.actions[0] == 0);
  CHECK(averse.rho == doctest::Approx(3.940399).epsilon(1e-12));
}

TEST_CASE("deterministic optimum is not beaten on a stochastic-policy grid") {
  const TabularMdp m = bandit(10.0, 0.2);
  const RiskConfig rc = profile(0.2, 1.0);
  const TabularExpert best = exact_tabular_expert(m, rc);
  double grid_min = std::numeric_limits<double>::infinity();
  for (int i = 0; i <= 20; ++i) {
    const double p_safe = i / 20.0;
    const PolicyFn mixed = [p_safe](std::span<const double>) {
      return std::vector<double>{p_safe, 1.0 - p_safe};
    };
    grid_min = std::min(grid_min, exact_policy_rho(m, mixed, rc));
  }
  CHECK(best.rho <= grid_min + 1e-12);
}

TEST_CASE("policy-space guard throws before enumerating") {
  CHECK_THROWS_AS(
      (void)exact_tabular_expert(two_route_gridworld(), profile(0.3, 0.5), 8),
      std::length_error);
}

TEST_CASE("reinforce expert concentrates on the oracle arm") {
  ExpertTrainConfig cfg;
  cfg.batch_trajectories = 60;
  cfg.hidden = {8};

  SUBCASE("risk-averse profile learns the safe arm") {
    const TabularEnv env(bandit(10.0, 0.2), "bandit");
    cfg.risk = profile(0.2, 1.0);
    for (std::uint64_t seed : {1ull, 2ull}) {
      const ExpertTrainResult r = train_cvar_expert(cfg, env, 300, seed);
      REQUIRE_FALSE(r.diverged);
      const auto probs = r.policy.action_probs(one_hot(0, 1));
      CHECK(probs[0] >= 0.75);
      REQUIRE(r.rho_curve.size() == 300);
      CHECK(r.best_rho == *std::min_element(r.rho_curve.begin(),
                                            r.rho_curve.end()));
    }
  }

  SUBCASE("risk-neutral profile learns the cheaper risky arm") {
    const TabularEnv env(bandit(8.0, 0.1), "bandit");
    cfg.risk = profile(0.2, 0.0);
    for (std::uint64_t seed : {1ull, 2ull}) {
      const ExpertTrainResult r = train_cvar_expert(cfg, env, 300, seed);
      REQUIRE_FALSE(r.diverged);
      CHECK(r.policy.action_probs(one_hot(0, 1))[1] >= 0.75);
    }
  }
}

TEST_CASE("at lambda zero the tail level cannot influence training") {
  const TabularEnv env(bandit(8.0, 0.1), "bandit");
  ExpertTrainConfig a;
  a.batch_trajectories = 40;
  a.hidden = {8};
  a.risk = profile(0.2, 0.0);
  ExpertTrainConfig b = a;
  b.risk.alpha = 0.45;
  const ExpertTrainResult ra = train_cvar_expert(a, env, 50, 9);
  const ExpertTrainResult rb = train_cvar_expert(b, env, 50, 9);
  CHECK(ra.policy.net().params() == rb.policy.net().params());
  CHECK(ra.rho_curve == rb.rho_curve);
}

TEST_CASE("overflowing costs trip the divergence guard") {
  TabularMdp m;
  m.state_count = 1;
  m.action_count = 1;
  m.horizon = 3;
  m.gamma = 0.99;
  m.transition = {1.0};
  m.cost = {CostAtoms{{1e308}, {1.0}}};
  m.initial = {1.0};
  const TabularEnv env(m, "overflow");
  ExpertTrainConfig cfg;
  cfg.batch_trajectories = 4;
  cfg.hidden = {4};
  const ExpertTrainResult r = train_cvar_expert(cfg, env, 5, 1);
  CHECK(r.diverged);
  CHECK(r.divergence_detail.find("iteration 1") != std::string::npos);
  CHECK(r.rho_curve.empty());
}

TEST_CASE("expert datasets round trip with provenance") {
  const TabularEnv env(two_route_gridworld(), "two_route");
  RngStream rng(88);
  const CategoricalPolicy policy = CategoricalPolicy::random_init(
      env.spec().observation_dim, env.spec().action_count, {8}, rng);
  TempPath tmp("riskimit_expert_dataset.jsonl");

  const auto written =
      generate_expert_dataset(policy, env, 100, 606, tmp.path);
  REQUIRE(written.size() == 100);

  const TrajectoryDataset back = read_trajectory_dataset(tmp.path);
  CHECK(back.header.env_name == "two_route");
  CHECK(back.header.seed == 606);
  CHECK(back.header.policy_checksum == params_checksum(policy.net()));
  CHECK(back.header.config.at("count") == 100);
  REQUIRE(back.trajectories.size() == 100);
  for (std::size_t i = 0; i < 100; ++i) {
    CHECK(back.trajectories[i].states == written[i].states);
    CHECK(back.trajectories[i].actions == written[i].actions);
    CHECK(back.trajectories[i].costs == written[i].costs);
    CHECK(back.trajectories[i].gamma == written[i].gamma);
    CHECK(back.trajectories[i].discounted_loss() ==
          written[i].discounted_loss());
  }
}

TEST_CASE("deterministic policy on deterministic dynamics repeats one record") {
  TabularMdp m;
  m.state_count = 2;
  m.action_count = 2;
  m.horizon = 2;
  m.gamma = 0.9;
  m.transition = {0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0};
  m.cost = {CostAtoms{{3.0}, {1.0}}, CostAtoms{{1.0}, {1.0}},
            CostAtoms{{0.0}, {1.0}}, CostAtoms{{0.0}, {1.0}}};
  m.initial = {1.0, 0.0};
  const TabularEnv env(m, "det");
  // Saturated logits make the softmax numerically one-hot on action 0.
  Mlp net({2, 2}, {Activation::kSoftmax});
  net.set_params(std::vector<double>{80.0, 80.0, 0.0, 0.0, 0.0, 0.0});
  CategoricalPolicy policy(std::move(net));
  TempPath tmp("riskimit_expert_det.jsonl");
  const auto written = generate_expert_dataset(policy, env, 5, 3, tmp.path);
  for (const auto& t : written) {
    CHECK(t.actions == written[0].actions);
    CHECK(t.costs == written[0].costs);
    CHECK(t.states == written[0].states);
  }
  CHECK_THROWS_WITH_AS(
      (void)generate_expert_dataset(policy, env, 5, 3,
                                    "/nonexistent_dir/out.jsonl"),
      doctest::Contains("/nonexistent_dir/out.jsonl"), std::runtime_error);
}
