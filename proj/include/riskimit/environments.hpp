#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "riskimit/rng.hpp"
#include "riskimit/trajectory.hpp"

namespace riskimit {

struct StepResult {
  std::vector<double> state;
  double cost = 0.0;
  bool done = false;
};

// Environments are stateless: stepping is a pure function of (state, action,
// rng). All episode bookkeeping (horizon, padding after done) lives in
// rollout(), which keeps enumeration and simulation on the same dynamics.
class Environment {
 public:
  virtual ~Environment() = default;
  virtual const EnvSpec& spec() const = 0;
  virtual std::vector<double> initial_state(RngStream& rng) const = 0;
  virtual StepResult step(std::span<const double> state, int action,
                          RngStream& rng) const = 0;
};

// Cart-pole balancing with a perturbed left push. Actions: 0 pushes left,
// 1 pushes right with force 10 N. Under action 0 the push is -10 N with
// probability 0.8; otherwise the magnitude is resampled as K*10 N with
// K uniform on {0..8}. Cost is -1 per surviving step; the episode ends when
// |x| > 2.4 or |theta| > 12 degrees.
class CartPoleEnv : public Environment {
 public:
  explicit CartPoleEnv(int horizon = 200, double gamma = 0.99);
  const EnvSpec& spec() const override { return spec_; }
  std::vector<double> initial_state(RngStream& rng) const override;
  StepResult step(std::span<const double> state, int action,
                  RngStream& rng) const override;

  // Deterministic dynamics for a signed force, exposed for tests.
  static std::vector<double> integrate(std::span<const double> state,
                                       double force);

 private:
  EnvSpec spec_;
};

// Pendulum swing-up with five torque levels {-2,-1,0,1,2}. With probability
// 0.2 the applied torque is scaled by (1 + |Z|), Z standard normal truncated
// to [-3, 3]. Observation is (cos th, sin th, thdot); cost is
// th_norm^2 + 0.1 thdot^2 + 0.001 u_eff^2 with the effective torque. Never
// terminates on its own.
class PendulumEnv : public Environment {
 public:
  explicit PendulumEnv(int horizon = 200, double gamma = 0.99);
  const EnvSpec& spec() const override { return spec_; }
  std::vector<double> initial_state(RngStream& rng) const override;
  StepResult step(std::span<const double> state, int action,
                  RngStream& rng) const override;

  static double torque_for_action(int action);  // {-2,-1,0,1,2}
  static std::vector<double> integrate(std::span<const double> state,
                                       double torque);

 private:
  EnvSpec spec_;
};

// Finite-support random cost: value v[k] with probability p[k]. A single
// atom with probability 1 is the deterministic case.
struct CostAtoms {
  std::vector<double> values;
  std::vector<double> probs;

  double mean() const;
  void validate() const;
};

// Fixed-horizon tabular MDP with optional random costs per (state, action).
struct TabularMdp {
  int state_count = 0;
  int action_count = 0;
  int horizon = 0;
  double gamma = 0.99;
  std::vector<double> transition;  // [s*A*S + a*S + s'] row-stochastic
  std::vector<CostAtoms> cost;     // [s*A + a]
  std::vector<double> initial;     // distribution over states

  double p(int s, int a, int next) const {
    return transition[(static_cast<std::size_t>(s) * action_count + a) *
                          state_count +
                      next];
  }
  const CostAtoms& cost_atoms(int s, int a) const {
    return cost[static_cast<std::size_t>(s) * action_count + a];
  }
  void validate() const;
};

// Environment view of a TabularMdp with one-hot observations.
class TabularEnv : public Environment {
 public:
  explicit TabularEnv(TabularMdp mdp, std::string name = "tabular");
  const EnvSpec& spec() const override { return spec_; }
  std::vector<double> initial_state(RngStream& rng) const override;
  StepResult step(std::span<const double> state, int action,
                  RngStream& rng) const override;

  const TabularMdp& mdp() const { return mdp_; }
  static int state_index(std::span<const double> one_hot);

 private:
  const double* transition_row(int s, int a) const;

  TabularMdp mdp_;
  EnvSpec spec_;
};

// Six-state two-route episodic task used by the risk experiments. From the
// start state action 0 enters a corridor reaching the goal in four steps with
// a sure cost of 1 each; action 1 is a two-step shortcut whose steps cost 0
// or 10 (p=0.15 for the spike). The shortcut is cheaper on average (3 vs 4)
// but carries the entire tail. Goal state is absorbing and free.
TabularMdp two_route_gridworld();

// Policy evaluated per observation; returns a probability vector over
// actions. rollout validates the output (non-negative, sums to 1).
using PolicyFn = std::function<std::vector<double>(std::span<const double>)>;

// Samples one fixed-horizon trajectory. `stream` should be a dedicated
// substream for this trajectory. After `done`, the state freezes, actions
// are still drawn from the policy, and costs are 0.
Trajectory rollout(const Environment& env, const PolicyFn& policy, int horizon,
                   RngStream stream);

// count rollouts on substreams base_index..base_index+count-1 of `master`.
// Identical output for any thread count.
std::vector<Trajectory> sample_batch(const Environment& env,
                                     const PolicyFn& policy, int count,
                                     int horizon, const RngStream& master,
                                     std::uint64_t base_index = 0,
                                     int threads = 1);

struct WeightedTrajectory {
  Trajectory trajectory;
  double probability = 0.0;
  std::vector<int> state_indices;  // horizon+1 entries, tabular states
};

// Exhaustive outcome enumeration (initial state x transitions x cost atoms x
// policy actions) over mdp.horizon steps. Throws std::length_error when the
// outcome count would exceed the guard. Probabilities sum to 1.
std::vector<WeightedTrajectory> enumerate_trajectories(
    const TabularMdp& mdp, const PolicyFn& policy,
    std::size_t max_outcomes = 10'000'000);

std::vector<double> one_hot(int index, int dim);

}  // namespace riskimit
