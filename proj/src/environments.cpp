#include "riskimit/environments.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>
#include <thread>

namespace riskimit {

namespace {

constexpr double kPi = std::numbers::pi;

void check_action(int action, const EnvSpec& spec) {
  if (action < 0 || action >= spec.action_count)
    throw std::invalid_argument("action out of range for " + spec.name);
}

void check_state_dim(std::span<const double> state, const EnvSpec& spec) {
  if (static_cast<int>(state.size()) != spec.observation_dim)
    throw std::invalid_argument("state dimension mismatch for " + spec.name);
}

std::vector<double> validated_probs(const PolicyFn& policy,
                                    std::span<const double> obs,
                                    int action_count) {
  std::vector<double> probs = policy(obs);
  if (static_cast<int>(probs.size()) != action_count)
    throw std::domain_error("policy returned wrong number of actions");
  double total = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0)) throw std::domain_error("policy probability < 0 or NaN");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9)
    throw std::domain_error("policy probabilities sum to " +
                            std::to_string(total));
  return probs;
}

}  // namespace

std::vector<double> one_hot(int index, int dim) {
  std::vector<double> v(static_cast<std::size_t>(dim), 0.0);
  v.at(static_cast<std::size_t>(index)) = 1.0;
  return v;
}

// ---------------------------------------------------------------------------
// CartPole

namespace cartpole {
constexpr double kGravity = 9.8;
constexpr double kMassCart = 1.0;
constexpr double kMassPole = 0.1;
constexpr double kTotalMass = kMassCart + kMassPole;
constexpr double kLength = 0.5;  // half pole length
constexpr double kPoleMassLength = kMassPole * kLength;
constexpr double kForceMag = 10.0;
constexpr double kTau = 0.02;
constexpr double kThetaThreshold = 12.0 * kPi / 180.0;
constexpr double kXThreshold = 2.4;
}  // namespace cartpole

CartPoleEnv::CartPoleEnv(int horizon, double gamma)
    : spec_{.name = "cartpole",
            .observation_dim = 4,
            .action_count = 2,
            .horizon = horizon,
            .gamma = gamma} {
  spec_.validate();
}

std::vector<double> CartPoleEnv::initial_state(RngStream& rng) const {
  std::vector<double> s(4);
  for (double& v : s) v = rng.uniform(-0.05, 0.05);
  return s;
}

std::vector<double> CartPoleEnv::integrate(std::span<const double> state,
                                           double force) {
  using namespace cartpole;
  const double x = state[0], x_dot = state[1];
  const double theta = state[2], theta_dot = state[3];
  const double cos_t = std::cos(theta);
  const double sin_t = std::sin(theta);
  const double temp =
      (force + kPoleMassLength * theta_dot * theta_dot * sin_t) / kTotalMass;
  const double theta_acc =
      (kGravity * sin_t - cos_t * temp) /
      (kLength * (4.0 / 3.0 - kMassPole * cos_t * cos_t / kTotalMass));
  const double x_acc = temp - kPoleMassLength * theta_acc * cos_t / kTotalMass;
  return {x + kTau * x_dot, x_dot + kTau * x_acc, theta + kTau * theta_dot,
          theta_dot + kTau * theta_acc};
}

StepResult CartPoleEnv::step(std::span<const double> state, int action,
                             RngStream& rng) const {
  using namespace cartpole;
  check_action(action, spec_);
  check_state_dim(state, spec_);
  double force;
  if (action == 1) {
    force = kForceMag;
  } else if (rng.uniform() < 0.8) {
    force = -kForceMag;
  } else {
    // Perturbed push: magnitude K*10 N, K uniform on {0..8}. K=1 reproduces
    // the nominal push bit for bit.
    force = -static_cast<double>(rng.uniform_int(9)) * kForceMag;
  }
  StepResult r;
  r.state = integrate(state, force);
  r.cost = -1.0;
  r.done = std::abs(r.state[0]) > kXThreshold ||
           std::abs(r.state[2]) > kThetaThreshold;
  return r;
}

// ---------------------------------------------------------------------------
// Pendulum

namespace pendulum {
constexpr double kGravity = 10.0;
constexpr double kMass = 1.0;
constexpr double kLength = 1.0;
constexpr double kDt = 0.05;
constexpr double kMaxSpeed = 8.0;
}  // namespace pendulum

PendulumEnv::PendulumEnv(int horizon, double gamma)
    : spec_{.name = "pendulum",
            .observation_dim = 3,
            .action_count = 5,
            .horizon = horizon,
            .gamma = gamma} {
  spec_.validate();
}

double PendulumEnv::torque_for_action(int action) {
  return static_cast<double>(action - 2);  // {-2,-1,0,1,2}
}

std::vector<double> PendulumEnv::initial_state(RngStream& rng) const {
  const double theta = rng.uniform(-kPi, kPi);
  const double theta_dot = rng.uniform(-1.0, 1.0);
  return {std::cos(theta), std::sin(theta), theta_dot};
}

std::vector<double> PendulumEnv::integrate(std::span<const double> state,
                                           double torque) {
  using namespace pendulum;
  const double theta = std::atan2(state[1], state[0]);
  const double theta_dot = state[2];
  double new_theta_dot =
      theta_dot + (3.0 * kGravity / (2.0 * kLength) * std::sin(theta) +
                   3.0 / (kMass * kLength * kLength) * torque) *
                      kDt;
  new_theta_dot = std::clamp(new_theta_dot, -kMaxSpeed, kMaxSpeed);
  const double new_theta = theta + new_theta_dot * kDt;
  return {std::cos(new_theta), std::sin(new_theta), new_theta_dot};
}

StepResult PendulumEnv::step(std::span<const double> state, int action,
                             RngStream& rng) const {
  check_action(action, spec_);
  check_state_dim(state, spec_);
  double torque = torque_for_action(action);
  if (rng.uniform() < 0.2)
    torque *= 1.0 + std::abs(rng.truncated_normal(-3.0, 3.0));
  const double theta = std::atan2(state[1], state[0]);
  const double theta_norm = std::remainder(theta, 2.0 * kPi);
  StepResult r;
  r.state = integrate(state, torque);
  r.cost = theta_norm * theta_norm + 0.1 * state[2] * state[2] +
           0.001 * torque * torque;
  r.done = false;
  return r;
}

// ---------------------------------------------------------------------------
// Tabular

double CostAtoms::mean() const {
  double m = 0.0;
  for (std::size_t k = 0; k < values.size(); ++k) m += values[k] * probs[k];
  return m;
}

void CostAtoms::validate() const {
  if (values.empty() || values.size() != probs.size())
    throw std::invalid_argument("CostAtoms: values/probs size mismatch");
  double total = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0)) throw std::invalid_argument("CostAtoms: negative prob");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9)
    throw std::invalid_argument("CostAtoms: probs must sum to 1");
}

void TabularMdp::validate() const {
  if (state_count <= 0 || action_count <= 0 || horizon <= 0)
    throw std::invalid_argument("TabularMdp: non-positive dimensions");
  if (!(gamma >= 0.0 && gamma < 1.0))
    throw std::invalid_argument("TabularMdp: gamma must lie in [0, 1)");
  const std::size_t sa =
      static_cast<std::size_t>(state_count) * action_count;
  if (transition.size() != sa * state_count)
    throw std::invalid_argument("TabularMdp: transition size mismatch");
  if (cost.size() != sa)
    throw std::invalid_argument("TabularMdp: cost size mismatch");
  if (initial.size() != static_cast<std::size_t>(state_count))
    throw std::invalid_argument("TabularMdp: initial size mismatch");
  for (int s = 0; s < state_count; ++s) {
    for (int a = 0; a < action_count; ++a) {
      double row = 0.0;
      for (int n = 0; n < state_count; ++n) {
        const double pr = p(s, a, n);
        if (!(pr >= 0.0))
          throw std::invalid_argument("TabularMdp: negative transition prob");
        row += pr;
      }
      if (std::abs(row - 1.0) > 1e-9)
        throw std::invalid_argument("TabularMdp: transition row not stochastic");
      cost_atoms(s, a).validate();
    }
  }
  double init_total = std::accumulate(initial.begin(), initial.end(), 0.0);
  if (std::abs(init_total - 1.0) > 1e-9)
    throw std::invalid_argument("TabularMdp: initial distribution not normalized");
}

TabularEnv::TabularEnv(TabularMdp mdp, std::string name) : mdp_(std::move(mdp)) {
  mdp_.validate();
  spec_ = EnvSpec{.name = std::move(name),
                  .observation_dim = mdp_.state_count,
                  .action_count = mdp_.action_count,
                  .horizon = mdp_.horizon,
                  .gamma = mdp_.gamma};
  spec_.validate();
}

int TabularEnv::state_index(std::span<const double> one_hot_state) {
  int index = -1;
  for (std::size_t i = 0; i < one_hot_state.size(); ++i) {
    const double v = one_hot_state[i];
    if (v == 1.0 && index < 0)
      index = static_cast<int>(i);
    else if (v != 0.0)
      throw std::invalid_argument("not a one-hot state");
  }
  if (index < 0) throw std::invalid_argument("not a one-hot state");
  return index;
}

std::vector<double> TabularEnv::initial_state(RngStream& rng) const {
  const int s = rng.categorical(mdp_.initial);
  return one_hot(s, mdp_.state_count);
}

StepResult TabularEnv::step(std::span<const double> state, int action,
                            RngStream& rng) const {
  check_action(action, spec_);
  check_state_dim(state, spec_);
  const int s = state_index(state);
  const std::span<const double> row(
      transition_row(s, action), static_cast<std::size_t>(mdp_.state_count));
  const int next = rng.categorical(row);
  const CostAtoms& atoms = mdp_.cost_atoms(s, action);
  // Single-atom costs consume no randomness.
  const double c = atoms.values.size() == 1
                       ? atoms.values[0]
                       : atoms.values[static_cast<std::size_t>(
                             rng.categorical(atoms.probs))];
  StepResult r;
  r.state = one_hot(next, mdp_.state_count);
  r.cost = c;
  r.done = false;
  return r;
}

const double* TabularEnv::transition_row(int s, int a) const {
  return mdp_.transition.data() +
         (static_cast<std::size_t>(s) * mdp_.action_count + a) *
             mdp_.state_count;
}

TabularMdp two_route_gridworld() {
  // States: 0 start, 1..3 safe corridor, 4 shortcut midpoint, 5 goal.
  // Action 0 = safe branch, action 1 = shortcut; off the start state both
  // actions advance the same way.
  constexpr int kStart = 0, kB1 = 1, kB2 = 2, kB3 = 3, kRisky = 4, kGoal = 5;
  TabularMdp m;
  m.state_count = 6;
  m.action_count = 2;
  m.horizon = 5;
  m.gamma = 0.99;
  m.transition.assign(static_cast<std::size_t>(6) * 2 * 6, 0.0);
  m.cost.assign(static_cast<std::size_t>(6) * 2, CostAtoms{{0.0}, {1.0}});
  m.initial.assign(6, 0.0);
  m.initial[kStart] = 1.0;

  auto arc = [&m](int s, int a, int next) {
    m.transition[(static_cast<std::size_t>(s) * 2 + a) * 6 + next] = 1.0;
  };
  const CostAtoms sure_one{{1.0}, {1.0}};
  const CostAtoms spiky{{0.0, 10.0}, {0.85, 0.15}};
  auto set_cost = [&m](int s, int a, const CostAtoms& atoms) {
    m.cost[static_cast<std::size_t>(s) * 2 + a] = atoms;
  };

  arc(kStart, 0, kB1);
  set_cost(kStart, 0, sure_one);
  arc(kStart, 1, kRisky);
  set_cost(kStart, 1, spiky);
  for (int a = 0; a < 2; ++a) {
    arc(kB1, a, kB2);
    set_cost(kB1, a, sure_one);
    arc(kB2, a, kB3);
    set_cost(kB2, a, sure_one);
    arc(kB3, a, kGoal);
    set_cost(kB3, a, sure_one);
    arc(kRisky, a, kGoal);
    set_cost(kRisky, a, spiky);
    arc(kGoal, a, kGoal);  // absorbing, free
  }
  m.validate();
  return m;
}

// ---------------------------------------------------------------------------
// Rollout and enumeration

Trajectory rollout(const Environment& env, const PolicyFn& policy, int horizon,
                   RngStream stream) {
  if (horizon <= 0) throw std::invalid_argument("rollout: horizon must be > 0");
  const EnvSpec& spec = env.spec();
  Trajectory traj;
  traj.gamma = spec.gamma;
  traj.states.reserve(static_cast<std::size_t>(horizon) + 1);
  traj.actions.reserve(static_cast<std::size_t>(horizon));
  traj.costs.reserve(static_cast<std::size_t>(horizon));

  std::vector<double> state = env.initial_state(stream);
  traj.states.push_back(state);
  bool done = false;
  for (int t = 0; t < horizon; ++t) {
    const std::vector<double> probs =
        validated_probs(policy, state, spec.action_count);
    const int action = stream.categorical(probs);
    double cost = 0.0;
    if (!done) {
      StepResult r = env.step(state, action, stream);
      state = std::move(r.state);
      cost = r.cost;
      done = r.done;
    }
    // After termination the state freezes and steps are free.
    traj.actions.push_back(action);
    traj.costs.push_back(cost);
    traj.states.push_back(state);
  }
  return traj;
}

std::vector<Trajectory> sample_batch(const Environment& env,
                                     const PolicyFn& policy, int count,
                                     int horizon, const RngStream& master,
                                     std::uint64_t base_index, int threads) {
  if (count < 0) throw std::invalid_argument("sample_batch: negative count");
  std::vector<Trajectory> out(static_cast<std::size_t>(count));
  auto worker = [&](int begin, int stride) {
    for (int i = begin; i < count; i += stride)
      out[static_cast<std::size_t>(i)] =
          rollout(env, policy, horizon,
                  master.substream(base_index + static_cast<std::uint64_t>(i)));
  };
  if (threads <= 1 || count <= 1) {
    worker(0, 1);
    return out;
  }
  const int n = std::min(threads, count);
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n));
  for (int w = 0; w < n; ++w)
    pool.emplace_back([&, w] {
      try {
        worker(w, n);
      } catch (...) {
        errors[static_cast<std::size_t>(w)] = std::current_exception();
      }
    });
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

namespace {

struct EnumFrame {
  const TabularMdp& mdp;
  const PolicyFn& policy;
  std::size_t max_outcomes;
  std::vector<WeightedTrajectory>& out;
  std::vector<int> state_indices;
  std::vector<int> actions;
  std::vector<double> costs;
  std::vector<std::vector<double>> action_probs;  // cached per state

  const std::vector<double>& probs_for(int s) {
    auto& cached = action_probs[static_cast<std::size_t>(s)];
    if (cached.empty()) {
      const auto obs = one_hot(s, mdp.state_count);
      cached = validated_probs(policy, obs, mdp.action_count);
    }
    return cached;
  }

  void emit(double probability) {
    if (out.size() >= max_outcomes)
      throw std::length_error("enumerate_trajectories: outcome guard exceeded");
    WeightedTrajectory wt;
    wt.probability = probability;
    wt.state_indices = state_indices;
    wt.trajectory.gamma = mdp.gamma;
    for (int s : state_indices)
      wt.trajectory.states.push_back(one_hot(s, mdp.state_count));
    wt.trajectory.actions = actions;
    wt.trajectory.costs = costs;
    out.push_back(std::move(wt));
  }

  void descend(int t, int s, double probability) {
    if (t == mdp.horizon) {
      emit(probability);
      return;
    }
    const auto& pi = probs_for(s);
    for (int a = 0; a < mdp.action_count; ++a) {
      if (pi[static_cast<std::size_t>(a)] == 0.0) continue;
      const double pa = probability * pi[static_cast<std::size_t>(a)];
      const CostAtoms& atoms = mdp.cost_atoms(s, a);
      for (int next = 0; next < mdp.state_count; ++next) {
        const double pt = mdp.p(s, a, next);
        if (pt == 0.0) continue;
        for (std::size_t k = 0; k < atoms.values.size(); ++k) {
          if (atoms.probs[k] == 0.0) continue;
          actions.push_back(a);
          costs.push_back(atoms.values[k]);
          state_indices.push_back(next);
          descend(t + 1, next, pa * pt * atoms.probs[k]);
          state_indices.pop_back();
          costs.pop_back();
          actions.pop_back();
        }
      }
    }
  }
};

}  // namespace

std::vector<WeightedTrajectory> enumerate_trajectories(
    const TabularMdp& mdp, const PolicyFn& policy, std::size_t max_outcomes) {
  mdp.validate();
  std::vector<WeightedTrajectory> out;
  EnumFrame frame{.mdp = mdp,
                  .policy = policy,
                  .max_outcomes = max_outcomes,
                  .out = out,
                  .state_indices = {},
                  .actions = {},
                  .costs = {},
                  .action_probs = std::vector<std::vector<double>>(
                      static_cast<std::size_t>(mdp.state_count))};
  for (int s0 = 0; s0 < mdp.state_count; ++s0) {
    const double p0 = mdp.initial[static_cast<std::size_t>(s0)];
    if (p0 == 0.0) continue;
    frame.state_indices.assign(1, s0);
    frame.descend(0, s0, p0);
  }
  return out;
}

}  // namespace riskimit
