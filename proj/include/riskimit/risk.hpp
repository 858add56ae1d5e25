#pragma once

#include <span>
#include <vector>

#include "riskimit/environments.hpp"
#include "riskimit/trajectory.hpp"

namespace riskimit {

struct RiskConfig {
  double alpha = 0.3;   // tail level, (0, 1]
  double lambda = 0.5;  // mean/CVaR blend weight, >= 0
  double gamma = 0.99;  // discount carried alongside for estimators that need it

  void validate() const;
};

// Weighted sample of scalar losses. Weights form a probability vector
// (validated on construction within 1e-12); the one-argument form is the
// uniform batch.
class LossBatch {
 public:
  explicit LossBatch(std::vector<double> losses);
  LossBatch(std::vector<double> losses, std::vector<double> weights);

  static LossBatch from_trajectories(std::span<const Trajectory> trajs);

  std::size_t size() const { return losses_.size(); }
  const std::vector<double>& losses() const { return losses_; }
  const std::vector<double>& weights() const { return weights_; }
  double mean() const;

 private:
  std::vector<double> losses_;
  std::vector<double> weights_;
};

// Left-side (1-alpha)-quantile: smallest sample value t with
// P(loss <= t) >= 1-alpha. With uniform weights this is the
// ceil((1-alpha)*N)-th order statistic. Ties share the quantile value.
double value_at_risk(const LossBatch& batch, double alpha);

// Tail expectation at level alpha, evaluated as nu + E[(loss-nu)+]/alpha at
// nu = value_at_risk. Coherent: monotone, translation-equivariant,
// positively homogeneous, and >= mean.
double cvar(const LossBatch& batch, double alpha);

// Feasible reweighting of a batch: zeta in [0, 1/alpha], sum_i w_i zeta_i = 1.
struct RiskEnvelopeDensity {
  std::vector<double> zeta;
  std::vector<double> weights;

  void validate(double alpha) const;  // checks box + normalization (1e-9)
};

struct DualResult {
  double value = 0.0;
  RiskEnvelopeDensity density;
};

// CVaR through its dual: max E[zeta * loss] over the envelope, solved by
// filling zeta = 1/alpha greedily from the largest loss down. Atoms tied at
// the level where the budget runs out share it weight-proportionally, so
// equal losses get equal zeta and the density normalizes exactly. Agrees
// with cvar() to float precision; kept as an independent route.
DualResult cvar_dual(const LossBatch& batch, double alpha);

// (mean + lambda * cvar) / (1 + lambda): convex blend interpolating mean
// (lambda=0) toward CVaR (lambda -> inf).
double mean_cvar(const LossBatch& batch, const RiskConfig& cfg);

// mean + lambda * cvar, the unnormalized companion.
double scaled_mean_cvar(const LossBatch& batch, const RiskConfig& cfg);

// Occupancy measure reweighted by xi = (1 + lambda*zeta*) / (1 + lambda),
// zeta* the dual maximizer for the trajectory-loss batch. xi averages to 1
// under the trajectory distribution, so the measure keeps total mass
// sum_{t<T} gamma^t. Satisfies E_measure[cost] = mean_cvar of the losses.
struct DistortedOccupancy {
  int state_count = 0;
  int action_count = 0;
  std::vector<double> measure;  // [s*A + a]
  std::vector<double> xi;       // per enumerated outcome
  double expected_cost = 0.0;   // sum_outcomes p*xi*discounted realized cost

  double total_mass() const;
  double operator()(int s, int a) const {
    return measure[static_cast<std::size_t>(s) * action_count + a];
  }
};

// Exact distorted occupancy by outcome enumeration. Throws the enumeration
// guard for oversized MDPs.
DistortedOccupancy distorted_occupancy(const TabularMdp& mdp,
                                       const PolicyFn& policy,
                                       const RiskConfig& cfg);

}  // namespace riskimit
