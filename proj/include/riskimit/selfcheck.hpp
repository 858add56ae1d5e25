#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "riskimit/environments.hpp"
#include "riskimit/risk.hpp"

namespace riskimit::selfcheck {

// Independent re-derivations of quantities the library computes elsewhere.
// Everything here is deliberately written against the definitions, not the
// production code paths, so agreement is evidence rather than tautology.
// Used by the test suites and the `verify` command.

// CVaR as the minimum of nu + E[(loss-nu)+]/alpha over a candidate set: a
// 1e-4-spaced grid on [min-1, max+1] plus the sample values themselves (the
// objective is piecewise linear with kinks exactly at samples, so including
// them makes the scan exact). O(grid + n log n).
double ru_grid_cvar(const LossBatch& batch, double alpha);

// CVaR as a box-constrained LP solved by brute-force vertex enumeration:
// every vertex has all-but-one zeta at a bound {0, 1/alpha} and at most one
// fractional coordinate fixed by the normalization. Exponential; requires
// batch.size() <= 20.
double cvar_vertex_lp(const LossBatch& batch, double alpha);

// Occupancy measure sum_{t<T} gamma^t P(s_t=s, a_t=a) by forward recursion
// over state marginals. Returns [s*A + a].
std::vector<double> occupancy_dp(const TabularMdp& mdp, const PolicyFn& policy);

// E[sum_{t<T} gamma^t cost_t] by the same forward recursion.
double mean_loss_dp(const TabularMdp& mdp, const PolicyFn& policy);

// Central finite differences of a scalar function, one coordinate at a time.
std::vector<double> central_difference(
    const std::function<double(std::span<const double>)>& f,
    std::span<const double> x, double h);

// Directional derivative (f(x+h d) - f(x-h d)) / (2h).
double directional_difference(
    const std::function<double(std::span<const double>)>& f,
    std::span<const double> x, std::span<const double> direction, double h);

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;  // worst-case error or failure description
};

// Estimator cross-checks on randomly weighted batches: cvar == RU grid ==
// dual value (1e-9), dual density feasibility, and coherence properties of
// cvar at 1e-10. Deterministic in `seed`.
std::vector<CheckResult> run_risk_checks(std::uint64_t seed, int batches = 1000);

// Discriminator gradient checks against directional finite differences; see
// surrogate.hpp. Added here so `verify` can run the full battery.
std::vector<CheckResult> run_gradient_checks(std::uint64_t seed,
                                             int fixtures = 100);

}  // namespace riskimit::selfcheck
