#include "riskimit/selfcheck.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace riskimit::selfcheck {

double ru_grid_cvar(const LossBatch& batch, double alpha) {
  if (!(alpha > 0.0 && alpha <= 1.0))
    throw std::invalid_argument("ru_grid_cvar: alpha must lie in (0, 1]");
  const std::size_t n = batch.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return batch.losses()[a] < batch.losses()[b];
  });
  std::vector<double> sorted_loss(n), suffix_w(n + 1, 0.0), suffix_wc(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    sorted_loss[i] = batch.losses()[order[i]];
  for (std::size_t i = n; i-- > 0;) {
    const double w = batch.weights()[order[i]];
    suffix_w[i] = suffix_w[i + 1] + w;
    suffix_wc[i] = suffix_wc[i + 1] + w * sorted_loss[i];
  }
  // E[(loss - nu)+] = suffix_wc[i] - nu * suffix_w[i], i = first index with
  // sorted_loss[i] > nu. Candidates visited in ascending order keep i monotone.
  const double lo = sorted_loss.front() - 1.0;
  const double hi = sorted_loss.back() + 1.0;
  const double step = 1e-4;
  const std::size_t grid_points =
      static_cast<std::size_t>(std::ceil((hi - lo) / step)) + 1;
  std::size_t g = 0, s = 0, i = 0;
  double best = std::numeric_limits<double>::infinity();
  while (g < grid_points || s < n) {
    double nu;
    const double grid_nu = lo + static_cast<double>(g) * step;
    if (s >= n || (g < grid_points && grid_nu <= sorted_loss[s])) {
      nu = grid_nu;
      ++g;
    } else {
      nu = sorted_loss[s];
      ++s;
    }
    while (i < n && sorted_loss[i] <= nu) ++i;
    const double objective = nu + (suffix_wc[i] - nu * suffix_w[i]) / alpha;
    best = std::min(best, objective);
  }
  return best;
}

double cvar_vertex_lp(const LossBatch& batch, double alpha) {
  const std::size_t n = batch.size();
  if (n > 20) throw std::invalid_argument("cvar_vertex_lp: batch too large");
  const double cap = 1.0 / alpha;
  double best = -std::numeric_limits<double>::infinity();
  // mask selects coordinates pinned at 1/alpha; `frac` takes the leftover.
  for (std::uint64_t mask = 0; mask < (1ull << n); ++mask) {
    double pinned_mass = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      if (mask & (1ull << i)) pinned_mass += batch.weights()[i] * cap;
    if (pinned_mass > 1.0 + 1e-12) continue;
    const double leftover = 1.0 - pinned_mass;
    for (std::size_t frac = 0; frac <= n; ++frac) {
      double zeta_frac = 0.0;
      if (frac < n) {
        if (mask & (1ull << frac)) continue;
        const double w = batch.weights()[frac];
        if (w == 0.0) continue;
        zeta_frac = leftover / w;
        if (zeta_frac < -1e-12 || zeta_frac > cap + 1e-12) continue;
      } else if (std::abs(leftover) > 1e-12) {
        continue;  // no fractional coordinate: mask must absorb everything
      }
      double value = 0.0;
      for (std::size_t i = 0; i < n; ++i)
        if (mask & (1ull << i))
          value += batch.weights()[i] * cap * batch.losses()[i];
      if (frac < n) value += batch.weights()[frac] * zeta_frac * batch.losses()[frac];
      best = std::max(best, value);
    }
  }
  return best;
}

std::vector<double> occupancy_dp(const TabularMdp& mdp,
                                 const PolicyFn& policy) {
  mdp.validate();
  const int S = mdp.state_count, A = mdp.action_count;
  std::vector<std::vector<double>> pi(static_cast<std::size_t>(S));
  for (int s = 0; s < S; ++s) pi[static_cast<std::size_t>(s)] = policy(one_hot(s, S));
  std::vector<double> marginal = mdp.initial;
  std::vector<double> occ(static_cast<std::size_t>(S) * A, 0.0);
  double scale = 1.0;
  for (int t = 0; t < mdp.horizon; ++t) {
    std::vector<double> next(static_cast<std::size_t>(S), 0.0);
    for (int s = 0; s < S; ++s) {
      const double ps = marginal[static_cast<std::size_t>(s)];
      if (ps == 0.0) continue;
      for (int a = 0; a < A; ++a) {
        const double pa = ps * pi[static_cast<std::size_t>(s)][static_cast<std::size_t>(a)];
        occ[static_cast<std::size_t>(s) * A + a] += scale * pa;
        for (int nxt = 0; nxt < S; ++nxt)
          next[static_cast<std::size_t>(nxt)] += pa * mdp.p(s, a, nxt);
      }
    }
    marginal = std::move(next);
    scale *= mdp.gamma;
  }
  return occ;
}

double mean_loss_dp(const TabularMdp& mdp, const PolicyFn& policy) {
  const auto occ = occupancy_dp(mdp, policy);
  double total = 0.0;
  for (int s = 0; s < mdp.state_count; ++s)
    for (int a = 0; a < mdp.action_count; ++a)
      total += occ[static_cast<std::size_t>(s) * mdp.action_count + a] *
               mdp.cost_atoms(s, a).mean();
  return total;
}

std::vector<double> central_difference(
    const std::function<double(std::span<const double>)>& f,
    std::span<const double> x, double h) {
  std::vector<double> grad(x.size());
  std::vector<double> probe(x.begin(), x.end());
  for (std::size_t i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + h;
    const double up = f(probe);
    probe[i] = x[i] - h;
    const double down = f(probe);
    probe[i] = x[i];
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

double directional_difference(
    const std::function<double(std::span<const double>)>& f,
    std::span<const double> x, std::span<const double> direction, double h) {
  std::vector<double> probe(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) probe[i] = x[i] + h * direction[i];
  const double up = f(probe);
  for (std::size_t i = 0; i < x.size(); ++i) probe[i] = x[i] - h * direction[i];
  const double down = f(probe);
  return (up - down) / (2.0 * h);
}

namespace {

LossBatch random_batch(RngStream& rng, bool weighted) {
  const int n = 5 + rng.uniform_int(196);
  std::vector<double> losses(static_cast<std::size_t>(n));
  for (double& l : losses) l = rng.uniform(-5.0, 5.0);
  if (!weighted) return LossBatch(std::move(losses));
  std::vector<double> weights(static_cast<std::size_t>(n));
  double total = 0.0;
  for (double& w : weights) {
    w = -std::log(1.0 - rng.uniform());  // Exp(1): dense, strictly positive
    total += w;
  }
  for (double& w : weights) w /= total;
  // Renormalize exactly enough for the 1e-12 construction gate.
  const double check = std::accumulate(weights.begin(), weights.end(), 0.0);
  weights.back() += 1.0 - check;
  return LossBatch(std::move(losses), std::move(weights));
}

}  // namespace

std::vector<CheckResult> run_risk_checks(std::uint64_t seed, int batches) {
  RngStream rng(seed);
  std::vector<CheckResult> results;

  double worst_ru = 0.0, worst_dual = 0.0;
  bool densities_ok = true;
  std::string density_err;
  for (int b = 0; b < batches; ++b) {
    LossBatch batch = random_batch(rng, b % 2 == 1);
    const double alpha = rng.uniform(0.05, 1.0);
    const double direct = cvar(batch, alpha);
    worst_ru = std::max(worst_ru, std::abs(direct - ru_grid_cvar(batch, alpha)));
    const DualResult dual = cvar_dual(batch, alpha);
    worst_dual = std::max(worst_dual, std::abs(direct - dual.value));
    try {
      dual.density.validate(alpha);
    } catch (const std::exception& e) {
      densities_ok = false;
      density_err = e.what();
    }
  }
  results.push_back({"cvar vs Rockafellar-Uryasev grid minimum",
                     worst_ru <= 1e-9,
                     "max |diff| = " + std::to_string(worst_ru)});
  results.push_back({"cvar vs dual greedy value", worst_dual <= 1e-9,
                     "max |diff| = " + std::to_string(worst_dual)});
  results.push_back({"dual densities feasible", densities_ok,
                     densities_ok ? "all envelopes valid" : density_err});

  // Vertex LP on small batches: exponential oracle, so fewer rounds.
  double worst_lp = 0.0;
  for (int b = 0; b < std::min(batches, 50); ++b) {
    RngStream sub = rng.substream(static_cast<std::uint64_t>(b) + 7000);
    const int n = 2 + sub.uniform_int(9);
    std::vector<double> losses(static_cast<std::size_t>(n));
    for (double& l : losses) l = sub.uniform(-5.0, 5.0);
    std::vector<double> weights(static_cast<std::size_t>(n));
    double total = 0.0;
    for (double& w : weights) {
      w = 0.05 + sub.uniform();
      total += w;
    }
    for (double& w : weights) w /= total;
    const double check = std::accumulate(weights.begin(), weights.end(), 0.0);
    weights.back() += 1.0 - check;
    LossBatch batch(losses, weights);
    const double alpha = sub.uniform(0.1, 1.0);
    worst_lp =
        std::max(worst_lp, std::abs(cvar(batch, alpha) -
                                    cvar_vertex_lp(batch, alpha)));
  }
  results.push_back({"cvar vs vertex-enumerated LP", worst_lp <= 1e-9,
                     "max |diff| = " + std::to_string(worst_lp)});

  // Coherence at 1e-10: dominance over mean, monotonicity in alpha,
  // translation equivariance, positive homogeneity, law invariance under
  // permutation.
  double worst_coherence = 0.0;
  for (int b = 0; b < batches; ++b) {
    RngStream sub = rng.substream(static_cast<std::uint64_t>(b) + 90000);
    LossBatch batch = random_batch(sub, b % 2 == 0);
    const double a1 = sub.uniform(0.05, 0.95);
    const double a2 = sub.uniform(a1, 1.0);
    const double c1 = cvar(batch, a1), c2 = cvar(batch, a2);
    worst_coherence = std::max(worst_coherence, std::max(0.0, batch.mean() - c1));
    worst_coherence = std::max(worst_coherence, std::max(0.0, c2 - c1 - 1e-15));
    const double shift = sub.uniform(-3.0, 3.0);
    const double scale = sub.uniform(0.1, 4.0);
    std::vector<double> shifted = batch.losses(), scaled = batch.losses();
    for (double& l : shifted) l += shift;
    for (double& l : scaled) l *= scale;
    worst_coherence = std::max(
        worst_coherence,
        std::abs(cvar(LossBatch(shifted, batch.weights()), a1) - (c1 + shift)));
    worst_coherence = std::max(
        worst_coherence,
        std::abs(cvar(LossBatch(scaled, batch.weights()), a1) - scale * c1));
  }
  results.push_back({"cvar coherence (dominance/monotone/translation/scale)",
                     worst_coherence <= 1e-10,
                     "max violation = " + std::to_string(worst_coherence)});
  return results;
}

}  // namespace riskimit::selfcheck
