#include "riskimit/costnoise.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace riskimit {
namespace {

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return acc;
}

}  // namespace

std::vector<StateAction> dataset_pairs(std::span<const Trajectory> trajs) {
  std::vector<StateAction> pairs;
  for (const auto& t : trajs)
    for (int i = 0; i < t.step_count(); ++i)
      pairs.push_back({t.states[i], t.actions[i]});
  return pairs;
}

std::vector<double> encode_pair(std::span<const double> state, int action,
                                int action_count) {
  if (action < 0 || action >= action_count)
    throw std::invalid_argument("encode_pair: action out of range");
  std::vector<double> enc(state.begin(), state.end());
  enc.resize(state.size() + action_count, 0.0);
  enc[state.size() + action] = 1.0;
  return enc;
}

void ClusterModel::validate() const {
  if (centroids.empty()) throw std::invalid_argument("ClusterModel: empty");
  if (weights.size() != centroids.size())
    throw std::invalid_argument("ClusterModel: one weight per centroid");
  if (action_count < 1)
    throw std::invalid_argument("ClusterModel: action_count must be positive");
  const std::size_t dim = centroids.front().size();
  if (dim <= static_cast<std::size_t>(action_count))
    throw std::invalid_argument(
        "ClusterModel: centroid dimension must exceed the one-hot width");
  double total = 0.0;
  for (const auto& c : centroids)
    if (c.size() != dim)
      throw std::invalid_argument("ClusterModel: ragged centroids");
  for (double w : weights) {
    if (!(w >= 0.0))
      throw std::invalid_argument("ClusterModel: negative weight");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-12)
    throw std::invalid_argument("ClusterModel: weights must sum to 1");
}

int ClusterModel::nearest(std::span<const double> encoded) const {
  if (encoded.size() != centroids.front().size())
    throw std::invalid_argument("ClusterModel: query dimension mismatch");
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (int j = 0; j < k(); ++j) {
    const double d = squared_distance(encoded, centroids[j]);
    if (d < best_d) {
      best_d = d;
      best = j;
    }
  }
  return best;
}

int ClusterModel::nearest(std::span<const double> state, int action) const {
  return nearest(encode_pair(state, action, action_count));
}

nlohmann::json ClusterModel::to_json() const {
  return {{"format_version", 1},
          {"centroids", centroids},
          {"weights", weights},
          {"action_count", action_count}};
}

ClusterModel ClusterModel::from_json(const nlohmann::json& j) {
  if (j.at("format_version").get<int>() != 1)
    throw std::runtime_error("ClusterModel: unsupported format_version");
  ClusterModel model;
  model.centroids = j.at("centroids").get<std::vector<std::vector<double>>>();
  model.weights = j.at("weights").get<std::vector<double>>();
  model.action_count = j.at("action_count").get<int>();
  model.validate();
  return model;
}

ClusterModel fit_kmeans(std::span<const StateAction> pairs, int k,
                        int action_count, RngStream& rng, int max_iters) {
  if (k < 1) throw std::invalid_argument("fit_kmeans: k must be positive");
  if (pairs.size() < static_cast<std::size_t>(k))
    throw std::invalid_argument("fit_kmeans: need at least k pairs");
  if (max_iters < 1)
    throw std::invalid_argument("fit_kmeans: max_iters must be positive");

  std::vector<std::vector<double>> points(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i)
    points[i] = encode_pair(pairs[i].state, pairs[i].action, action_count);
  const std::size_t n = points.size();
  const std::size_t dim = points.front().size();
  for (const auto& p : points)
    if (p.size() != dim)
      throw std::invalid_argument("fit_kmeans: ragged state dimensions");

  // k-means++ seeding: first centroid uniform, the rest proportional to the
  // squared distance from the nearest centroid chosen so far.
  std::vector<std::vector<double>> centroids;
  centroids.reserve(k);
  centroids.push_back(points[rng.uniform_int(static_cast<int>(n))]);
  std::vector<double> d2(n);
  while (centroids.size() < static_cast<std::size_t>(k)) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& c : centroids)
        best = std::min(best, squared_distance(points[i], c));
      d2[i] = best;
      total += best;
    }
    if (total == 0.0) {
      // All points already covered; any duplicate seed will be repaired by
      // the empty-cluster rule below.
      centroids.push_back(points[rng.uniform_int(static_cast<int>(n))]);
      continue;
    }
    std::vector<double> probs(n);
    for (std::size_t i = 0; i < n; ++i) probs[i] = d2[i] / total;
    centroids.push_back(points[rng.categorical(probs)]);
  }

  std::vector<int> assign(n, -1);
  std::vector<int> counts(k);
  for (int round = 0; round < max_iters; ++round) {
    bool changed = false;
    std::fill(counts.begin(), counts.end(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      int best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (int j = 0; j < k; ++j) {
        const double d = squared_distance(points[i], centroids[j]);
        if (d < best_d) {
          best_d = d;
          best = j;
        }
      }
      changed = changed || assign[i] != best;
      assign[i] = best;
      ++counts[best];
    }

    for (int j = 0; j < k; ++j) {
      if (counts[j] > 0) continue;
      // Re-seed a starved cluster at the point farthest from its nearest
      // centroid, then let the next round re-assign.
      std::size_t far = 0;
      double far_d = -1.0;
      for (std::size_t i = 0; i < n; ++i) {
        double best = std::numeric_limits<double>::infinity();
        for (const auto& c : centroids)
          best = std::min(best, squared_distance(points[i], c));
        if (best > far_d) {
          far_d = best;
          far = i;
        }
      }
      centroids[j] = points[far];
      changed = true;
    }

    for (int j = 0; j < k; ++j) {
      if (counts[j] == 0) continue;
      std::vector<double> mean(dim, 0.0);
      for (std::size_t i = 0; i < n; ++i)
        if (assign[i] == j)
          for (std::size_t d = 0; d < dim; ++d) mean[d] += points[i][d];
      for (std::size_t d = 0; d < dim; ++d) mean[d] /= counts[j];
      centroids[j] = std::move(mean);
    }
    if (!changed) break;
  }

  // Final hard assignment fixes the weights.
  std::fill(counts.begin(), counts.end(), 0);
  for (std::size_t i = 0; i < n; ++i) {
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (int j = 0; j < k; ++j) {
      const double d = squared_distance(points[i], centroids[j]);
      if (d < best_d) {
        best_d = d;
        best = j;
      }
    }
    ++counts[best];
  }
  ClusterModel model;
  model.centroids = std::move(centroids);
  model.weights.resize(k);
  for (int j = 0; j < k; ++j)
    model.weights[j] = static_cast<double>(counts[j]) / static_cast<double>(n);
  model.action_count = action_count;
  model.validate();
  return model;
}

std::string noise_variant_name(NoiseVariant v) {
  return v == NoiseVariant::kHopperStyle ? "hopper_style" : "walker_style";
}

NoiseVariant noise_variant_from_name(const std::string& name) {
  if (name == "hopper_style") return NoiseVariant::kHopperStyle;
  if (name == "walker_style") return NoiseVariant::kWalkerStyle;
  throw std::invalid_argument("unknown noise variant: " + name);
}

double noise_multiplier(double weight, NoiseVariant variant, double z_abs) {
  if (!(weight >= 0.0 && weight <= 1.0))
    throw std::invalid_argument("noise_multiplier: weight outside [0, 1]");
  if (variant == NoiseVariant::kHopperStyle)
    return z_abs / (0.2 + std::sqrt(weight));
  return 0.4 * z_abs / std::sqrt(std::max(0.01, weight - 0.02));
}

double noisy_cost(const ClusterModel& model, std::span<const double> state,
                  int action, double base_cost, NoiseVariant variant,
                  RngStream& rng) {
  const double z_abs = std::abs(rng.truncated_normal(-10.0, 10.0));
  const double w = model.weights[model.nearest(state, action)];
  return noise_multiplier(w, variant, z_abs) * base_cost;
}

NoisyCostEnv::NoisyCostEnv(const Environment& inner, ClusterModel model,
                           NoiseVariant variant)
    : inner_(inner), model_(std::move(model)), variant_(variant) {
  model_.validate();
  spec_ = inner.spec();
  if (model_.action_count != spec_.action_count ||
      model_.centroids.front().size() !=
          static_cast<std::size_t>(spec_.observation_dim +
                                   spec_.action_count))
    throw std::invalid_argument(
        "NoisyCostEnv: cluster model does not match the environment");
  spec_.name += "+" + noise_variant_name(variant);
}

std::vector<double> NoisyCostEnv::initial_state(RngStream& rng) const {
  return inner_.initial_state(rng);
}

StepResult NoisyCostEnv::step(std::span<const double> state, int action,
                              RngStream& rng) const {
  StepResult result = inner_.step(state, action, rng);
  // The draw happens even for a zero base cost, so the stream position, and
  // with it the downstream dynamics, never depends on the costs observed.
  result.cost = noisy_cost(model_, state, action, result.cost, variant_, rng);
  return result;
}

}  // namespace riskimit
