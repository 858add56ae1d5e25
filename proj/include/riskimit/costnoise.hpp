#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "riskimit/environments.hpp"
#include "riskimit/rng.hpp"

namespace riskimit {

struct StateAction {
  std::vector<double> state;
  int action = 0;
};

// Pull every (state, action) pair out of a trajectory batch; this is what
// the clustering is fitted on.
std::vector<StateAction> dataset_pairs(std::span<const Trajectory> trajs);

// K-means summary of where the expert spends its time, over the
// concatenated (state, one-hot action) encoding. weights are the cluster
// membership fractions.
struct ClusterModel {
  std::vector<std::vector<double>> centroids;
  std::vector<double> weights;
  int action_count = 0;

  int k() const { return static_cast<int>(centroids.size()); }
  void validate() const;

  // Index of the centroid nearest in Euclidean distance; ties take the
  // lowest index.
  int nearest(std::span<const double> encoded) const;
  int nearest(std::span<const double> state, int action) const;

  nlohmann::json to_json() const;
  static ClusterModel from_json(const nlohmann::json& j);
};

std::vector<double> encode_pair(std::span<const double> state, int action,
                                int action_count);

// Lloyd's algorithm with k-means++ seeding. Stops when assignments stop
// changing or after max_iters rounds. A cluster that loses all members is
// re-seeded at the point farthest from its nearest surviving centroid, the
// standard repair. Requires pairs.size() >= k.
ClusterModel fit_kmeans(std::span<const StateAction> pairs, int k,
                        int action_count, RngStream& rng, int max_iters = 100);

enum class NoiseVariant { kHopperStyle, kWalkerStyle };

std::string noise_variant_name(NoiseVariant v);
NoiseVariant noise_variant_from_name(const std::string& name);

// Multiplier applied to the base cost given the weight of the matched
// cluster and |Z|. hopper style: |Z| / (0.2 + sqrt(w)); walker style:
// 0.4 |Z| / sqrt(max(0.01, w - 0.02)). Rarely-visited clusters (small w)
// get the larger scale.
double noise_multiplier(double weight, NoiseVariant variant, double z_abs);

// Scales base_cost by the multiplier of the nearest cluster, with
// Z ~ standard normal truncated to [-10, 10]. Always consumes exactly one
// truncated-normal draw, so the stream position never depends on the cost
// values seen along the way.
double noisy_cost(const ClusterModel& model, std::span<const double> state,
                  int action, double base_cost, NoiseVariant variant,
                  RngStream& rng);

// Environment wrapper that reroutes every step cost through noisy_cost.
// Dynamics are untouched; the noise draw comes from the same per-step
// stream, after the inner step's own draws.
class NoisyCostEnv : public Environment {
 public:
  NoisyCostEnv(const Environment& inner, ClusterModel model,
               NoiseVariant variant);

  const EnvSpec& spec() const override { return spec_; }
  std::vector<double> initial_state(RngStream& rng) const override;
  StepResult step(std::span<const double> state, int action,
                  RngStream& rng) const override;

 private:
  const Environment& inner_;
  ClusterModel model_;
  NoiseVariant variant_;
  EnvSpec spec_;
};

}  // namespace riskimit
