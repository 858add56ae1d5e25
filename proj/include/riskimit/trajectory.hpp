#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

namespace riskimit {

struct EnvSpec {
  std::string name;
  int observation_dim = 0;
  int action_count = 0;
  int horizon = 0;       // steps per episode; rollouts pad out to this
  double gamma = 0.99;   // discount used for trajectory losses

  void validate() const;  // throws std::invalid_argument
};

// Fixed-horizon trajectory: T+1 states, T actions, T costs. Estimators
// downstream assume equal lengths across a batch, so rollouts pad
// early-terminated episodes (absorbing state, cost 0) instead of truncating.
struct Trajectory {
  std::vector<std::vector<double>> states;
  std::vector<int> actions;
  std::vector<double> costs;
  double gamma = 1.0;

  int step_count() const { return static_cast<int>(actions.size()); }

  // sum_t gamma^t costs[t]
  double discounted_loss() const;

  void validate() const;
};

// Line-delimited JSON dataset. First line is a header carrying provenance;
// each following line is one trajectory record.
struct DatasetHeader {
  int format_version = 1;
  std::string env_name;
  std::uint64_t seed = 0;
  std::string policy_checksum;  // empty when not policy-generated
  nlohmann::json config;        // resolved run config, may be null

  nlohmann::json to_json() const;
  static DatasetHeader from_json(const nlohmann::json& j);
};

void write_trajectory_dataset(const std::filesystem::path& path,
                              const DatasetHeader& header,
                              const std::vector<Trajectory>& trajectories);

struct TrajectoryDataset {
  DatasetHeader header;
  std::vector<Trajectory> trajectories;
};

// Throws std::runtime_error on missing file, bad header, or version mismatch.
TrajectoryDataset read_trajectory_dataset(const std::filesystem::path& path);

}  // namespace riskimit
