#include "riskimit/trajectory.hpp"

#include <fstream>
#include <stdexcept>

namespace riskimit {

namespace {
constexpr int kDatasetFormatVersion = 1;
}

void EnvSpec::validate() const {
  if (name.empty()) throw std::invalid_argument("EnvSpec: empty name");
  if (observation_dim <= 0)
    throw std::invalid_argument("EnvSpec: observation_dim must be positive");
  if (action_count <= 0)
    throw std::invalid_argument("EnvSpec: action_count must be positive");
  if (horizon <= 0)
    throw std::invalid_argument("EnvSpec: horizon must be positive");
  if (!(gamma >= 0.0 && gamma < 1.0))
    throw std::invalid_argument("EnvSpec: gamma must lie in [0, 1)");
}

double Trajectory::discounted_loss() const {
  double total = 0.0;
  double scale = 1.0;
  for (double c : costs) {
    total += scale * c;
    scale *= gamma;
  }
  return total;
}

void Trajectory::validate() const {
  if (states.size() != actions.size() + 1)
    throw std::invalid_argument("Trajectory: need one more state than actions");
  if (costs.size() != actions.size())
    throw std::invalid_argument("Trajectory: one cost per action");
  if (states.empty()) throw std::invalid_argument("Trajectory: empty");
  const std::size_t dim = states.front().size();
  for (const auto& s : states)
    if (s.size() != dim)
      throw std::invalid_argument("Trajectory: ragged state dimensions");
  for (int a : actions)
    if (a < 0) throw std::invalid_argument("Trajectory: negative action");
}

nlohmann::json DatasetHeader::to_json() const {
  return {{"format_version", format_version},
          {"env", env_name},
          {"seed", seed},
          {"policy_checksum", policy_checksum},
          {"config", config}};
}

DatasetHeader DatasetHeader::from_json(const nlohmann::json& j) {
  DatasetHeader h;
  h.format_version = j.at("format_version").get<int>();
  h.env_name = j.at("env").get<std::string>();
  h.seed = j.at("seed").get<std::uint64_t>();
  h.policy_checksum = j.value("policy_checksum", std::string{});
  h.config = j.value("config", nlohmann::json{});
  return h;
}

void write_trajectory_dataset(const std::filesystem::path& path,
                              const DatasetHeader& header,
                              const std::vector<Trajectory>& trajectories) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for write: " + path.string());
  out << header.to_json().dump() << '\n';
  for (const auto& traj : trajectories) {
    traj.validate();
    nlohmann::json rec{{"states", traj.states},
                       {"actions", traj.actions},
                       {"costs", traj.costs},
                       {"gamma", traj.gamma},
                       {"env_name", header.env_name},
                       {"seed", header.seed}};
    out << rec.dump() << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

TrajectoryDataset read_trajectory_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open: " + path.string());
  std::string line;
  if (!std::getline(in, line))
    throw std::runtime_error("empty dataset: " + path.string());
  TrajectoryDataset ds;
  ds.header = DatasetHeader::from_json(nlohmann::json::parse(line));
  if (ds.header.format_version != kDatasetFormatVersion)
    throw std::runtime_error("unsupported dataset format_version " +
                             std::to_string(ds.header.format_version));
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto rec = nlohmann::json::parse(line);
    Trajectory t;
    t.states = rec.at("states").get<std::vector<std::vector<double>>>();
    t.actions = rec.at("actions").get<std::vector<int>>();
    t.costs = rec.at("costs").get<std::vector<double>>();
    t.gamma = rec.at("gamma").get<double>();
    t.validate();
    ds.trajectories.push_back(std::move(t));
  }
  return ds;
}

}  // namespace riskimit
