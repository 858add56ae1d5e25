#include "riskimit/harness.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace riskimit {
namespace {

struct SeedSummary {
  std::uint64_t seed;
  double values[4];
};

double sorted_mean(std::vector<double>& v) {
  std::sort(v.begin(), v.end());
  double sum = 0.0;
  for (double x : v) sum += x;
  return sum / static_cast<double>(v.size());
}

}  // namespace

nlohmann::json PolicyStats::to_json() const {
  return {{"mean", mean},
          {"var_alpha", var_alpha},
          {"cvar_alpha", cvar_alpha},
          {"rho_lambda", rho_lambda}};
}

PolicyStats PolicyStats::from_json(const nlohmann::json& j) {
  PolicyStats s;
  s.mean = j.at("mean").get<double>();
  s.var_alpha = j.at("var_alpha").get<double>();
  s.cvar_alpha = j.at("cvar_alpha").get<double>();
  s.rho_lambda = j.at("rho_lambda").get<double>();
  return s;
}

PolicyStats evaluate_policy(const Environment& env, const PolicyFn& policy,
                            int n_traj, const RiskConfig& risk,
                            const RngStream& master, int threads) {
  risk.validate();
  const int min_traj = static_cast<int>(std::ceil(2.0 / risk.alpha - 1e-12));
  if (n_traj < min_traj)
    throw std::invalid_argument(
        "evaluate_policy: need at least ceil(2/alpha) = " +
        std::to_string(min_traj) + " trajectories");
  const auto batch = sample_batch(env, policy, n_traj, env.spec().horizon,
                                  master, 0, threads);
  const LossBatch losses = LossBatch::from_trajectories(batch);
  PolicyStats stats;
  stats.mean = losses.mean();
  stats.var_alpha = value_at_risk(losses, risk.alpha);
  stats.cvar_alpha = cvar(losses, risk.alpha);
  stats.rho_lambda = mean_cvar(losses, risk);
  return stats;
}

std::string aggregation_mode_name(AggregationMode mode) {
  return mode == AggregationMode::kLastKIterations ? "last_k_iterations"
                                                   : "top_m_of_last_k";
}

AggregationMode aggregation_mode_from_name(const std::string& name) {
  if (name == "last_k_iterations") return AggregationMode::kLastKIterations;
  if (name == "top_m_of_last_k") return AggregationMode::kTopMOfLastK;
  throw std::invalid_argument("unknown aggregation mode: " + name);
}

double record_criterion(const IterationRecord& rec, int criterion) {
  switch (criterion) {
    case 0: return rec.mean;
    case 1: return rec.var_alpha;
    case 2: return rec.cvar_alpha;
    case 3: return rec.rho_lambda;
  }
  throw std::invalid_argument("criterion index out of range");
}

EvaluationReport aggregate(std::span<const SeedRun> runs, AggregationMode mode,
                           int k, int m) {
  if (runs.empty()) throw std::invalid_argument("aggregate: no runs");
  if (k < 1) throw std::invalid_argument("aggregate: k must be positive");
  const int m_eff = mode == AggregationMode::kTopMOfLastK ? m : k;
  if (m_eff < 1 || m_eff > k)
    throw std::invalid_argument("aggregate: m must lie in [1, k]");
  for (const auto& run : runs)
    if (run.records.size() < static_cast<std::size_t>(k))
      throw std::invalid_argument("aggregate: run '" + run.algo +
                                  "' has fewer than k iterations");

  // Group runs by algo, first appearance fixing the output order.
  std::vector<std::string> algos;
  for (const auto& run : runs)
    if (std::find(algos.begin(), algos.end(), run.algo) == algos.end())
      algos.push_back(run.algo);

  EvaluationReport report;
  report.mode = mode;
  report.k = k;
  report.m = m_eff;
  for (const auto& algo : algos) {
    std::vector<SeedSummary> summaries;
    for (const auto& run : runs) {
      if (run.algo != algo) continue;
      SeedSummary summary{run.seed, {}};
      for (int c = 0; c < 4; ++c) {
        std::vector<double> window;
        window.reserve(k);
        for (std::size_t i = run.records.size() - k; i < run.records.size();
             ++i)
          window.push_back(record_criterion(run.records[i], c));
        std::sort(window.begin(), window.end());
        window.resize(m_eff);  // the m lowest; everything for last_k
        summary.values[c] = sorted_mean(window);
      }
      summaries.push_back(summary);
    }
    for (int c = 0; c < 4; ++c) {
      std::vector<double> per_seed(summaries.size());
      for (std::size_t i = 0; i < summaries.size(); ++i)
        per_seed[i] = summaries[i].values[c];
      const double estimate = sorted_mean(per_seed);
      double halfwidth = 0.0;
      if (per_seed.size() > 1) {
        double ss = 0.0;
        for (double x : per_seed) ss += (x - estimate) * (x - estimate);
        const double sd = std::sqrt(ss / static_cast<double>(per_seed.size() - 1));
        halfwidth = 1.96 * sd / std::sqrt(static_cast<double>(per_seed.size()));
      }
      report.rows.push_back({algo, kCriteria[c], estimate, halfwidth});
    }
  }
  return report;
}

std::string format_double(double value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, value,
                                 std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

nlohmann::json EvaluationReport::to_json() const {
  nlohmann::json rows_json = nlohmann::json::array();
  for (const auto& row : rows)
    rows_json.push_back({{"algo", row.algo},
                         {"criterion", row.criterion},
                         {"estimate", row.estimate},
                         {"ci_halfwidth", row.ci_halfwidth}});
  return {{"format_version", 1},
          {"mode", aggregation_mode_name(mode)},
          {"k", k},
          {"m", m},
          {"rows", rows_json}};
}

void emit_report(const EvaluationReport& report, ReportFormat format,
                 const std::string& path, const nlohmann::json& config,
                 std::uint64_t seed) {
  std::ofstream out(path, std::ios::binary);  // binary keeps LF endings
  if (!out) throw std::runtime_error("cannot open for write: " + path);
  if (format == ReportFormat::kJson) {
    nlohmann::json j = report.to_json();
    j["config"] = config;
    j["seed"] = seed;
    out << j.dump(2) << '\n';
  } else {
    out << "# config=" << config.dump() << '\n';
    out << "# seed=" << seed << '\n';
    out << "algo,criterion,estimate,ci_halfwidth\n";
    for (const auto& row : report.rows)
      out << row.algo << ',' << row.criterion << ','
          << format_double(row.estimate) << ','
          << format_double(row.ci_halfwidth) << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

void emit_curves_csv(const std::string& path,
                     std::span<const IterationRecord> records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for write: " + path);
  out << "iteration,criterion,value\n";
  for (const auto& rec : records)
    for (int c = 0; c < 4; ++c)
      out << rec.iter << ',' << kCriteria[c] << ','
          << format_double(record_criterion(rec, c)) << '\n';
  if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace riskimit
