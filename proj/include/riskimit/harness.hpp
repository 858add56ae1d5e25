#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "riskimit/environments.hpp"
#include "riskimit/risk.hpp"
#include "riskimit/train.hpp"

namespace riskimit {

struct PolicyStats {
  double mean = 0.0;
  double var_alpha = 0.0;
  double cvar_alpha = 0.0;
  double rho_lambda = 0.0;

  nlohmann::json to_json() const;
  static PolicyStats from_json(const nlohmann::json& j);
};

// Fresh-rollout evaluation on the true environment costs. Requires
// n_traj >= ceil(2/alpha) so the tail quantile rests on at least two
// samples. Rollouts draw from substreams of `master` per the batch
// contract, so results are thread-count invariant.
PolicyStats evaluate_policy(const Environment& env, const PolicyFn& policy,
                            int n_traj, const RiskConfig& risk,
                            const RngStream& master, int threads = 1);

// One training run's log under a named algorithm and seed; the aggregation
// input.
struct SeedRun {
  std::string algo;
  std::uint64_t seed = 0;
  std::vector<IterationRecord> records;
};

enum class AggregationMode { kLastKIterations, kTopMOfLastK };

std::string aggregation_mode_name(AggregationMode mode);
AggregationMode aggregation_mode_from_name(const std::string& name);

struct AggregateRow {
  std::string algo;
  std::string criterion;  // mean | var_alpha | cvar_alpha | rho_lambda
  double estimate = 0.0;
  double ci_halfwidth = 0.0;  // 1.96 * sd / sqrt(seed count)
};

struct EvaluationReport {
  AggregationMode mode = AggregationMode::kLastKIterations;
  int k = 0;
  int m = 0;  // meaningful for kTopMOfLastK only
  std::vector<AggregateRow> rows;

  nlohmann::json to_json() const;
};

inline constexpr const char* kCriteria[] = {"mean", "var_alpha", "cvar_alpha",
                                            "rho_lambda"};
double record_criterion(const IterationRecord& rec, int criterion);

// Per algo (first-appearance order) and per criterion: reduce each seed's
// last k iterations to one number, then average over seeds with the 1.96
// normal half-width. last_k averages all k values; top_m averages the m
// lowest of them, selected independently per criterion (cost convention:
// lower is better). Per-seed reductions sort values before summing and the
// seed averages sort per-seed numbers likewise, so the output is bitwise
// invariant under any reordering of seeds or runs.
EvaluationReport aggregate(std::span<const SeedRun> runs, AggregationMode mode,
                           int k, int m = 0);

enum class ReportFormat { kCsv, kJson };

// Writes the report with the resolved config and master seed embedded: CSV
// carries them as leading '# config=' / '# seed=' comment lines above the
// header row; JSON as fields. Numbers are emitted with 17 significant
// digits, which round-trips doubles exactly.
void emit_report(const EvaluationReport& report, ReportFormat format,
                 const std::string& path, const nlohmann::json& config,
                 std::uint64_t seed);

// Plot-ready long-format curves: one (iteration, criterion, value) row per
// record and criterion.
void emit_curves_csv(const std::string& path,
                     std::span<const IterationRecord> records);

// Locale-independent shortest-exact double formatting used by the CSV
// emitters (17 significant digits, '.' decimal point).
std::string format_double(double value);

}  // namespace riskimit
