#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "riskimit/commands.hpp"
#include "riskimit/config.hpp"
#include "riskimit/risk.hpp"
#include "riskimit/selfcheck.hpp"

namespace py = pybind11;
using namespace pybind11::literals;

namespace {

riskimit::LossBatch make_batch(std::vector<double> losses,
                               std::optional<std::vector<double>> weights) {
  if (weights) return {std::move(losses), std::move(*weights)};
  return riskimit::LossBatch(std::move(losses));
}

}  // namespace

PYBIND11_MODULE(_riskimit, m) {
  m.doc() =
      "Core operations of the risk-sensitive adversarial imitation "
      "workbench. Configs travel as JSON strings; the riskimit package "
      "wraps them as dicts.";

  m.def(
      "value_at_risk",
      [](std::vector<double> losses, double alpha,
         std::optional<std::vector<double>> weights) {
        return riskimit::value_at_risk(
            make_batch(std::move(losses), std::move(weights)), alpha);
      },
      "Left-side (1-alpha)-quantile of a weighted loss sample.", "losses"_a,
      "alpha"_a, "weights"_a = py::none());

  m.def(
      "cvar",
      [](std::vector<double> losses, double alpha,
         std::optional<std::vector<double>> weights) {
        return riskimit::cvar(
            make_batch(std::move(losses), std::move(weights)), alpha);
      },
      "Expected loss in the alpha-tail.", "losses"_a, "alpha"_a,
      "weights"_a = py::none());

  m.def(
      "mean_cvar",
      [](std::vector<double> losses, double alpha, double lam,
         std::optional<std::vector<double>> weights) {
        riskimit::RiskConfig cfg;
        cfg.alpha = alpha;
        cfg.lambda = lam;
        cfg.validate();
        return riskimit::mean_cvar(
            make_batch(std::move(losses), std::move(weights)), cfg);
      },
      "(mean + lambda*cvar) / (1 + lambda), the blended risk criterion.",
      "losses"_a, "alpha"_a, "lam"_a, "weights"_a = py::none());

  m.def(
      "cvar_dual",
      [](std::vector<double> losses, double alpha,
         std::optional<std::vector<double>> weights) {
        const riskimit::DualResult r = riskimit::cvar_dual(
            make_batch(std::move(losses), std::move(weights)), alpha);
        return py::make_tuple(r.value, r.density.zeta);
      },
      "CVaR via its dual: returns (value, zeta), zeta the maximizing "
      "reweighting with zeta in [0, 1/alpha] and E[zeta] = 1.",
      "losses"_a, "alpha"_a, "weights"_a = py::none());

  m.def(
      "resolve_config",
      [](const std::string& file_config,
         const std::vector<std::pair<std::string, std::string>>& overrides,
         std::optional<std::string> env_seed) {
        const nlohmann::json file = nlohmann::json::parse(file_config);
        return riskimit::resolve_config(file, overrides,
                                        env_seed ? env_seed->c_str() : nullptr)
            .dump();
      },
      "defaults <- file <- env seed <- overrides; returns the resolved "
      "config as a JSON string.",
      "file_config"_a = "{}", "overrides"_a = py::list(),
      "env_seed"_a = py::none());

  m.def(
      "run_command",
      [](const std::string& command, const std::string& resolved_config) {
        return riskimit::run_command(command,
                                     nlohmann::json::parse(resolved_config));
      },
      "Runs one workbench command (train-expert, gen-dataset, fit-noise, "
      "train, evaluate, report, verify) against a resolved config. Returns "
      "the exit status: 0 ok, 2 diverged, 3 verification failed.",
      "command"_a, "resolved_config"_a);

  m.def(
      "self_check",
      [](std::uint64_t seed, int batches, int fixtures) {
        auto checks = riskimit::selfcheck::run_risk_checks(seed, batches);
        const auto grads =
            riskimit::selfcheck::run_gradient_checks(seed, fixtures);
        checks.insert(checks.end(), grads.begin(), grads.end());
        py::list out;
        for (const auto& c : checks)
          out.append(py::make_tuple(c.name, c.passed, c.detail));
        return out;
      },
      "Estimator and gradient cross-checks; returns (name, passed, detail) "
      "tuples.",
      "seed"_a = 0, "batches"_a = 1000, "fixtures"_a = 100);

  m.attr("__version__") = "0.1.0";
}
