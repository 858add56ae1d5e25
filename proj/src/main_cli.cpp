#include <cstdlib>
#include <exception>
#include <fstream>
#include <iostream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "riskimit/commands.hpp"
#include "riskimit/config.hpp"

namespace {

// --key value / --key=value pairs from the tokens CLI11 did not claim.
// Values are passed through verbatim; apply_override decides how to parse
// them, so negative numbers and JSON arrays survive.
int collect_overrides(const std::vector<std::string>& extras,
                      std::vector<std::pair<std::string, std::string>>* out) {
  for (std::size_t i = 0; i < extras.size(); ++i) {
    const std::string& tok = extras[i];
    if (tok.size() < 3 || tok.rfind("--", 0) != 0) {
      std::cerr << "riskimit: expected --key value overrides, got '" << tok
                << "'\n";
      return 1;
    }
    const std::string body = tok.substr(2);
    const auto eq = body.find('=');
    if (eq != std::string::npos) {
      out->emplace_back(body.substr(0, eq), body.substr(eq + 1));
    } else {
      if (i + 1 == extras.size()) {
        std::cerr << "riskimit: override --" << body << " is missing a value\n";
        return 1;
      }
      out->emplace_back(body, extras[++i]);
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"risk-sensitive adversarial imitation workbench"};
  app.require_subcommand(1);

  const std::vector<std::pair<std::string, std::string>> commands = {
      {"train-expert", "train a risk-sensitive expert policy on true costs"},
      {"gen-dataset", "roll a stored expert policy into a trajectory dataset"},
      {"fit-noise", "fit the k-means cost-noise model from a dataset"},
      {"train", "adversarial imitation training (lambda grids loop in-process)"},
      {"evaluate", "roll out a stored policy and write summary statistics"},
      {"report", "aggregate training logs into tables and curves"},
      {"verify", "run the estimator and gradient self-checks"},
  };

  std::string config_path;
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config_path, "JSON config file");
    sub->allow_extras();
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  CLI::App* sub = app.get_subcommands().front();

  std::vector<std::pair<std::string, std::string>> overrides;
  if (collect_overrides(sub->remaining(), &overrides) != 0) return 1;

  try {
    nlohmann::json file_config = nlohmann::json::object();
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      if (!in) {
        std::cerr << "riskimit: config file not found: " << config_path
                  << "\n";
        return 1;
      }
      file_config = nlohmann::json::parse(in);
    }
    const nlohmann::json resolved = riskimit::resolve_config(
        file_config, overrides, std::getenv("RISKIMIT_SEED"));
    // Reproducibility contract: the full resolved config goes to stdout
    // before any work happens.
    std::cout << resolved.dump(2) << std::endl;
    return riskimit::run_command(sub->get_name(), resolved);
  } catch (const riskimit::ConfigError& e) {
    std::cerr << "riskimit: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "riskimit: " << e.what() << "\n";
    return 1;
  }
}
