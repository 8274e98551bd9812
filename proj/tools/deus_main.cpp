// Command-line front end: one subcommand per pipeline step plus `pipeline`.
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "deus/errors.hpp"
#include "deus/pipeline.hpp"

namespace {

using namespace deus;

// Flags shared by every subcommand. Unset flags leave the config untouched.
struct Overrides {
  std::string config_path;
  std::string preset = "desk";
  std::string out;
  std::string schema;
  std::optional<std::string> user;
  std::optional<std::uint64_t> seed;
  std::optional<int> episodes;
  std::optional<int> n;
  std::optional<double> epsilon;
  std::optional<double> v_b;
  std::optional<std::string> loss_mode;
  std::optional<int> epochs;
  std::string policy, bundle, log, test_log;
  std::string kind = "recovery";
  std::vector<std::string> agents;  // name=path
  std::string rated_log;
};

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config_path, "JSON config file");
  cmd->add_option("--preset", o.preset, "smoke or desk (defaults before --config)");
  cmd->add_option("--out", o.out, "output directory")->required();
  cmd->add_option("--schema", o.schema, "goal schema JSON file");
  cmd->add_option("--seed", o.seed, "master seed");
  cmd->add_option("--user", o.user, "user1, user2 or user3");
}

RunConfig resolve(const Overrides& o) {
  RunConfig c = RunConfig::preset(o.preset);
  if (!o.config_path.empty()) {
    if (!std::filesystem::is_regular_file(o.config_path)) {
      throw ConfigError("config file not found: " + o.config_path);
    }
    c = RunConfig::load(o.config_path, c);
  }
  if (!o.schema.empty()) c.schema_path = o.schema;
  if (o.seed) c.seed = *o.seed;
  if (o.user) {
    try {
      c.user = user_id_from_string(*o.user);
    } catch (const InvalidArgument& e) {
      throw ConfigError(e.what());
    }
  }
  if (o.episodes) c.agent_episodes = c.retrain_episodes = *o.episodes;
  if (o.n) c.collect.dialogues = *o.n;
  if (o.epsilon) c.collect.epsilon = *o.epsilon;
  if (o.v_b) c.estimator.v_b = *o.v_b;
  if (o.loss_mode) {
    try {
      c.estimator.loss_mode = loss_mode_from_string(*o.loss_mode);
    } catch (const InvalidArgument& e) {
      throw ConfigError(e.what());
    }
  }
  if (o.epochs) c.estimator.epochs = *o.epochs;
  if (!o.policy.empty()) c.inputs.policy = o.policy;
  if (!o.bundle.empty()) c.inputs.bundle = o.bundle;
  if (!o.log.empty()) c.inputs.log = o.log;
  if (!o.test_log.empty()) c.inputs.test_log = o.test_log;
  c.output_dir = resolve_output_dir(o.out);
  c.validate();
  c.schema();  // missing or malformed schema is a config error, reported up front
  return c;
}

std::vector<std::pair<std::string, std::string>> parse_agents(const std::vector<std::string>& v) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& s : v) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 == s.size()) {
      throw ConfigError("--agent expects name=path, got: " + s);
    }
    out.emplace_back(s.substr(0, eq), s.substr(eq + 1));
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dialogue satisfaction estimation and agent retraining"};
  app.require_subcommand(1);
  Overrides o;

  auto* train = app.add_subcommand("train-agent", "train a DQN agent against a simulated user");
  add_common(train, o);
  train->add_option("--episodes", o.episodes, "training episodes");
  train->add_option("--bundle", o.bundle, "satisfaction bundle used as reward (users 2/3)");

  auto* collect = app.add_subcommand("collect", "log dialogues of a policy with a simulated user");
  add_common(collect, o);
  collect->add_option("--policy", o.policy, "policy file")->required();
  collect->add_option("-n,--dialogues", o.n, "number of dialogues");
  collect->add_option("--epsilon", o.epsilon, "exploration of the collecting policy");

  auto* deus_cmd = app.add_subcommand("train-deus", "estimate turn costs and budgets from a log");
  add_common(deus_cmd, o);
  deus_cmd->add_option("--log", o.log, "dialogue log (JSONL)")->required();
  deus_cmd->add_option("--v-b", o.v_b, "inherent turn cost (negative)");
  deus_cmd->add_option("--loss-mode", o.loss_mode, "full, light or full_forward");
  deus_cmd->add_option("--epochs", o.epochs, "training epochs");

  auto* retrain = app.add_subcommand("retrain", "train an agent on an estimated reward");
  add_common(retrain, o);
  retrain->add_option("--bundle", o.bundle, "satisfaction bundle")->required();
  retrain->add_option("--episodes", o.episodes, "training episodes");

  auto* report = app.add_subcommand("report", "write evaluation reports");
  add_common(report, o);
  report->add_option("--kind", o.kind, "recovery, status, success or rated");
  report->add_option("--bundle", o.bundle, "satisfaction bundle");
  report->add_option("--log", o.log, "dialogue log");
  report->add_option("--test-log", o.test_log, "held-out dialogue log (preferred over --log)");
  report->add_option("--policy", o.policy, "single policy for the success matrix");
  report->add_option("--agent", o.agents, "name=path, repeatable, for the success matrix");
  report->add_option("--rated-log", o.rated_log, "JSONL of rated dialogues");

  auto* pipe = app.add_subcommand("pipeline", "run every step and report");
  add_common(pipe, o);
  pipe->add_option("--episodes", o.episodes, "agent training episodes");
  pipe->add_option("-n,--dialogues", o.n, "dialogues per collection");
  pipe->add_option("--epochs", o.epochs, "estimator epochs");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    const RunConfig cfg = resolve(o);
    const std::string& out = cfg.output_dir;
    std::filesystem::create_directories(out);
    if (*train) {
      step_train_agent(cfg, out);
    } else if (*collect) {
      step_collect(cfg, out);
    } else if (*deus_cmd) {
      step_train_deus(cfg, out);
    } else if (*retrain) {
      step_retrain(cfg, out);
    } else if (*report) {
      ReportInputs extra;
      extra.policies = parse_agents(o.agents);
      extra.rated_log = o.rated_log;
      step_report(cfg, report_kind_from_string(o.kind), extra, out);
    } else if (*pipe) {
      run_pipeline(cfg, out);
      std::cout << "report: " << (std::filesystem::path(out) / "report" / "summary.md").string()
                << "\n";
    }
  } catch (const ConfigError& e) {
    std::cerr << "deus: " << e.what() << "\n";
    return 2;
  } catch (const FormatError& e) {
    std::cerr << "deus: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "deus: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
