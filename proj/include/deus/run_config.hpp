#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "deus/agent.hpp"
#include "deus/estimator.hpp"
#include "deus/goal_schema.hpp"
#include "deus/user_sim.hpp"

namespace deus {

struct CollectSettings {
  int dialogues = 2000;
  int test_dialogues = 1000;
  double epsilon = 0.5;  // exploration of the collecting agent
};

struct EstimatorSettings {
  double v_b = -1.0;
  std::vector<double> v_b_sweep = {-0.5, -1.0, -2.0, -10.0};
  LossMode loss_mode = LossMode::Full;
  int epochs = 100;
  int batch_size = 32;
  double learning_rate = 1e-3;
  std::vector<int> hidden = {64, 64};
  double budget_scale = 10.0;
};

struct ReportSettings {
  int n_goals = 500;
  double outlier_threshold_pct = 1.0;
  double min_bin_pct = 5.0;
};

// Paths consumed by single-step subcommands.
struct InputPaths {
  std::string policy;
  std::string bundle;
  std::string log;
  std::string test_log;
};

// Everything a subcommand or the pipeline needs. Serialised verbatim into
// every output directory.
struct RunConfig {
  std::uint64_t seed = 1;
  std::string schema_path;  // empty: built-in schema
  int max_turns = 40;
  GoalComplexity complexity;
  User1Config user1;
  UserId user = UserId::User2;

  int agent_episodes = 10000;
  int retrain_episodes = 10000;
  AgentHyperparams agent;

  CollectSettings collect;
  EstimatorSettings estimator;
  ReportSettings report;
  InputPaths inputs;
  std::string output_dir;

  static RunConfig preset(const std::string& name);
  // Throws ConfigError on unknown keys or bad values. Missing keys keep the
  // values already in `base`.
  static RunConfig from_json(const nlohmann::json& j, const RunConfig& base);
  static RunConfig from_json(const nlohmann::json& j) { return from_json(j, RunConfig{}); }
  static RunConfig load(const std::string& path, const RunConfig& base);
  static RunConfig load(const std::string& path) { return load(path, RunConfig{}); }
  nlohmann::json to_json() const;
  void validate() const;

  GoalSchema schema() const;
  UserProfile profile(UserId id) const;
  UserProfile profile() const { return profile(user); }
  EstimatorConfig estimator_config() const;
  TrainConfig train_config() const;
};

// Output directory after applying the DEUS_OUTPUT_ROOT environment variable
// to relative paths.
std::string resolve_output_dir(const std::string& dir);

}  // namespace deus
