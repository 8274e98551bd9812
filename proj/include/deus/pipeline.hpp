#pragma once

#include <map>
#include <string>
#include <vector>

#include "deus/evaluation.hpp"
#include "deus/run_config.hpp"

namespace deus {

// Single steps. Each writes its outputs plus config.json (the resolved
// RunConfig) into out_dir; files are replaced atomically.

// policy.bin + curve.csv. Reward: f1 for user1, otherwise the satisfaction
// model in cfg.inputs.bundle, or the simulator's own f2/b when no bundle is set.
void step_train_agent(const RunConfig& cfg, const std::string& out_dir);
// dialogues.jsonl with cfg.collect.dialogues logs of cfg.inputs.policy
// against cfg.user.
void step_collect(const RunConfig& cfg, const std::string& out_dir);
// bundle.txt + trace.csv from cfg.inputs.log.
void step_train_deus(const RunConfig& cfg, const std::string& out_dir);
// step_train_agent with a mandatory bundle.
void step_retrain(const RunConfig& cfg, const std::string& out_dir);

enum class ReportKind { Recovery, Status, Success, Rated };
ReportKind report_kind_from_string(const std::string& s);

struct ReportInputs {
  std::vector<std::pair<std::string, std::string>> policies;  // name, path
  std::string rated_log;  // optional JSONL of rated dialogues
};

// Pure reads of logs, bundles and policies.
void step_report(const RunConfig& cfg, ReportKind kind, const ReportInputs& extra,
                 const std::string& out_dir);

// Everything the end-to-end run measured.
struct PipelineSummary {
  std::map<std::string, CorrelationReport> recovery;  // per bundle name
  std::map<std::string, double> status_accuracy;      // per bundle name
  SuccessMatrix success;
  RatedReport rated;
};

// Steps 1-4 plus every report, under out_dir. A step whose directory already
// holds the same config.json and outputs is reused.
PipelineSummary run_pipeline(const RunConfig& cfg, const std::string& out_dir);

// Bundle names used by the pipeline.
std::string deus_step_name(UserId user, LossMode mode, double v_b);

}  // namespace deus
