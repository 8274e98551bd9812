#include "deus/pipeline.hpp"

#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>

#include "deus/errors.hpp"
#include "deus/file_util.hpp"
#include "deus/trajectory_io.hpp"

namespace deus {

namespace fs = std::filesystem;

namespace {

std::string join(const std::string& dir, const std::string& name) {
  return (fs::path(dir) / name).string();
}

std::string config_text(const RunConfig& cfg) { return cfg.to_json().dump(2) + "\n"; }

void write_config(const RunConfig& cfg, const std::string& dir) {
  write_text_file(join(dir, "config.json"), config_text(cfg));
}

void require_file(const std::string& path, const std::string& what) {
  if (path.empty()) throw ConfigError("no " + what + " given");
  if (!fs::is_regular_file(path)) throw ConfigError(what + " not found: " + path);
}

template <class F>
auto load_input(const std::string& path, const std::string& what, F&& f) {
  require_file(path, what);
  try {
    return f();
  } catch (const FormatError& e) {
    throw ConfigError("invalid " + what + " " + path + ": " + e.what());
  }
}

EstimatorBundle load_bundle(const std::string& path) {
  return load_input(path, "bundle", [&] { return EstimatorBundle::load(path); });
}

QPolicy load_policy(const std::string& path) {
  return load_input(path, "policy", [&] { return QPolicy::load(path); });
}

std::vector<Trajectory> load_log(const std::string& path) {
  return load_input(path, "dialogue log", [&] { return read_log(path); });
}

template <class T>
void write_with(const std::string& path, const T& obj) {
  write_file_atomic(path, [&](std::ostream& out) { obj.write_csv(out); });
}

void train_agent_into(const RunConfig& cfg, const RewardModel& reward, const std::string& dir) {
  const AgentTrainResult res =
      train_agent(cfg.profile(), reward, cfg.schema(), cfg.complexity,
                  cfg.user == UserId::User1 ? cfg.agent_episodes : cfg.retrain_episodes,
                  cfg.seed, cfg.agent);
  res.policy.save(join(dir, "policy.bin"));
  write_with(join(dir, "curve.csv"), res.curve);
  write_config(cfg, dir);
}

}  // namespace

std::string deus_step_name(UserId user, LossMode mode, double v_b) {
  return std::string("deus_") + to_string(user) + "_" + to_string(mode) + "_vb" +
         format_double(v_b);
}

void step_train_agent(const RunConfig& cfg, const std::string& out_dir) {
  if (cfg.user == UserId::User1) {
    train_agent_into(cfg, User1Reward(cfg.user1), out_dir);
    return;
  }
  if (!cfg.inputs.bundle.empty()) {
    const EstimatorBundle bundle = load_bundle(cfg.inputs.bundle);
    train_agent_into(cfg, BudgetReward(bundle), out_dir);
    return;
  }
  const GroundTruthModel truth(cfg.profile());
  train_agent_into(cfg, BudgetReward(truth), out_dir);
}

void step_retrain(const RunConfig& cfg, const std::string& out_dir) {
  if (cfg.inputs.bundle.empty()) throw ConfigError("retrain needs a bundle");
  const EstimatorBundle bundle = load_bundle(cfg.inputs.bundle);
  train_agent_into(cfg, BudgetReward(bundle), out_dir);
}

void step_collect(const RunConfig& cfg, const std::string& out_dir) {
  const QPolicy policy = load_policy(cfg.inputs.policy);
  const auto logs = collect_dialogues(policy, cfg.collect.epsilon, cfg.profile(),
                                      cfg.complexity, cfg.collect.dialogues, cfg.seed);
  write_log(join(out_dir, "dialogues.jsonl"), logs);
  write_config(cfg, out_dir);
}

void step_train_deus(const RunConfig& cfg, const std::string& out_dir) {
  const auto logs = load_log(cfg.inputs.log);
  const EstimatorConfig ecfg = cfg.estimator_config();
  TrainingBatch batch;
  int dropped = 0;
  for (const auto& t : logs) {
    // loss_2 needs a proper prefix, so single-turn dialogues are skipped there.
    if (ecfg.loss_mode != LossMode::Light && t.turn_count() < 2) {
      ++dropped;
      continue;
    }
    batch.trajectories.push_back(t);
  }
  if (batch.trajectories.empty()) throw ConfigError("no usable dialogues in " + cfg.inputs.log);
  Featurizer fz(cfg.schema(), cfg.max_turns);
  TrainResult res = train(EstimatorBundle(fz, ecfg, derive_seed(cfg.seed, 0xb0d1)), batch,
                          cfg.train_config());
  res.bundle.save(join(out_dir, "bundle.txt"));
  write_file_atomic(join(out_dir, "trace.csv"), [&](std::ostream& out) {
    res.trace.write_csv(out);
  });
  nlohmann::json summary = {{"dialogues", logs.size()},
                            {"used", batch.trajectories.size()},
                            {"skipped_single_turn", dropped}};
  write_text_file(join(out_dir, "data_summary.json"), summary.dump(2) + "\n");
  write_config(cfg, out_dir);
}

// ---------------------------------------------------------------------------

ReportKind report_kind_from_string(const std::string& s) {
  if (s == "recovery") return ReportKind::Recovery;
  if (s == "status") return ReportKind::Status;
  if (s == "success") return ReportKind::Success;
  if (s == "rated") return ReportKind::Rated;
  throw ConfigError("unknown report kind: " + s + " (expected recovery, status, success, rated)");
}

namespace {

void write_recovery_series(const std::string& path, const CorrelationReport& rep) {
  write_file_atomic(path, [&](std::ostream& out) {
    out << "x_true,y_est_mean,y_est_std\n";
    for (const auto& b : rep.per_bin) {
      out << format_double(b.true_value) << ',' << fixed(b.est_mean, 6) << ','
          << fixed(b.est_std, 6) << '\n';
    }
  });
}

void write_status(const std::string& path, const std::string& name, const SatisfactionModel& m,
                  const std::vector<Trajectory>& logs) {
  write_file_atomic(path, [&](std::ostream& out) {
    out << "bundle,termination,n,correct,accuracy\n";
    int n = 0, correct = 0;
    for (const auto& row : status_breakdown(m, logs)) {
      out << name << ',' << row.termination << ',' << row.n << ',' << row.correct << ','
          << fixed(static_cast<double>(row.correct) / row.n, 4) << '\n';
      n += row.n;
      correct += row.correct;
    }
    out << name << ",all," << n << ',' << correct << ','
        << fixed(static_cast<double>(correct) / n, 4) << '\n';
  });
}

// Remaining budget of every dialogue with its status: plot data for the
// success / failure split.
void write_remaining_series(const std::string& path, const SatisfactionModel& m,
                            const std::vector<Trajectory>& logs) {
  write_file_atomic(path, [&](std::ostream& out) {
    out << "status,remaining_budget,status_score\n";
    for (const auto& t : logs) {
      out << (t.status == DialogueStatus::Success ? "success" : "failure") << ','
          << fixed(remaining_budget(m, t), 6) << ',' << fixed(status_score(m, t), 6) << '\n';
    }
  });
}

void write_rated(const std::string& dir, const RatedReport& rep) {
  write_with(join(dir, "rated.csv"), rep);
  write_file_atomic(join(dir, "rated_groups.csv"), [&](std::ostream& out) {
    out << "group,n,mean_remaining,std_remaining\n";
    out << "success," << rep.success.n << ',' << fixed(rep.success.mean, 6) << ','
        << fixed(rep.success.std, 6) << '\n';
    out << "failure," << rep.failure.n << ',' << fixed(rep.failure.mean, 6) << ','
        << fixed(rep.failure.std, 6) << '\n';
  });
  fs::create_directories(join(dir, "series"));
  for (const auto& rc : rep.by_type) {
    write_file_atomic(join(dir, "series/rated_" + rc.rating_type + ".csv"),
                      [&](std::ostream& out) {
                        out << "x_level,y_mean_remaining,y_std\n";
                        for (const auto& l : rc.levels) {
                          out << l.level << ',' << fixed(l.mean_remaining, 6) << ','
                              << fixed(l.std_remaining, 6) << '\n';
                        }
                      });
  }
}

std::vector<RatedDialogue> read_rated_log(const std::string& path) {
  return load_input(path, "rated log", [&] {
    std::ifstream in(path);
    std::vector<RatedDialogue> out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      try {
        const auto j = nlohmann::json::parse(line);
        RatedDialogue r;
        r.rating_type = j.at("rating_type").get<std::string>();
        r.rating = j.at("rating").get<int>();
        r.trajectory = trajectory_from_json(j.at("trajectory"));
        r.validate();
        out.push_back(std::move(r));
      } catch (const std::exception& e) {
        throw FormatError("line " + std::to_string(lineno) + ": " + e.what());
      }
    }
    return out;
  });
}

std::vector<NamedAgent> load_agents(
    const std::vector<std::pair<std::string, std::string>>& entries,
    std::vector<std::unique_ptr<QPolicy>>& storage) {
  std::vector<NamedAgent> agents;
  for (const auto& [name, path] : entries) {
    storage.push_back(std::make_unique<QPolicy>(load_policy(path)));
    agents.push_back({name, as_agent_policy(*storage.back(), false)});
  }
  return agents;
}

std::vector<UserProfile> all_users(const RunConfig& cfg) {
  return {cfg.profile(UserId::User1), cfg.profile(UserId::User2), cfg.profile(UserId::User3)};
}

void write_matrix(const std::string& dir, const SuccessMatrix& m) {
  write_with(join(dir, "success_matrix.csv"), m);
  write_file_atomic(join(dir, "success_matrix.md"), [&](std::ostream& out) {
    m.write_markdown(out);
  });
}

}  // namespace

void step_report(const RunConfig& cfg, ReportKind kind, const ReportInputs& extra,
                 const std::string& out_dir) {
  switch (kind) {
    case ReportKind::Recovery: {
      const EstimatorBundle bundle = load_bundle(cfg.inputs.bundle);
      const auto logs = load_log(cfg.inputs.test_log.empty() ? cfg.inputs.log : cfg.inputs.test_log);
      const CorrelationReport rep =
          recovery_report(bundle, logs, cfg.report.outlier_threshold_pct);
      write_with(join(out_dir, "recovery.csv"), rep);
      fs::create_directories(join(out_dir, "series"));
      write_recovery_series(join(out_dir, "series/recovery.csv"), rep);
      break;
    }
    case ReportKind::Status: {
      const EstimatorBundle bundle = load_bundle(cfg.inputs.bundle);
      const auto logs = load_log(cfg.inputs.test_log.empty() ? cfg.inputs.log : cfg.inputs.test_log);
      write_status(join(out_dir, "status.csv"), "bundle", bundle, logs);
      fs::create_directories(join(out_dir, "series"));
      write_remaining_series(join(out_dir, "series/remaining.csv"), bundle, logs);
      break;
    }
    case ReportKind::Success: {
      auto entries = extra.policies;
      if (entries.empty() && !cfg.inputs.policy.empty()) entries.push_back({"agent", cfg.inputs.policy});
      if (entries.empty()) throw ConfigError("success report needs at least one policy");
      std::vector<std::unique_ptr<QPolicy>> storage;
      const auto agents = load_agents(entries, storage);
      write_matrix(out_dir, success_matrix(agents, all_users(cfg), cfg.schema(), cfg.complexity,
                                           cfg.report.n_goals, cfg.seed));
      break;
    }
    case ReportKind::Rated: {
      const EstimatorBundle bundle = load_bundle(cfg.inputs.bundle);
      std::vector<RatedDialogue> rated;
      if (!extra.rated_log.empty()) {
        rated = read_rated_log(extra.rated_log);
      } else {
        rated = quantile_rated(load_log(cfg.inputs.test_log.empty() ? cfg.inputs.log
                                                                    : cfg.inputs.test_log),
                               "appropriateness");
      }
      write_rated(out_dir, rated_correlation(bundle, rated));
      break;
    }
  }
  write_config(cfg, out_dir);
}

// ---------------------------------------------------------------------------

namespace {

// Runs `fn` unless the directory already holds the same config and outputs.
template <class F>
void run_step(const RunConfig& cfg, const std::string& dir,
              const std::vector<std::string>& outputs, F&& fn) {
  const std::string cfg_path = join(dir, "config.json");
  bool reuse = fs::is_regular_file(cfg_path) && read_text_file(cfg_path) == config_text(cfg);
  for (const auto& o : outputs) reuse = reuse && fs::is_regular_file(join(dir, o));
  if (reuse) return;
  fs::create_directories(dir);
  // config.json is written last by every step, so a partial run never looks complete.
  if (fs::exists(cfg_path)) fs::remove(cfg_path);
  fn(cfg, dir);
}

RunConfig step_config(const RunConfig& base, const std::string& dir, UserId user,
                      std::uint64_t stream) {
  RunConfig c = base;
  c.user = user;
  c.seed = derive_seed(base.seed, stream);
  c.output_dir = dir;
  c.inputs = {};
  return c;
}

std::string md_row(const std::vector<std::string>& cells) {
  std::string s = "|";
  for (const auto& c : cells) s += " " + c + " |";
  return s + "\n";
}

}  // namespace

PipelineSummary run_pipeline(const RunConfig& cfg, const std::string& out_dir) {
  cfg.validate();
  cfg.schema();  // fail early on a bad schema path
  fs::create_directories(out_dir);
  RunConfig top = cfg;
  top.output_dir = out_dir;
  write_config(top, out_dir);

  auto dir = [&](const std::string& name) { return join(out_dir, name); };

  // Step 1: agent trained for User1.
  const std::string agent1 = dir("agent1");
  run_step(step_config(cfg, agent1, UserId::User1, 1), agent1, {"policy.bin", "curve.csv"},
           step_train_agent);

  // Step 2: suboptimal interactions with User2 and User3, plus held-out logs.
  struct Collection {
    UserId user;
    std::string train_dir, test_dir;
  };
  std::vector<Collection> collections;
  std::uint64_t stream = 2;
  for (UserId u : {UserId::User2, UserId::User3}) {
    Collection c{u, dir(std::string("collect_") + to_string(u)),
                 dir(std::string("collect_") + to_string(u) + "_test")};
    RunConfig tr = step_config(cfg, c.train_dir, u, stream++);
    tr.inputs.policy = join(agent1, "policy.bin");
    run_step(tr, c.train_dir, {"dialogues.jsonl"}, step_collect);
    RunConfig te = step_config(cfg, c.test_dir, u, stream++);
    te.inputs.policy = tr.inputs.policy;
    te.collect.dialogues = cfg.collect.test_dialogues;
    run_step(te, c.test_dir, {"dialogues.jsonl"}, step_collect);
    collections.push_back(c);
  }

  // Step 3: estimators.
  struct DeusRun {
    std::string name;
    UserId user;
    std::string dir;
    std::string test_log;
  };
  std::vector<DeusRun> deus_runs;
  auto add_deus = [&](UserId user, LossMode mode, double v_b) {
    const Collection& c = collections[user == UserId::User2 ? 0 : 1];
    const std::string name = deus_step_name(user, mode, v_b);
    RunConfig d = step_config(cfg, dir(name), user, 6);
    d.estimator.v_b = v_b;
    d.estimator.loss_mode = mode;
    d.inputs.log = join(c.train_dir, "dialogues.jsonl");
    run_step(d, d.output_dir, {"bundle.txt", "trace.csv"}, step_train_deus);
    deus_runs.push_back({name, user, d.output_dir, join(c.test_dir, "dialogues.jsonl")});
  };
  for (double v : cfg.estimator.v_b_sweep) add_deus(UserId::User2, LossMode::Full, v);
  add_deus(UserId::User2, LossMode::Light, cfg.estimator.v_b);
  add_deus(UserId::User3, LossMode::Full, cfg.estimator.v_b);
  add_deus(UserId::User3, LossMode::FullForward, cfg.estimator.v_b);

  // Step 4: retraining with recovered satisfaction.
  auto bundle_of = [&](UserId u, LossMode m) {
    return join(dir(deus_step_name(u, m, cfg.estimator.v_b)), "bundle.txt");
  };
  struct Retrain {
    std::string name;
    UserId user;
    std::string bundle;
    std::uint64_t stream;
  };
  const std::vector<Retrain> retrains = {
      {"agent2", UserId::User2, bundle_of(UserId::User2, LossMode::Full), 7},
      {"agent3", UserId::User3, bundle_of(UserId::User3, LossMode::FullForward), 8},
      {"agent4", UserId::User3, bundle_of(UserId::User3, LossMode::Full), 8},
  };
  for (const auto& r : retrains) {
    RunConfig rc = step_config(cfg, dir(r.name), r.user, r.stream);
    rc.inputs.bundle = r.bundle;
    run_step(rc, rc.output_dir, {"policy.bin", "curve.csv"}, step_retrain);
  }

  // Reports: pure reads of the artifacts above.
  const std::string report_dir = dir("report");
  fs::create_directories(report_dir + "/series");
  PipelineSummary summary;
  std::ostringstream md;
  md << "# Run summary\n\n## Satisfaction recovery\n\n";
  md << md_row({"bundle", "pearson r (all bins)", "pearson r (bins >= " +
                              fixed(cfg.report.min_bin_pct, 0) + "%)",
                "slope", "intercept", "status accuracy"});
  md << md_row({"---", "---", "---", "---", "---", "---"});
  std::ostringstream status_csv;
  status_csv << "bundle,termination,n,correct,accuracy\n";
  for (const auto& d : deus_runs) {
    const EstimatorBundle bundle = load_bundle(join(d.dir, "bundle.txt"));
    const auto test = load_log(d.test_log);
    const CorrelationReport rep = recovery_report(bundle, test, cfg.report.outlier_threshold_pct);
    write_with(join(report_dir, "recovery_" + d.name + ".csv"), rep);
    write_recovery_series(join(report_dir, "series/recovery_" + d.name + ".csv"), rep);
    write_remaining_series(join(report_dir, "series/remaining_" + d.name + ".csv"), bundle, test);
    const double acc = status_accuracy(bundle, test);
    int n = 0, correct = 0;
    for (const auto& row : status_breakdown(bundle, test)) {
      status_csv << d.name << ',' << row.termination << ',' << row.n << ',' << row.correct << ','
                 << fixed(static_cast<double>(row.correct) / row.n, 4) << '\n';
      n += row.n;
      correct += row.correct;
    }
    status_csv << d.name << ",all," << n << ',' << correct << ',' << fixed(acc, 4) << '\n';
    std::string r_min = "-";
    std::vector<double> xs, ys;
    for (const auto& b : rep.bins_with_frequency(cfg.report.min_bin_pct)) {
      xs.push_back(b.true_value);
      ys.push_back(b.est_mean);
    }
    if (xs.size() >= 2) {
      try {
        r_min = fixed(pearson(xs, ys), 4);
      } catch (const InvalidArgument&) {
      }
    }
    md << md_row({d.name, fixed(rep.pearson_r, 4), r_min, fixed(rep.slope, 4),
                  fixed(rep.intercept, 4), fixed(acc, 4)});
    summary.recovery.emplace(d.name, rep);
    summary.status_accuracy[d.name] = acc;
  }
  write_text_file(join(report_dir, "status.csv"), status_csv.str());

  std::vector<std::unique_ptr<QPolicy>> storage;
  const auto agents = load_agents({{"agent1", join(agent1, "policy.bin")},
                                   {"agent2", join(dir("agent2"), "policy.bin")},
                                   {"agent3", join(dir("agent3"), "policy.bin")},
                                   {"agent4", join(dir("agent4"), "policy.bin")}},
                                  storage);
  summary.success = success_matrix(agents, all_users(cfg), cfg.schema(), cfg.complexity,
                                   cfg.report.n_goals, derive_seed(cfg.seed, 9));
  write_matrix(report_dir, summary.success);
  md << "\n## Success rate (" << cfg.report.n_goals << " held-out goals per cell)\n\n";
  {
    std::ostringstream m;
    summary.success.write_markdown(m);
    md << m.str();
  }

  const EstimatorBundle rated_bundle = load_bundle(bundle_of(UserId::User2, LossMode::Full));
  summary.rated = rated_correlation(
      rated_bundle,
      quantile_rated(load_log(join(collections[0].test_dir, "dialogues.jsonl")), "appropriateness"));
  write_rated(report_dir, summary.rated);
  md << "\n## Remaining budget by rating level (synthetic ratings)\n\n";
  for (const auto& rc : summary.rated.by_type) {
    md << md_row({"level", "n", "mean remaining", "std"});
    md << md_row({"---", "---", "---", "---"});
    for (const auto& l : rc.levels) {
      md << md_row({std::to_string(l.level), std::to_string(l.n), fixed(l.mean_remaining, 3),
                    fixed(l.std_remaining, 3)});
    }
    md << "\n" << rc.rating_type << ": pearson r " << fixed(rc.pearson_r, 4) << ", monotone "
       << (rc.monotone ? "yes" : "no") << "\n";
  }
  md << "\nsuccessful dialogues: mean remaining " << fixed(summary.rated.success.mean, 3)
     << " (n=" << summary.rated.success.n << "); failed: "
     << fixed(summary.rated.failure.mean, 3) << " (n=" << summary.rated.failure.n << ")\n";
  write_text_file(join(report_dir, "summary.md"), md.str());
  RunConfig rcfg = cfg;
  rcfg.output_dir = report_dir;
  write_config(rcfg, report_dir);
  return summary;
}

}  // namespace deus
