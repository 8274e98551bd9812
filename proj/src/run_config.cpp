#include "deus/run_config.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>

#include "deus/errors.hpp"

namespace deus {

namespace {

using nlohmann::json;

// Reads known keys of one JSON object and rejects everything else.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ConfigError(where_ + ": expected an object");
  }
  ~ObjectReader() noexcept(false) {
    if (std::uncaught_exceptions() > 0) return;
    for (const auto& [k, v] : j_.items()) {
      if (!seen_.count(k)) throw ConfigError(where_ + ": unknown key '" + k + "'");
    }
  }
  ObjectReader(const ObjectReader&) = delete;
  ObjectReader& operator=(const ObjectReader&) = delete;

  template <class T>
  void get(const std::string& key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(where_ + "." + key + ": " + e.what());
    }
  }
  const json* child(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }
  std::string path(const std::string& key) const { return where_ + "." + key; }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

template <class F>
auto wrap_config(const std::string& where, F&& f) {
  try {
    return f();
  } catch (const InvalidArgument& e) {
    throw ConfigError(where + ": " + e.what());
  }
}

}  // namespace

RunConfig RunConfig::preset(const std::string& name) {
  RunConfig c;
  if (name == "desk") return c;
  if (name == "smoke") {
    c.agent_episodes = 1500;
    c.retrain_episodes = 1500;
    c.agent.curve_window = 250;
    c.collect.dialogues = 300;
    c.collect.test_dialogues = 200;
    c.estimator.epochs = 20;
    c.report.n_goals = 200;
    return c;
  }
  throw ConfigError("unknown preset: " + name + " (expected smoke or desk)");
}

RunConfig RunConfig::from_json(const json& j, const RunConfig& base) {
  RunConfig c = base;
  {
    ObjectReader r(j, "config");
    r.get("seed", c.seed);
    r.get("schema_path", c.schema_path);
    r.get("max_turns", c.max_turns);
    if (const json* x = r.child("complexity")) {
      ObjectReader cr(*x, r.path("complexity"));
      cr.get("min_domains", c.complexity.min_domains);
      cr.get("max_domains", c.complexity.max_domains);
      cr.get("min_slots_per_domain", c.complexity.min_slots_per_domain);
      cr.get("max_slots_per_domain", c.complexity.max_slots_per_domain);
    }
    if (const json* x = r.child("user1")) {
      ObjectReader ur(*x, r.path("user1"));
      ur.get("r", c.user1.r);
      ur.get("p", c.user1.p);
    }
    std::string user = to_string(c.user);
    r.get("user", user);
    c.user = wrap_config("config.user", [&] { return user_id_from_string(user); });
    r.get("agent_episodes", c.agent_episodes);
    r.get("retrain_episodes", c.retrain_episodes);
    if (const json* x = r.child("agent")) {
      ObjectReader ar(*x, r.path("agent"));
      AgentHyperparams& h = c.agent;
      ar.get("discount", h.discount);
      ar.get("replay_capacity", h.replay_capacity);
      ar.get("target_sync_steps", h.target_sync_steps);
      ar.get("epsilon_start", h.epsilon_start);
      ar.get("epsilon_end", h.epsilon_end);
      ar.get("epsilon_decay_fraction", h.epsilon_decay_fraction);
      ar.get("batch_size", h.batch_size);
      ar.get("train_every", h.train_every);
      ar.get("warmup_steps", h.warmup_steps);
      ar.get("hidden", h.hidden);
      ar.get("learning_rate", h.optimizer.learning_rate);
      ar.get("huber_delta", h.huber_delta);
      ar.get("curve_window", h.curve_window);
      ar.get("max_slots", h.max_slots);
      ar.get("double_q", h.double_q);
    }
    if (const json* x = r.child("collect")) {
      ObjectReader cr(*x, r.path("collect"));
      cr.get("dialogues", c.collect.dialogues);
      cr.get("test_dialogues", c.collect.test_dialogues);
      cr.get("epsilon", c.collect.epsilon);
    }
    if (const json* x = r.child("estimator")) {
      ObjectReader er(*x, r.path("estimator"));
      EstimatorSettings& e = c.estimator;
      er.get("v_b", e.v_b);
      er.get("v_b_sweep", e.v_b_sweep);
      std::string mode = to_string(e.loss_mode);
      er.get("loss_mode", mode);
      e.loss_mode = wrap_config("config.estimator.loss_mode",
                                [&] { return loss_mode_from_string(mode); });
      er.get("epochs", e.epochs);
      er.get("batch_size", e.batch_size);
      er.get("learning_rate", e.learning_rate);
      er.get("hidden", e.hidden);
      er.get("budget_scale", e.budget_scale);
    }
    if (const json* x = r.child("report")) {
      ObjectReader rr(*x, r.path("report"));
      rr.get("n_goals", c.report.n_goals);
      rr.get("outlier_threshold_pct", c.report.outlier_threshold_pct);
      rr.get("min_bin_pct", c.report.min_bin_pct);
    }
    if (const json* x = r.child("inputs")) {
      ObjectReader ir(*x, r.path("inputs"));
      ir.get("policy", c.inputs.policy);
      ir.get("bundle", c.inputs.bundle);
      ir.get("log", c.inputs.log);
      ir.get("test_log", c.inputs.test_log);
    }
    r.get("output_dir", c.output_dir);
  }
  c.validate();
  return c;
}

RunConfig RunConfig::load(const std::string& path, const RunConfig& base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config file " + path + ": " + e.what());
  }
  return from_json(j, base);
}

json RunConfig::to_json() const {
  json j;
  j["seed"] = seed;
  j["schema_path"] = schema_path;
  j["max_turns"] = max_turns;
  j["complexity"] = {{"min_domains", complexity.min_domains},
                     {"max_domains", complexity.max_domains},
                     {"min_slots_per_domain", complexity.min_slots_per_domain},
                     {"max_slots_per_domain", complexity.max_slots_per_domain}};
  j["user1"] = {{"r", user1.r}, {"p", user1.p}};
  j["user"] = to_string(user);
  j["agent_episodes"] = agent_episodes;
  j["retrain_episodes"] = retrain_episodes;
  j["agent"] = {{"discount", agent.discount},
                {"replay_capacity", agent.replay_capacity},
                {"target_sync_steps", agent.target_sync_steps},
                {"epsilon_start", agent.epsilon_start},
                {"epsilon_end", agent.epsilon_end},
                {"epsilon_decay_fraction", agent.epsilon_decay_fraction},
                {"batch_size", agent.batch_size},
                {"train_every", agent.train_every},
                {"warmup_steps", agent.warmup_steps},
                {"hidden", agent.hidden},
                {"learning_rate", agent.optimizer.learning_rate},
                {"huber_delta", agent.huber_delta},
                {"curve_window", agent.curve_window},
                {"max_slots", agent.max_slots},
                {"double_q", agent.double_q}};
  j["collect"] = {{"dialogues", collect.dialogues},
                  {"test_dialogues", collect.test_dialogues},
                  {"epsilon", collect.epsilon}};
  j["estimator"] = {{"v_b", estimator.v_b},
                    {"v_b_sweep", estimator.v_b_sweep},
                    {"loss_mode", to_string(estimator.loss_mode)},
                    {"epochs", estimator.epochs},
                    {"batch_size", estimator.batch_size},
                    {"learning_rate", estimator.learning_rate},
                    {"hidden", estimator.hidden},
                    {"budget_scale", estimator.budget_scale}};
  j["report"] = {{"n_goals", report.n_goals},
                 {"outlier_threshold_pct", report.outlier_threshold_pct},
                 {"min_bin_pct", report.min_bin_pct}};
  j["inputs"] = {{"policy", inputs.policy},
                 {"bundle", inputs.bundle},
                 {"log", inputs.log},
                 {"test_log", inputs.test_log}};
  j["output_dir"] = output_dir;
  return j;
}

void RunConfig::validate() const {
  wrap_config("config", [&] {
    if (max_turns < 1) throw InvalidArgument("max_turns must be positive");
    user1.validate();
    agent.validate();
    if (agent_episodes < 1 || retrain_episodes < 1) {
      throw InvalidArgument("episode counts must be positive");
    }
    if (collect.dialogues < 1 || collect.test_dialogues < 1) {
      throw InvalidArgument("dialogue counts must be positive");
    }
    if (!(collect.epsilon >= 0.0 && collect.epsilon <= 1.0)) {
      throw InvalidArgument("collect.epsilon must be in [0, 1]");
    }
    estimator_config().validate();
    for (double v : estimator.v_b_sweep) {
      if (!(v < 0.0)) throw InvalidArgument("every v_b in the sweep must be negative");
    }
    if (estimator.epochs < 1 || estimator.batch_size < 1 || !(estimator.learning_rate > 0.0)) {
      throw InvalidArgument("bad estimator training schedule");
    }
    if (report.n_goals < 1) throw InvalidArgument("report.n_goals must be positive");
    return 0;
  });
}

GoalSchema RunConfig::schema() const {
  if (schema_path.empty()) return GoalSchema::default_schema();
  if (!std::filesystem::exists(schema_path)) {
    throw ConfigError("schema file not found: " + schema_path);
  }
  try {
    return GoalSchema::load(schema_path);
  } catch (const InvalidArgument& e) {
    throw ConfigError("schema file " + schema_path + ": " + e.what());
  } catch (const FormatError& e) {
    throw ConfigError("schema file " + schema_path + ": " + e.what());
  }
}

UserProfile RunConfig::profile(UserId id) const { return UserProfile::make(id, max_turns, user1); }

EstimatorConfig RunConfig::estimator_config() const {
  EstimatorConfig e;
  e.v_b = estimator.v_b;
  e.loss_mode = estimator.loss_mode;
  e.hidden = estimator.hidden;
  e.budget_scale = estimator.budget_scale;
  return e;
}

TrainConfig RunConfig::train_config() const {
  TrainConfig t;
  t.epochs = estimator.epochs;
  t.batch_size = estimator.batch_size;
  t.optimizer.learning_rate = estimator.learning_rate;
  t.seed = derive_seed(seed, 0xde05);
  return t;
}

std::string resolve_output_dir(const std::string& dir) {
  if (dir.empty()) throw ConfigError("no output directory given");
  const std::filesystem::path p(dir);
  if (p.is_absolute()) return p.lexically_normal().string();
  if (const char* root = std::getenv("DEUS_OUTPUT_ROOT"); root && *root) {
    return (std::filesystem::path(root) / p).lexically_normal().string();
  }
  return p.lexically_normal().string();
}

}  // namespace deus
