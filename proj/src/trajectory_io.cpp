#include "deus/trajectory_io.hpp"

#include <fstream>
#include <istream>
#include <ostream>

#include "deus/errors.hpp"
#include "deus/file_util.hpp"

namespace deus {

using nlohmann::json;

namespace {

json slot_list(const SlotSet& s) {
  json out = json::array();
  for (const auto& k : s) out.push_back({k.domain, k.slot});
  return out;
}

json slot_list(const std::vector<SlotKey>& s) {
  json out = json::array();
  for (const auto& k : s) out.push_back({k.domain, k.slot});
  return out;
}

SlotKey slot_from_json(const json& j) {
  if (!j.is_array() || j.size() != 2) throw FormatError("slot must be [domain, slot]");
  return {j[0].get<std::string>(), j[1].get<std::string>()};
}

SlotSet slot_set_from_json(const json& j) {
  SlotSet out;
  for (const auto& e : j) out.insert(slot_from_json(e));
  return out;
}

template <class F>
auto guarded(const char* what, F&& f) {
  try {
    return f();
  } catch (const json::exception& e) {
    throw FormatError(std::string("bad ") + what + ": " + e.what());
  }
}

}  // namespace

json to_json(const UserGoal& goal) {
  json out = json::array();
  for (const auto& e : goal.entries()) {
    json g = {{"domain", e.key.domain}, {"slot", e.key.slot}, {"kind", to_string(e.kind)}};
    if (e.kind == SlotKind::Constraint) g["value"] = e.value;
    out.push_back(std::move(g));
  }
  return out;
}

UserGoal goal_from_json(const json& j, bool allow_empty) {
  return guarded("goal", [&] {
    std::vector<GoalSlot> entries;
    for (const auto& g : j) {
      GoalSlot s;
      s.key = {g.at("domain").get<std::string>(), g.at("slot").get<std::string>()};
      s.kind = slot_kind_from_string(g.at("kind").get<std::string>());
      if (s.kind == SlotKind::Constraint) s.value = g.value("value", std::string{});
      entries.push_back(std::move(s));
    }
    if (entries.empty()) {
      if (!allow_empty) throw FormatError("empty goal");
      return UserGoal::empty();
    }
    return UserGoal(std::move(entries));
  });
}

json to_json(const AgentAction& a) {
  json out = {{"kind", to_string(a.kind)}, {"slots", slot_list(a.slots)}};
  if (!a.values.empty()) out["values"] = a.values;
  return out;
}

AgentAction action_from_json(const json& j) {
  return guarded("action", [&] {
    AgentAction a;
    a.kind = action_kind_from_string(j.at("kind").get<std::string>());
    for (const auto& s : j.at("slots")) a.slots.push_back(slot_from_json(s));
    a.values = j.value("values", std::vector<std::string>{});
    a.validate();
    return a;
  });
}

json to_json(const DialogueState& s) {
  return {
      {"turn_index", s.turn_index},
      {"satisfied", slot_list(s.satisfied)},
      {"pending", slot_list(s.pending)},
      {"last_user_act",
       {{"kind", to_string(s.last_user_act.kind)}, {"n_slots", s.last_user_act.n_slots}}},
      {"last_agent_action", s.last_agent_action ? to_json(*s.last_agent_action) : json(nullptr)},
      {"history",
       {{"slots_requested", s.history.slots_requested},
        {"slots_informed", s.history.slots_informed},
        {"repeated_actions", s.history.repeated_actions}}},
  };
}

DialogueState state_from_json(const json& j) {
  return guarded("state", [&] {
    DialogueState s;
    s.turn_index = j.at("turn_index").get<int>();
    s.satisfied = slot_set_from_json(j.at("satisfied"));
    s.pending = slot_set_from_json(j.at("pending"));
    const auto& u = j.at("last_user_act");
    s.last_user_act.kind = user_act_kind_from_string(u.at("kind").get<std::string>());
    s.last_user_act.n_slots = u.at("n_slots").get<int>();
    if (!j.at("last_agent_action").is_null()) {
      s.last_agent_action = action_from_json(j.at("last_agent_action"));
    }
    const auto& h = j.at("history");
    s.history.slots_requested = h.at("slots_requested").get<int>();
    s.history.slots_informed = h.at("slots_informed").get<int>();
    s.history.repeated_actions = h.at("repeated_actions").get<int>();
    return s;
  });
}

json to_json(const Trajectory& t) {
  json turns = json::array();
  for (const auto& turn : t.turns) {
    turns.push_back({{"state", to_json(turn.state)}, {"action", to_json(turn.action)}});
  }
  json out = {
      {"format_version", kTrajectoryFormatVersion},
      {"goal", to_json(t.goal)},
      {"turns", std::move(turns)},
      {"status", status_sign(t.status)},
      {"terminal_unsatisfied", to_json(t.terminal_unsatisfied)},
  };
  if (t.true_costs) out["true_costs"] = *t.true_costs;
  if (t.true_potential_cost) out["true_potential_cost"] = *t.true_potential_cost;
  if (t.termination) out["termination"] = to_string(*t.termination);
  return out;
}

Trajectory trajectory_from_json(const json& j) {
  Trajectory t = guarded("trajectory", [&] {
    const int version = j.at("format_version").get<int>();
    if (version != kTrajectoryFormatVersion) {
      throw FormatError("unsupported trajectory format_version " + std::to_string(version));
    }
    Trajectory out;
    out.goal = goal_from_json(j.at("goal"));
    for (const auto& turn : j.at("turns")) {
      out.turns.push_back({state_from_json(turn.at("state")), action_from_json(turn.at("action"))});
    }
    const int status = j.at("status").get<int>();
    if (status != 1 && status != -1) throw FormatError("status must be 1 or -1");
    out.status = status == 1 ? DialogueStatus::Success : DialogueStatus::Failure;
    out.terminal_unsatisfied = goal_from_json(j.at("terminal_unsatisfied"), true);
    if (j.contains("true_costs")) out.true_costs = j["true_costs"].get<std::vector<double>>();
    if (j.contains("true_potential_cost")) {
      out.true_potential_cost = j["true_potential_cost"].get<double>();
    }
    if (j.contains("termination")) {
      out.termination = termination_reason_from_string(j["termination"].get<std::string>());
    }
    return out;
  });
  try {
    t.validate();
  } catch (const InvalidArgument& e) {
    throw FormatError(std::string("invalid trajectory: ") + e.what());
  }
  return t;
}

std::string to_log_line(const Trajectory& t) { return to_json(t).dump(); }

Trajectory from_log_line(const std::string& line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::exception& e) {
    throw FormatError(std::string("bad log line: ") + e.what());
  }
  return trajectory_from_json(j);
}

void write_log(std::ostream& out, const std::vector<Trajectory>& trajs) {
  for (const auto& t : trajs) out << to_log_line(t) << '\n';
}

void write_log(const std::string& path, const std::vector<Trajectory>& trajs) {
  write_file_atomic(path, [&](std::ostream& out) { write_log(out, trajs); });
}

std::vector<Trajectory> read_log(std::istream& in) {
  std::vector<Trajectory> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    out.push_back(from_log_line(line));
  }
  return out;
}

std::vector<Trajectory> read_log(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open log: " + path);
  return read_log(in);
}

}  // namespace deus
