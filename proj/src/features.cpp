#include "deus/features.hpp"

#include "deus/errors.hpp"

namespace deus {

Featurizer::Featurizer(GoalSchema schema, int max_turns)
    : schema_(std::move(schema)), max_turns_(max_turns) {
  if (max_turns_ < 1) throw InvalidArgument("max_turns must be positive");
  sa_names_ = {"act_request", "act_inform", "act_greet", "act_close", "act_slots", "act_hits"};
  for (const auto& d : schema_.domains()) {
    sa_names_.push_back("sat_" + d.name);
    sa_names_.push_back("pend_" + d.name);
  }
  sa_names_.push_back("turn");
  sa_names_.push_back("repeated");

  for (const auto& d : schema_.domains()) goal_names_.push_back("slots_" + d.name);
  goal_names_.push_back("slots_total");
  goal_names_.push_back("domains_total");
}

void Featurizer::state_action(const DialogueState& s, const AgentAction& a,
                              std::vector<double>& out) const {
  out.assign(sa_names_.size(), 0.0);
  out[static_cast<int>(a.kind)] = 1.0;
  out[4] = a.slot_count() / 3.0;
  int hits = 0;
  for (const auto& k : a.slots) hits += static_cast<int>(s.pending.count(k));
  out[5] = hits / 3.0;
  const std::size_t base = 6;
  for (const auto& k : s.satisfied) {
    const int d = schema_.domain_index(k.domain);
    if (d >= 0) out[base + 2 * d] += 1.0 / 6.0;
  }
  for (const auto& k : s.pending) {
    const int d = schema_.domain_index(k.domain);
    if (d >= 0) out[base + 2 * d + 1] += 1.0 / 6.0;
  }
  const std::size_t tail = base + 2 * schema_.domain_count();
  out[tail] = static_cast<double>(s.turn_index) / max_turns_;
  out[tail + 1] = s.last_agent_action && *s.last_agent_action == a ? 1.0 : 0.0;
}

std::vector<double> Featurizer::state_action(const DialogueState& s, const AgentAction& a) const {
  std::vector<double> out;
  state_action(s, a, out);
  return out;
}

std::vector<double> Featurizer::goal(const UserGoal& g) const {
  std::vector<double> out(goal_names_.size(), 0.0);
  for (const auto& e : g.entries()) {
    const int d = schema_.domain_index(e.key.domain);
    if (d < 0) throw UnknownSlot("goal domain not in schema: " + e.key.domain);
    out[d] += 1.0 / 6.0;
  }
  const std::size_t tail = schema_.domain_count();
  out[tail] = g.slot_count() / 10.0;
  out[tail + 1] = g.domain_count() / 3.0;
  return out;
}

}  // namespace deus
