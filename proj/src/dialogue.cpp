#include "deus/dialogue.hpp"

#include <algorithm>

#include "deus/errors.hpp"

namespace deus {

AgentAction AgentAction::request(std::vector<SlotKey> slots) {
  AgentAction a{ActionKind::Request, std::move(slots), {}};
  a.validate();
  return a;
}

AgentAction AgentAction::inform(std::vector<SlotKey> slots, std::vector<std::string> values) {
  AgentAction a{ActionKind::Inform, std::move(slots), std::move(values)};
  a.validate();
  return a;
}

void AgentAction::validate() const {
  switch (kind) {
    case ActionKind::Request:
      if (slots.empty()) throw InvalidArgument("request action without slots");
      if (!values.empty()) throw InvalidArgument("request action carries values");
      break;
    case ActionKind::Inform:
      if (slots.empty()) throw InvalidArgument("inform action without slots");
      if (!values.empty() && values.size() != slots.size()) {
        throw InvalidArgument("inform values do not match slots");
      }
      break;
    case ActionKind::Greet:
    case ActionKind::Close:
      if (!slots.empty() || !values.empty()) {
        throw InvalidArgument("greet/close actions carry no slots");
      }
      break;
  }
}

DialogueState initial_state(const UserGoal& goal) {
  DialogueState s;
  s.pending = goal.slot_set();
  return s;
}

DialogueState mark_satisfied(const DialogueState& state, const std::vector<SlotKey>& pairs) {
  DialogueState out = state;
  for (const auto& p : pairs) {
    if (out.satisfied.count(p)) continue;
    auto it = out.pending.find(p);
    if (it == out.pending.end()) {
      throw UnknownSlot("slot not in goal: " + p.domain + "." + p.slot);
    }
    out.pending.erase(it);
    out.satisfied.insert(p);
  }
  return out;
}

void Trajectory::validate() const {
  if (goal.is_empty()) throw InvalidArgument("trajectory without goal");
  if (turns.empty()) throw InvalidArgument("trajectory without turns");
  const SlotSet all = goal.slot_set();
  const SlotSet* prev = nullptr;
  for (std::size_t t = 0; t < turns.size(); ++t) {
    const auto& st = turns[t].state;
    turns[t].action.validate();
    if (st.turn_index != static_cast<int>(t)) {
      throw InvalidArgument("turn_index does not match turn position");
    }
    SlotSet u = st.satisfied;
    for (const auto& p : st.pending) {
      if (!u.insert(p).second) throw InvalidArgument("slot both satisfied and pending");
    }
    if (u != all) throw InvalidArgument("satisfied/pending do not partition the goal");
    if (prev && !std::includes(st.satisfied.begin(), st.satisfied.end(), prev->begin(),
                               prev->end())) {
      throw InvalidArgument("satisfied slot reverted to pending");
    }
    prev = &st.satisfied;
  }
  const SlotSet rest = terminal_unsatisfied.slot_set();
  if (!std::includes(turns.back().state.pending.begin(), turns.back().state.pending.end(),
                     rest.begin(), rest.end())) {
    throw InvalidArgument("terminal remainder is not a subset of the last pending set");
  }
  if ((status == DialogueStatus::Success) != terminal_unsatisfied.is_empty()) {
    throw InvalidArgument("status must be success iff nothing remains unsatisfied");
  }
  if (true_costs && true_costs->size() != turns.size()) {
    throw InvalidArgument("true_costs length differs from turn count");
  }
}

UserGoal remaining_goal(const Trajectory& traj, int k) {
  if (k < 0 || k > traj.turn_count()) throw InvalidArgument("prefix length out of range");
  if (k == traj.turn_count()) return traj.terminal_unsatisfied;
  return traj.goal.restricted_to(traj.turns[k].state.pending);
}

const char* to_string(ActionKind k) {
  switch (k) {
    case ActionKind::Request: return "request";
    case ActionKind::Inform: return "inform";
    case ActionKind::Greet: return "greet";
    case ActionKind::Close: return "close";
  }
  return "?";
}

ActionKind action_kind_from_string(const std::string& s) {
  if (s == "request") return ActionKind::Request;
  if (s == "inform") return ActionKind::Inform;
  if (s == "greet") return ActionKind::Greet;
  if (s == "close") return ActionKind::Close;
  throw FormatError("unknown action kind: " + s);
}

const char* to_string(UserActKind k) {
  switch (k) {
    case UserActKind::None: return "none";
    case UserActKind::Open: return "open";
    case UserActKind::Answer: return "answer";
    case UserActKind::Accept: return "accept";
    case UserActKind::Silent: return "silent";
  }
  return "?";
}

UserActKind user_act_kind_from_string(const std::string& s) {
  if (s == "none") return UserActKind::None;
  if (s == "open") return UserActKind::Open;
  if (s == "answer") return UserActKind::Answer;
  if (s == "accept") return UserActKind::Accept;
  if (s == "silent") return UserActKind::Silent;
  throw FormatError("unknown user act kind: " + s);
}

const char* to_string(TerminationReason r) {
  switch (r) {
    case TerminationReason::TaskComplete: return "task_complete";
    case TerminationReason::BudgetExhausted: return "budget_exhausted";
    case TerminationReason::ForwardLookingQuit: return "forward_looking_quit";
    case TerminationReason::MaxTurns: return "max_turns";
  }
  return "?";
}

TerminationReason termination_reason_from_string(const std::string& s) {
  if (s == "task_complete") return TerminationReason::TaskComplete;
  if (s == "budget_exhausted") return TerminationReason::BudgetExhausted;
  if (s == "forward_looking_quit") return TerminationReason::ForwardLookingQuit;
  if (s == "max_turns") return TerminationReason::MaxTurns;
  throw FormatError("unknown termination reason: " + s);
}

}  // namespace deus
