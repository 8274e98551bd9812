#pragma once

#include <optional>
#include <string>
#include <vector>

#include "deus/goal_schema.hpp"

namespace deus {

enum class ActionKind { Request, Inform, Greet, Close };

// One agent turn. Request asks the user for constraint slots; Inform provides
// values for the user's request slots. Greet/Close carry no slots.
struct AgentAction {
  ActionKind kind = ActionKind::Greet;
  std::vector<SlotKey> slots;
  std::vector<std::string> values;  // optional, Inform only

  static AgentAction greet() { return {ActionKind::Greet, {}, {}}; }
  static AgentAction close() { return {ActionKind::Close, {}, {}}; }
  static AgentAction request(std::vector<SlotKey> slots);
  static AgentAction inform(std::vector<SlotKey> slots, std::vector<std::string> values = {});

  int slot_count() const { return static_cast<int>(slots.size()); }
  // Throws InvalidArgument when the slot-count invariant is broken.
  void validate() const;

  bool operator==(const AgentAction&) const = default;
};

inline int n_slot(const AgentAction& a) { return a.slot_count(); }

enum class UserActKind {
  None,     // nothing said yet
  Open,     // opening utterance, before the first agent turn
  Answer,   // answered requested constraint slot(s)
  Accept,   // took up informed request slot(s)
  Silent,   // the agent's action hit nothing pending
};

struct UserActSummary {
  UserActKind kind = UserActKind::None;
  int n_slots = 0;
  bool operator==(const UserActSummary&) const = default;
};

struct HistoryStats {
  int slots_requested = 0;
  int slots_informed = 0;
  int repeated_actions = 0;
  bool operator==(const HistoryStats&) const = default;
};

// Bounded summary of the dialogue so far. satisfied and pending partition
// the goal's slot set.
struct DialogueState {
  int turn_index = 0;
  SlotSet satisfied;
  SlotSet pending;
  UserActSummary last_user_act;
  std::optional<AgentAction> last_agent_action;
  HistoryStats history;

  bool operator==(const DialogueState&) const = default;
};

DialogueState initial_state(const UserGoal& goal);

// Moves pairs from pending to satisfied. Idempotent for already satisfied
// pairs; throws UnknownSlot for pairs outside the goal.
DialogueState mark_satisfied(const DialogueState& state, const std::vector<SlotKey>& pairs);

enum class DialogueStatus : int { Success = 1, Failure = -1 };

inline int status_sign(DialogueStatus s) { return static_cast<int>(s); }

struct Turn {
  DialogueState state;  // state the agent acted in
  AgentAction action;
  bool operator==(const Turn&) const = default;
};

enum class TerminationReason { TaskComplete, BudgetExhausted, ForwardLookingQuit, MaxTurns };

struct Trajectory {
  UserGoal goal = UserGoal::empty();
  std::vector<Turn> turns;
  DialogueStatus status = DialogueStatus::Failure;
  std::optional<std::vector<double>> true_costs;  // simulation only
  UserGoal terminal_unsatisfied = UserGoal::empty();
  std::optional<double> true_potential_cost;  // forward-looking users only
  std::optional<TerminationReason> termination;

  int turn_count() const { return static_cast<int>(turns.size()); }
  // Throws InvalidArgument on a broken invariant.
  void validate() const;

  bool operator==(const Trajectory&) const = default;
};

// goal' after the first k agent turns: the goal restricted to the slots still
// pending at that point. k == turn_count() gives the terminal remainder.
UserGoal remaining_goal(const Trajectory& traj, int k);

const char* to_string(ActionKind k);
ActionKind action_kind_from_string(const std::string& s);
const char* to_string(UserActKind k);
UserActKind user_act_kind_from_string(const std::string& s);
const char* to_string(TerminationReason r);
TerminationReason termination_reason_from_string(const std::string& s);

}  // namespace deus
