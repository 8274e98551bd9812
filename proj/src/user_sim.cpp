#include "deus/user_sim.hpp"

#include <cmath>

#include "deus/errors.hpp"

namespace deus {

const char* to_string(UserId id) {
  switch (id) {
    case UserId::User1: return "user1";
    case UserId::User2: return "user2";
    case UserId::User3: return "user3";
  }
  return "?";
}

UserId user_id_from_string(const std::string& s) {
  if (s == "user1") return UserId::User1;
  if (s == "user2") return UserId::User2;
  if (s == "user3") return UserId::User3;
  throw InvalidArgument("unknown user profile: " + s);
}

void User1Config::validate() const {
  if (!(r > 0.0) || !(p > 0.0) || !(p < r)) {
    throw InvalidArgument("User1 config needs r > 0, p > 0 and p < r");
  }
}

double f1(const DialogueState&, const AgentAction&, bool is_terminal, DialogueStatus status,
          const User1Config& cfg) {
  if (is_terminal) {
    return status == DialogueStatus::Success ? std::abs(cfg.r) : -std::abs(cfg.r);
  }
  return -std::abs(cfg.p);
}

double f2(const DialogueState&, const AgentAction& action) {
  return -static_cast<double>(action.slot_count()) - 1.0;
}

double budget(const UserGoal& goal) {
  return static_cast<double>(goal.slot_count() + goal.domain_count());
}

namespace {

UserGoal satisfied_part(const UserGoal& goal, const UserGoal& remaining) {
  SlotSet done = goal.slot_set();
  for (const auto& e : remaining.entries()) done.erase(e.key);
  return goal.restricted_to(done);
}

}  // namespace

double potential_cost_true(double spent, const UserGoal& goal, const UserGoal& remaining) {
  const double spent_on = budget(satisfied_part(goal, remaining));
  if (spent_on == 0.0) {
    throw DivisionByZeroBudget("no slot satisfied yet: b(goal - goal') = 0");
  }
  return spent / spent_on * budget(remaining);
}

double potential_cost_true(const Trajectory& traj, int k) {
  if (!traj.true_costs) throw InvalidArgument("trajectory carries no true costs");
  if (k < 0 || k > traj.turn_count()) throw InvalidArgument("prefix length out of range");
  double spent = 0.0;
  for (int t = 0; t < k; ++t) spent += (*traj.true_costs)[t];
  return potential_cost_true(spent, traj.goal, remaining_goal(traj, k));
}

double guarded_potential_cost(double spent, const UserGoal& goal, const UserGoal& remaining) {
  if (remaining.is_empty()) return 0.0;
  if (remaining.slot_count() == goal.slot_count()) return -budget(remaining);
  return potential_cost_true(spent, goal, remaining);
}

UserProfile UserProfile::make(UserId id, int max_turns, User1Config cfg) {
  UserProfile p;
  p.id = id;
  p.user1 = cfg;
  p.max_turns = max_turns;
  p.response.max_slots_per_turn = id == UserId::User1 ? 0 : 1;
  p.validate();
  return p;
}

double UserProfile::turn_cost(const DialogueState& state, const AgentAction& action) const {
  if (id == UserId::User1) return -std::abs(user1.p);
  return f2(state, action);
}

void UserProfile::validate() const {
  user1.validate();
  if (max_turns < 1) throw InvalidArgument("max_turns must be positive");
  if (response.max_slots_per_turn < 0) throw InvalidArgument("negative slots per turn");
}

UserSession::UserSession(const UserProfile& profile, const UserGoal& goal)
    : profile_(profile), goal_(goal), state_(initial_state(goal)) {
  if (goal_.is_empty()) throw InvalidArgument("cannot run an episode on an empty goal");
  traj_.goal = goal_;
  traj_.true_costs.emplace();
  remaining_ = profile_.budget(goal_);

  if (profile_.response.opening_constraint_per_domain) {
    // Opening utterance: the first constraint (lexicographic) of every domain.
    std::vector<SlotKey> opening;
    std::string last_domain;
    for (const auto& e : goal_.entries()) {
      if (e.kind != SlotKind::Constraint || e.key.domain == last_domain) continue;
      opening.push_back(e.key);
      last_domain = e.key.domain;
    }
    if (!opening.empty()) {
      state_ = mark_satisfied(state_, opening);
      state_.last_user_act = {UserActKind::Open, static_cast<int>(opening.size())};
    }
  }
}

double UserSession::step(const AgentAction& action) {
  if (done_) throw InvalidArgument("dialogue already terminated");
  action.validate();

  traj_.turns.push_back({state_, action});
  const double cost = profile_.turn_cost(state_, action);
  traj_.true_costs->push_back(cost);
  spent_ += cost;
  remaining_ += cost;

  DialogueState next = state_;
  next.turn_index += 1;
  if (state_.last_agent_action && *state_.last_agent_action == action) {
    next.history.repeated_actions += 1;
  }
  if (action.kind == ActionKind::Request) next.history.slots_requested += action.slot_count();
  if (action.kind == ActionKind::Inform) next.history.slots_informed += action.slot_count();
  next.last_agent_action = action;

  if (remaining_ < 0.0) {
    // Out of patience: the user leaves without answering.
    next.last_user_act = {UserActKind::Silent, 0};
    state_ = std::move(next);
    finish(TerminationReason::BudgetExhausted);
    return cost;
  }

  const SlotKind wanted =
      action.kind == ActionKind::Request ? SlotKind::Constraint : SlotKind::Request;
  SlotSet targets;
  if (action.kind == ActionKind::Request || action.kind == ActionKind::Inform) {
    for (const auto& k : action.slots) {
      if (next.pending.count(k) && goal_.at(k).kind == wanted) targets.insert(k);
    }
  }
  std::vector<SlotKey> taken(targets.begin(), targets.end());
  const int limit = profile_.response.max_slots_per_turn;
  if (limit > 0 && static_cast<int>(taken.size()) > limit) taken.resize(limit);
  next = mark_satisfied(next, taken);
  if (taken.empty()) {
    next.last_user_act = {UserActKind::Silent, 0};
  } else {
    next.last_user_act = {
        action.kind == ActionKind::Request ? UserActKind::Answer : UserActKind::Accept,
        static_cast<int>(taken.size())};
  }
  state_ = std::move(next);

  if (state_.pending.empty()) {
    finish(TerminationReason::TaskComplete);
  } else if (profile_.forward_looking() &&
             remaining_ < -guarded_potential_cost(spent_, goal_,
                                                  goal_.restricted_to(state_.pending))) {
    finish(TerminationReason::ForwardLookingQuit);
  } else if (turns() >= profile_.max_turns) {
    finish(TerminationReason::MaxTurns);
  }
  return cost;
}

void UserSession::finish(TerminationReason reason) {
  done_ = true;
  reason_ = reason;
  traj_.status = reason == TerminationReason::TaskComplete ? DialogueStatus::Success
                                                           : DialogueStatus::Failure;
  traj_.terminal_unsatisfied = goal_.restricted_to(state_.pending);
  traj_.termination = reason;
  if (profile_.forward_looking()) {
    traj_.true_potential_cost =
        guarded_potential_cost(spent_, goal_, traj_.terminal_unsatisfied);
  }
}

DialogueStatus UserSession::status() const { return traj_.status; }

EpisodeOutcome UserSession::outcome() const {
  if (!done_) throw InvalidArgument("dialogue still running");
  return {traj_, reason_};
}

EpisodeOutcome run_episode(const UserProfile& profile, const AgentPolicy& policy,
                           const UserGoal& goal, std::uint64_t seed) {
  Rng rng(seed);
  UserSession session(profile, goal);
  while (!session.done()) session.step(policy(session.state(), rng));
  return session.outcome();
}

}  // namespace deus
