#pragma once

#include <cstdint>
#include <functional>
#include <string>

#include "deus/dialogue.hpp"
#include "deus/rng.hpp"

namespace deus {

enum class UserId { User1, User2, User3 };

const char* to_string(UserId id);
UserId user_id_from_string(const std::string& s);

// Magnitudes of User1's terminal reward (r) and per-turn penalty (p).
struct User1Config {
  double r = 40.0;
  double p = 1.0;
  void validate() const;
};

// User1 turn-level satisfaction: +|r| / -|r| on the terminal turn depending on
// the outcome, -|p| on every earlier turn.
double f1(const DialogueState& state, const AgentAction& action, bool is_terminal,
          DialogueStatus status, const User1Config& cfg);

// User2/User3 turn-level satisfaction: -(slots in the action) - 1.
double f2(const DialogueState& state, const AgentAction& action);

// Patience budget shared by all users: slot count + domain count.
double budget(const UserGoal& goal);

// Projected cost of the remaining goal for a forward-looking user:
//   spent / b(goal - goal') * b(goal')
// spent is the (negative) sum of turn costs so far. Throws DivisionByZeroBudget
// when nothing has been satisfied yet.
double potential_cost_true(double spent, const UserGoal& goal, const UserGoal& remaining);

// Same quantity evaluated after the first k turns of a simulated trajectory
// (uses its true_costs).
double potential_cost_true(const Trajectory& traj, int k);

// potential_cost_true with the guard used by the simulator: before any slot is
// satisfied the projected cost is the nominal -b(goal').
double guarded_potential_cost(double spent, const UserGoal& goal, const UserGoal& remaining);

// How the simulated user reacts to an agent action.
struct ResponsePolicy {
  int max_slots_per_turn = 0;  // 0 = no limit
  bool opening_constraint_per_domain = true;
};

struct UserProfile {
  UserId id = UserId::User2;
  User1Config user1;
  ResponsePolicy response;
  int max_turns = 40;

  static UserProfile make(UserId id, int max_turns = 40, User1Config cfg = {});

  bool forward_looking() const { return id == UserId::User3; }
  // Ground-truth cost charged against the patience budget for one agent turn.
  double turn_cost(const DialogueState& state, const AgentAction& action) const;
  double budget(const UserGoal& goal) const { return deus::budget(goal); }
  void validate() const;
};

struct EpisodeOutcome {
  Trajectory trajectory;
  TerminationReason termination_reason = TerminationReason::MaxTurns;
};

// One live dialogue between a simulated user and some agent. The state after
// construction already reflects the user's opening utterance.
class UserSession {
 public:
  UserSession(const UserProfile& profile, const UserGoal& goal);

  const DialogueState& state() const { return state_; }
  const UserGoal& goal() const { return goal_; }
  bool done() const { return done_; }
  double remaining_budget() const { return remaining_; }
  double spent() const { return spent_; }
  int turns() const { return static_cast<int>(traj_.turns.size()); }

  // Plays one agent turn and the user's reaction. Returns the true turn cost.
  double step(const AgentAction& action);

  DialogueStatus status() const;
  TerminationReason termination_reason() const { return reason_; }
  EpisodeOutcome outcome() const;

 private:
  void finish(TerminationReason reason);

  UserProfile profile_;
  UserGoal goal_;
  DialogueState state_;
  Trajectory traj_;
  double remaining_ = 0.0;
  double spent_ = 0.0;
  bool done_ = false;
  TerminationReason reason_ = TerminationReason::MaxTurns;
};

using AgentPolicy = std::function<AgentAction(const DialogueState&, Rng&)>;

EpisodeOutcome run_episode(const UserProfile& profile, const AgentPolicy& policy,
                           const UserGoal& goal, std::uint64_t seed);

}  // namespace deus
