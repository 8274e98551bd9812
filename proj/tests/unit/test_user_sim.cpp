#include <doctest.h>

#include "deus/errors.hpp"
#include "deus/user_sim.hpp"
#include "helpers.hpp"

using namespace deus;

namespace {

UserGoal two_domain_goal() {
  return UserGoal({{{"hotel", "area"}, SlotKind::Constraint, "v1"},
                   {{"hotel", "price"}, SlotKind::Constraint, "v2"},
                   {{"hotel", "phone"}, SlotKind::Request, ""},
                   {{"taxi", "dest"}, SlotKind::Constraint, "v3"},
                   {{"taxi", "car"}, SlotKind::Request, ""}});
}

}  // namespace

TEST_CASE("satisfaction functions") {
  const auto g = two_domain_goal();
  const auto s = initial_state(g);
  CHECK(budget(g) == 7.0);
  CHECK(f2(s, AgentAction::greet()) == -1.0);
  CHECK(f2(s, AgentAction::request({{"hotel", "area"}, {"hotel", "price"}})) == -3.0);
  User1Config cfg;
  CHECK(f1(s, AgentAction::greet(), false, DialogueStatus::Failure, cfg) == -1.0);
  CHECK(f1(s, AgentAction::greet(), true, DialogueStatus::Success, cfg) == 40.0);
  CHECK(f1(s, AgentAction::greet(), true, DialogueStatus::Failure, cfg) == -40.0);
}

TEST_CASE("potential cost projection") {
  const auto g = two_domain_goal();
  // Satisfied part: hotel area + price (2 slots, 1 domain) -> b = 3.
  const auto rest = g.restricted_to({{"hotel", "phone"}, {"taxi", "dest"}, {"taxi", "car"}});
  CHECK(potential_cost_true(-6.0, g, rest) == doctest::Approx(-6.0 / 3.0 * budget(rest)));
  CHECK_THROWS_AS(potential_cost_true(-2.0, g, g), DivisionByZeroBudget);
  CHECK(guarded_potential_cost(-2.0, g, g) == -budget(g));
  CHECK(guarded_potential_cost(-2.0, g, UserGoal::empty()) == 0.0);
}

TEST_CASE("opening utterance satisfies the first constraint of each domain") {
  const auto g = two_domain_goal();
  UserSession session(UserProfile::make(UserId::User2), g);
  CHECK(session.state().satisfied == SlotSet{{"hotel", "area"}, {"taxi", "dest"}});
  CHECK(session.state().last_user_act.kind == UserActKind::Open);
  CHECK(session.remaining_budget() == 7.0);
}

TEST_CASE("user2 answers one slot per turn, user1 answers all") {
  const auto g = two_domain_goal();
  const auto req = AgentAction::request({{"hotel", "price"}, {"hotel", "phone"}});
  const auto inf = AgentAction::inform({{"hotel", "phone"}, {"taxi", "car"}});
  UserSession u2(UserProfile::make(UserId::User2), g);
  u2.step(inf);
  CHECK(u2.state().last_user_act == UserActSummary{UserActKind::Accept, 1});
  UserSession u1(UserProfile::make(UserId::User1), g);
  u1.step(inf);
  CHECK(u1.state().last_user_act == UserActSummary{UserActKind::Accept, 2});
  // Requesting a request slot hits nothing pending of the wanted kind.
  UserSession u(UserProfile::make(UserId::User2), g);
  u.step(AgentAction::request({{"hotel", "phone"}}));
  CHECK(u.state().last_user_act.kind == UserActKind::Silent);
  u.step(req);
  CHECK(u.state().satisfied.count({"hotel", "price"}) == 1);
}

TEST_CASE("budget exhaustion ends the dialogue as a failure") {
  UserSession s(UserProfile::make(UserId::User2), two_domain_goal());
  int n = 0;
  while (!s.done()) {
    s.step(AgentAction::greet());
    ++n;
  }
  CHECK(n == 8);  // budget 7, -1 per greet, quits once below zero
  CHECK(s.termination_reason() == TerminationReason::BudgetExhausted);
  CHECK(s.status() == DialogueStatus::Failure);
  CHECK_THROWS_AS(s.step(AgentAction::greet()), InvalidArgument);
}

TEST_CASE("simulated constraints hold exactly with ground truth") {
  for (UserId u : {UserId::User1, UserId::User2, UserId::User3}) {
    const auto logs = testing_helpers::simulate(u, 300, 5);
    const auto profile = UserProfile::make(u);
    for (const auto& t : logs) {
      CHECK_NOTHROW(t.validate());
      if (u == UserId::User1) continue;
      const auto reason = *t.termination;
      if (reason != TerminationReason::TaskComplete &&
          reason != TerminationReason::BudgetExhausted) {
        continue;
      }
      double total = profile.budget(t.goal), prefix = total;
      for (int i = 0; i < t.turn_count(); ++i) {
        total += (*t.true_costs)[i];
        if (i + 1 < t.turn_count()) prefix += (*t.true_costs)[i];
        CHECK((*t.true_costs)[i] == profile.turn_cost(t.turns[i].state, t.turns[i].action));
      }
      if (t.status == DialogueStatus::Success) CHECK(total >= 0.0);
      if (t.status == DialogueStatus::Failure) CHECK(total < 0.0);
      CHECK(prefix >= 0.0);
    }
  }
}

TEST_CASE("forward-looking quits are logged with their potential cost") {
  const auto logs = testing_helpers::simulate(UserId::User3, 400, 9);
  int quits = 0;
  for (const auto& t : logs) {
    REQUIRE(t.true_potential_cost.has_value());
    if (t.termination == TerminationReason::ForwardLookingQuit) {
      ++quits;
      double remaining = budget(t.goal);
      for (double c : *t.true_costs) remaining += c;
      CHECK(remaining >= 0.0);
      CHECK(remaining < -*t.true_potential_cost);
    }
  }
  CHECK(quits > 0);
}

TEST_CASE("episodes are deterministic in the seed") {
  const auto a = testing_helpers::simulate(UserId::User2, 20, 77);
  const auto b = testing_helpers::simulate(UserId::User2, 20, 77);
  CHECK(a == b);
}

TEST_CASE("max turns") {
  UserSession s(UserProfile::make(UserId::User1, 3), two_domain_goal());
  while (!s.done()) s.step(AgentAction::greet());
  CHECK(s.termination_reason() == TerminationReason::MaxTurns);
  CHECK(s.turns() == 3);
  CHECK(s.status() == DialogueStatus::Failure);
}
