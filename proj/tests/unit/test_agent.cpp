#include <doctest.h>

#include <cmath>
#include <sstream>

#include "deus/agent.hpp"
#include "deus/errors.hpp"
#include "helpers.hpp"

using namespace deus;

namespace {

const GoalSchema& schema() {
  static const GoalSchema s = GoalSchema::default_schema();
  return s;
}

AgentHyperparams small_hp() {
  AgentHyperparams hp;
  hp.hidden = {16};
  hp.warmup_steps = 50;
  hp.curve_window = 20;
  return hp;
}

}  // namespace

TEST_CASE("template set over the default schema") {
  const ActionTemplateSet ts(schema());
  CHECK(ts.size() == 19);  // 14 request combos, 3 inform combos, greet, close
  CHECK(ts[17].kind == ActionKind::Greet);
  CHECK(ts[18].kind == ActionKind::Close);
  for (const auto& t : ts.templates()) CHECK(template_from_description(describe(t)) == t);
  const auto goal = sample_goal(schema(), 12);
  const auto s = initial_state(goal);
  const DomainDef* d = ActionTemplateSet::active_domain(schema(), s);
  REQUIRE(d != nullptr);
  CHECK(d->name == s.pending.begin()->domain);
  for (std::size_t i : ts.valid_indices(schema(), s)) {
    const auto a = ts.instantiate(i, schema(), s);
    CHECK_NOTHROW(a.validate());
    CHECK(ts.index_of(a, schema(), s) == static_cast<int>(i));
    for (const auto& k : a.slots) CHECK(k.domain == d->name);
  }
  CHECK_THROWS_AS(ActionTemplateSet(schema(), 0), InvalidArgument);
}

TEST_CASE("state features") {
  const StateFeaturizer fz(schema(), 40);
  CHECK(fz.dim() == 2 * 4 + 2 * 2 + 3 + 1 + 5 + 1);
  const auto goal = sample_goal(schema(), 3);
  const auto x = fz.features(initial_state(goal));
  CHECK(x.size() == fz.dim());
  for (double v : x) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
}

TEST_CASE("Q network TD gradient matches finite differences") {
  const auto hp = small_hp();
  auto policy = QPolicy::create(schema(), 40, hp, 5);
  auto& net = policy.q_net();
  Rng rng(9);
  const auto logs = testing_helpers::simulate(UserId::User2, 5, 2);
  const double h = 1e-5;
  double worst = 0.0;
  for (const auto& t : logs) {
    const auto x = policy.featurizer().features(t.turns.front().state);
    for (std::size_t a = 0; a < policy.templates().size(); a += 3) {
      for (double y : {-3.0, 0.2, 4.0}) {  // TD errors inside and outside the Huber band
        auto loss = [&] {
          const double td = net.forward(x)[a] - y;
          return std::abs(td) <= hp.huber_delta ? 0.5 * td * td
                                                : hp.huber_delta * (std::abs(td) - 0.5 * hp.huber_delta);
        };
        FeedForwardNet::Tape tape;
        net.forward(x, tape);
        const double td = tape.output()[a] - y;
        if (std::abs(std::abs(td) - hp.huber_delta) < 1e-3) continue;
        std::vector<double> up(policy.templates().size(), 0.0);
        up[a] = std::clamp(td, -hp.huber_delta, hp.huber_delta);
        const auto g = net.backward(tape, up);
        for (std::size_t p = 0; p < net.param_count(); p += 7) {
          const double o = net.params()[p];
          net.params()[p] = o + h;
          const double l_up = loss();
          net.params()[p] = o - h;
          const double l_down = loss();
          net.params()[p] = o;
          const double fd = (l_up - l_down) / (2 * h);
          if (std::abs(fd) < 1e-8 && std::abs(g[p]) < 1e-8) continue;
          worst = std::max(worst, std::abs(fd - g[p]) / (std::abs(fd) + std::abs(g[p])));
        }
      }
    }
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("epsilon = 1 picks uniformly among valid templates (chi-square, df 18)") {
  auto policy = QPolicy::create(schema(), 40, small_hp(), 1);
  policy.set_epsilon(1.0);
  const auto s = initial_state(sample_goal(schema(), 4));
  const auto valid = policy.templates().valid_indices(schema(), s);
  REQUIRE(valid.size() == 19);
  std::vector<int> counts(policy.templates().size(), 0);
  Rng rng(123);
  const int n = 19000;
  for (int i = 0; i < n; ++i) ++counts[policy.select_index(s, true, rng)];
  const double expected = static_cast<double>(n) / valid.size();
  double chi2 = 0.0;
  for (std::size_t i : valid) chi2 += (counts[i] - expected) * (counts[i] - expected) / expected;
  CHECK(chi2 < 34.805);  // 0.99 quantile of chi-square with 18 degrees of freedom
}

TEST_CASE("greedy selection breaks ties toward the lowest index") {
  auto policy = QPolicy::create(schema(), 40, small_hp(), 1);
  policy.q_net().zero_output_layer();
  const auto s = initial_state(sample_goal(schema(), 4));
  CHECK(policy.greedy_index(s) == 0);
  Rng rng(1);
  policy.set_epsilon(0.0);
  CHECK(policy.select_index(s, true, rng) == 0);
  CHECK_THROWS_AS(policy.set_epsilon(1.5), InvalidArgument);
}

TEST_CASE("replay receives exactly the transitions of each episode") {
  const auto profile = UserProfile::make(UserId::User1);
  const User1Reward reward(profile.user1);
  const ActionTemplateSet ts(schema());
  const StateFeaturizer fz(schema(), profile.max_turns);
  int episodes_seen = 0;
  auto observer = [&](const EpisodeOutcome& out, const std::vector<Transition>& trs) {
    ++episodes_seen;
    const auto& traj = out.trajectory;
    REQUIRE(trs.size() == traj.turns.size());
    for (std::size_t i = 0; i < trs.size(); ++i) {
      const auto& tr = trs[i];
      const auto& turn = traj.turns[i];
      CHECK(tr.state == fz.features(turn.state));
      CHECK(ts.instantiate(tr.action, schema(), turn.state) == turn.action);
      const bool last = i + 1 == trs.size();
      CHECK(tr.done == last);
      CHECK(tr.next_valid.empty() == last);
      if (!last) {
        CHECK(tr.next_state == trs[i + 1].state);
        CHECK(tr.next_valid == ts.valid_indices(schema(), traj.turns[i + 1].state));
      }
      CHECK(tr.reward == f1(turn.state, turn.action, last, traj.status, profile.user1));
    }
  };
  train_agent(profile, reward, schema(), {}, 30, 3, small_hp(), observer);
  CHECK(episodes_seen == 30);
}

TEST_CASE("training is deterministic and the policy file round-trips") {
  const auto profile = UserProfile::make(UserId::User1);
  const User1Reward reward(profile.user1);
  const auto a = train_agent(profile, reward, schema(), {}, 60, 8, small_hp());
  const auto b = train_agent(profile, reward, schema(), {}, 60, 8, small_hp());
  std::stringstream sa, sb;
  a.policy.save(sa);
  b.policy.save(sb);
  CHECK(sa.str() == sb.str());
  CHECK(a.curve.points.size() == 3);
  CHECK(a.curve.points.back().episodes == 60);
  const auto back = QPolicy::load(sa);
  std::stringstream again;
  back.save(again);
  CHECK(again.str() == sb.str());
  std::stringstream bad("deus-policy 7\n");
  CHECK_THROWS_AS(QPolicy::load(bad), FormatError);
}

TEST_CASE("reward models") {
  const auto goal = sample_goal(schema(), 2);
  const auto s = initial_state(goal);
  const GroundTruthModel gt(UserProfile::make(UserId::User2));
  const BudgetReward br(gt);
  const auto a = AgentAction::greet();
  CHECK(br.reward(s, a, goal, false, DialogueStatus::Failure) == -1.0);
  CHECK(br.reward(s, a, goal, true, DialogueStatus::Failure) == -1.0);
  CHECK(br.reward(s, a, goal, true, DialogueStatus::Success) == -1.0 + budget(goal));
  CHECK(ZeroReward().reward(s, a, goal, true, DialogueStatus::Success) == 0.0);
}

TEST_CASE("a User1 agent learns the task") {
  const auto profile = UserProfile::make(UserId::User1);
  auto hp = small_hp();
  hp.hidden = {32};
  const auto res = train_agent(profile, User1Reward(profile.user1), schema(), {}, 800, 1, hp);
  const auto ev = evaluate_agent(res.policy, profile, {}, 200, 99);
  CHECK(ev.success_rate > 0.8);
  const auto logs = collect_dialogues(res.policy, 0.5, UserProfile::make(UserId::User2), {}, 25, 4);
  CHECK(logs.size() == 25);
  CHECK(logs == collect_dialogues(res.policy, 0.5, UserProfile::make(UserId::User2), {}, 25, 4));
}

TEST_CASE("zero reward learns nothing: greedy success stays at the untrained level") {
  const auto profile = UserProfile::make(UserId::User1);
  AgentHyperparams hp;
  double zero = 0.0, untrained = 0.0;
  const int seeds = 5;
  for (int seed = 1; seed <= seeds; ++seed) {
    const auto res = train_agent(profile, ZeroReward(), schema(), {}, 300, seed, hp);
    const auto fresh = QPolicy::create(schema(), profile.max_turns, hp, derive_seed(seed, 0xa9e1));
    zero += evaluate_agent(res.policy, profile, {}, 500, 5).success_rate / seeds;
    untrained += evaluate_agent(fresh, profile, {}, 500, 5).success_rate / seeds;
  }
  CHECK(std::abs(zero - untrained) < 0.05);
  CHECK(zero < 0.2);
}
