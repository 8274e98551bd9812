#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "deus/dialogue.hpp"
#include "deus/estimator.hpp"
#include "deus/goal_schema.hpp"
#include "deus/mlp.hpp"
#include "deus/rng.hpp"
#include "deus/user_sim.hpp"

namespace deus {

// An action skeleton relative to the active domain: the first domain (in name
// order) that still has pending slots. Request templates pick positions in the
// domain's inform-slot list, Inform templates positions in its request-slot list.
struct ActionTemplate {
  ActionKind kind = ActionKind::Greet;
  std::vector<int> positions;
  bool operator==(const ActionTemplate&) const = default;
};

std::string describe(const ActionTemplate& t);
ActionTemplate template_from_description(const std::string& s);

class ActionTemplateSet {
 public:
  // All Request/Inform templates with 1..max_slots positions, then Greet, Close.
  ActionTemplateSet(const GoalSchema& schema, int max_slots = 3);
  explicit ActionTemplateSet(std::vector<ActionTemplate> templates);

  std::size_t size() const { return templates_.size(); }
  const ActionTemplate& operator[](std::size_t i) const { return templates_[i]; }
  const std::vector<ActionTemplate>& templates() const { return templates_; }

  // Active domain of a state, or nullptr when nothing is pending.
  static const DomainDef* active_domain(const GoalSchema& schema, const DialogueState& s);
  // Whether template i can be instantiated in the state's active domain.
  bool valid(std::size_t i, const GoalSchema& schema, const DialogueState& s) const;
  std::vector<std::size_t> valid_indices(const GoalSchema& schema, const DialogueState& s) const;
  AgentAction instantiate(std::size_t i, const GoalSchema& schema, const DialogueState& s) const;
  // Index of the template that instantiates to `a` in state s, or -1.
  int index_of(const AgentAction& a, const GoalSchema& schema, const DialogueState& s) const;

 private:
  std::vector<ActionTemplate> templates_;
};

// State features seen by the Q network.
//   inf_pend_<i>, inf_sat_<i>    active domain inform position i pending / satisfied
//   req_pend_<j>, req_sat_<j>    active domain request position j pending / satisfied
//   pending_total, satisfied_total, pending_domains
//   turn
//   user_<kind>                  one-hot last user act (none, open, answer, accept, silent)
//   user_slots
class StateFeaturizer {
 public:
  StateFeaturizer(GoalSchema schema, int max_turns);
  const GoalSchema& schema() const { return schema_; }
  int max_turns() const { return max_turns_; }
  std::size_t dim() const { return names_.size(); }
  const std::vector<std::string>& layout() const { return names_; }
  std::vector<double> features(const DialogueState& s) const;

 private:
  GoalSchema schema_;
  int max_turns_;
  std::size_t n_inform_;
  std::size_t n_request_;
  std::vector<std::string> names_;
};

struct AgentHyperparams {
  double discount = 0.95;
  std::size_t replay_capacity = 50000;
  int target_sync_steps = 500;
  double epsilon_start = 1.0;
  double epsilon_end = 0.05;
  double epsilon_decay_fraction = 0.5;  // of all training episodes
  int batch_size = 32;
  int train_every = 1;  // environment steps per gradient step
  int warmup_steps = 500;
  std::vector<int> hidden = {64};
  OptimizerConfig optimizer;
  double huber_delta = 1.0;
  int curve_window = 500;  // training episodes per learning-curve point
  int max_slots = 3;
  bool double_q = true;  // select the bootstrap action with the online net

  void validate() const;
};

class QPolicy {
 public:
  QPolicy(StateFeaturizer featurizer, ActionTemplateSet templates, FeedForwardNet q_net,
          double discount, double epsilon);
  // Freshly initialised network.
  static QPolicy create(const GoalSchema& schema, int max_turns, const AgentHyperparams& hp,
                        std::uint64_t seed);

  const StateFeaturizer& featurizer() const { return featurizer_; }
  const ActionTemplateSet& templates() const { return templates_; }
  const FeedForwardNet& q_net() const { return q_net_; }
  FeedForwardNet& q_net() { return q_net_; }
  double discount() const { return discount_; }
  double epsilon() const { return epsilon_; }
  void set_epsilon(double e);

  std::vector<double> q_values(const DialogueState& s) const;
  // Highest-valued valid template; ties go to the lowest index.
  std::size_t greedy_index(const DialogueState& s) const;
  std::size_t select_index(const DialogueState& s, bool explore, Rng& rng) const;

  void save(std::ostream& out) const;
  static QPolicy load(std::istream& in);
  void save(const std::string& path) const;
  static QPolicy load(const std::string& path);

 private:
  StateFeaturizer featurizer_;
  ActionTemplateSet templates_;
  FeedForwardNet q_net_;
  double discount_;
  double epsilon_;
};

// Epsilon-greedy when explore is set, greedy otherwise.
AgentAction act(const QPolicy& policy, const DialogueState& state, bool explore, Rng& rng);
AgentPolicy as_agent_policy(const QPolicy& policy, bool explore);

// Per-turn training reward.
class RewardModel {
 public:
  virtual ~RewardModel() = default;
  virtual double reward(const DialogueState& s, const AgentAction& a, const UserGoal& goal,
                        bool terminal, DialogueStatus status) const = 0;
};

// f1 with its terminal +-r.
class User1Reward final : public RewardModel {
 public:
  explicit User1Reward(User1Config cfg) : cfg_(cfg) {}
  double reward(const DialogueState& s, const AgentAction& a, const UserGoal& goal,
                bool terminal, DialogueStatus status) const override;

 private:
  User1Config cfg_;
};

// f(s,a) of a satisfaction model on every turn, plus b(goal) when the
// dialogue ends in success (the budget the user keeps).
class BudgetReward final : public RewardModel {
 public:
  explicit BudgetReward(const SatisfactionModel& model) : model_(model) {}
  double reward(const DialogueState& s, const AgentAction& a, const UserGoal& goal,
                bool terminal, DialogueStatus status) const override;

 private:
  const SatisfactionModel& model_;
};

class ZeroReward final : public RewardModel {
 public:
  double reward(const DialogueState&, const AgentAction&, const UserGoal&, bool,
                DialogueStatus) const override {
    return 0.0;
  }
};

struct Transition {
  std::vector<double> state;
  std::size_t action = 0;
  double reward = 0.0;
  std::vector<double> next_state;
  std::vector<std::size_t> next_valid;
  bool done = false;
};

struct CurvePoint {
  int episodes = 0;        // training episodes seen so far
  double success_rate = 0.0;  // over the last window
  double mean_return = 0.0;
};

struct LearningCurve {
  std::vector<CurvePoint> points;
  void write_csv(std::ostream& out) const;
};

struct AgentTrainResult {
  QPolicy policy;
  LearningCurve curve;
};

// Called after every training episode with its log and the transitions it
// contributed to the replay buffer.
using EpisodeObserver =
    std::function<void(const EpisodeOutcome&, const std::vector<Transition>&)>;

AgentTrainResult train_agent(const UserProfile& profile, const RewardModel& reward,
                             const GoalSchema& schema, const GoalComplexity& complexity,
                             int episodes, std::uint64_t seed, const AgentHyperparams& hp,
                             const EpisodeObserver& observer = {});

struct AgentEvaluation {
  int episodes = 0;
  double success_rate = 0.0;
  double mean_turns = 0.0;
  double mean_remaining_budget = 0.0;
  int successes = 0;
};

// Greedy play against n_goals sampled goals.
AgentEvaluation evaluate_agent(const AgentPolicy& policy, const UserProfile& profile,
                               const GoalSchema& schema, const GoalComplexity& complexity,
                               int n_goals, std::uint64_t seed);
AgentEvaluation evaluate_agent(const QPolicy& policy, const UserProfile& profile,
                               const GoalComplexity& complexity, int n_goals,
                               std::uint64_t seed);

// Plays n dialogues with an epsilon-greedy policy and returns their logs.
std::vector<Trajectory> collect_dialogues(const QPolicy& policy, double epsilon,
                                          const UserProfile& profile,
                                          const GoalComplexity& complexity, int n,
                                          std::uint64_t seed);

// Goal sampled for episode `i` of a run seeded with `seed`.
UserGoal episode_goal(const GoalSchema& schema, const GoalComplexity& complexity,
                      std::uint64_t seed, int i);

}  // namespace deus
