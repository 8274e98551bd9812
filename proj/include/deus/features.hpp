#pragma once

#include <string>
#include <vector>

#include "deus/dialogue.hpp"
#include "deus/goal_schema.hpp"

namespace deus {

// Fixed-size numeric views of (state, action) pairs and of goals.
//
// (state, action) layout, in order:
//   act_request, act_inform, act_greet, act_close   one-hot action kind
//   act_slots                                       n_slot(a) / 3
//   act_hits                                        pending slots the action targets / 3
//   sat_<domain>, pend_<domain>                     per schema domain, counts / 6
//   turn                                            turn_index / max_turns
//   repeated                                        1 if a equals the previous action
//
// goal layout, in order:
//   slots_<domain>                                  per schema domain, count / 6
//   slots_total                                     n_slot / 10
//   domains_total                                   n_domain / 3
class Featurizer {
 public:
  Featurizer(GoalSchema schema, int max_turns);

  const GoalSchema& schema() const { return schema_; }
  int max_turns() const { return max_turns_; }

  std::size_t state_action_dim() const { return sa_names_.size(); }
  std::size_t goal_dim() const { return goal_names_.size(); }
  const std::vector<std::string>& state_action_layout() const { return sa_names_; }
  const std::vector<std::string>& goal_layout() const { return goal_names_; }

  std::vector<double> state_action(const DialogueState& s, const AgentAction& a) const;
  void state_action(const DialogueState& s, const AgentAction& a, std::vector<double>& out) const;
  std::vector<double> goal(const UserGoal& g) const;

 private:
  GoalSchema schema_;
  int max_turns_;
  std::vector<std::string> sa_names_;
  std::vector<std::string> goal_names_;
};

}  // namespace deus
