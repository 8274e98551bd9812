#pragma once

#include <vector>

#include "deus/agent.hpp"
#include "deus/goal_schema.hpp"
#include "deus/rng.hpp"
#include "deus/user_sim.hpp"

namespace testing_helpers {

// Uniformly random valid template in the active domain.
inline deus::AgentPolicy random_policy(const deus::GoalSchema& schema) {
  auto templates = std::make_shared<deus::ActionTemplateSet>(schema);
  return [schema, templates](const deus::DialogueState& s, deus::Rng& rng) {
    const auto valid = templates->valid_indices(schema, s);
    return templates->instantiate(valid[rng.index(valid.size())], schema, s);
  };
}

inline std::vector<deus::Trajectory> simulate(deus::UserId user, int n, std::uint64_t seed,
                                              int max_turns = 40) {
  const auto schema = deus::GoalSchema::default_schema();
  const auto profile = deus::UserProfile::make(user, max_turns);
  const auto policy = random_policy(schema);
  std::vector<deus::Trajectory> out;
  for (int i = 0; i < n; ++i) {
    const auto goal = deus::episode_goal(schema, {}, seed, i);
    out.push_back(deus::run_episode(profile, policy, goal, deus::derive_seed(seed, 1000 + i))
                      .trajectory);
  }
  return out;
}

}  // namespace testing_helpers
