#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "deus/dialogue.hpp"

namespace deus {

// Trajectory log: one JSON object per line. Field names (format_version 1):
//   format_version        int, always 1
//   goal                  [{domain, slot, kind: "constraint"|"request", value?}]
//   turns                 [{state, action}]
//     state               {turn_index, satisfied: [[d,s]], pending: [[d,s]],
//                          last_user_act: {kind, n_slots},
//                          last_agent_action: action|null,
//                          history: {slots_requested, slots_informed,
//                                    repeated_actions}}
//     action              {kind: "request"|"inform"|"greet"|"close",
//                          slots: [[d,s]], values?: [string]}
//   status                1 | -1
//   terminal_unsatisfied  same shape as goal (may be empty)
//   true_costs            [number]   optional, simulation only
//   true_potential_cost   number     optional, forward-looking users only
//   termination           string     optional
inline constexpr int kTrajectoryFormatVersion = 1;

nlohmann::json to_json(const UserGoal& goal);
UserGoal goal_from_json(const nlohmann::json& j, bool allow_empty = false);
nlohmann::json to_json(const AgentAction& a);
AgentAction action_from_json(const nlohmann::json& j);
nlohmann::json to_json(const DialogueState& s);
DialogueState state_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Trajectory& t);
Trajectory trajectory_from_json(const nlohmann::json& j);

std::string to_log_line(const Trajectory& t);
Trajectory from_log_line(const std::string& line);

void write_log(std::ostream& out, const std::vector<Trajectory>& trajs);
void write_log(const std::string& path, const std::vector<Trajectory>& trajs);
std::vector<Trajectory> read_log(std::istream& in);
std::vector<Trajectory> read_log(const std::string& path);

}  // namespace deus
