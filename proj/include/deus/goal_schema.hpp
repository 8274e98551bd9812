#pragma once

#include <compare>
#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

namespace deus {

struct DomainDef {
  std::string name;
  std::vector<std::string> inform_slots;   // constraints the user states
  std::vector<std::string> request_slots;  // values the user wants to learn
};

// Synthetic multi-domain slot universe. Immutable after construction.
class GoalSchema {
 public:
  explicit GoalSchema(std::vector<DomainDef> domains, int value_vocab_size = 8);

  // 5 domains x (4 inform + 2 request) slots, 8 value tokens per slot.
  static GoalSchema default_schema();

  static GoalSchema from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
  static GoalSchema load(const std::string& path);

  const std::vector<DomainDef>& domains() const { return domains_; }
  std::size_t domain_count() const { return domains_.size(); }
  int value_vocab_size() const { return value_vocab_size_; }

  // Index of a domain by name, or -1.
  int domain_index(const std::string& name) const;
  std::size_t max_inform_slots() const;
  std::size_t max_request_slots() const;

 private:
  std::vector<DomainDef> domains_;
  int value_vocab_size_;
};

enum class SlotKind { Constraint, Request };

struct SlotKey {
  std::string domain;
  std::string slot;
  auto operator<=>(const SlotKey&) const = default;
};

using SlotSet = std::set<SlotKey>;

struct GoalSlot {
  SlotKey key;
  SlotKind kind = SlotKind::Constraint;
  std::string value;  // empty for Request slots
  bool operator==(const GoalSlot&) const = default;
};

// Slot-value task description. Entries are kept sorted by (domain, slot).
// A regular goal is never empty; the remaining part of a goal (goal') may be.
class UserGoal {
 public:
  explicit UserGoal(std::vector<GoalSlot> entries);

  static UserGoal empty() { return UserGoal(); }

  const std::vector<GoalSlot>& entries() const { return entries_; }
  bool is_empty() const { return entries_.empty(); }

  int slot_count() const { return static_cast<int>(entries_.size()); }
  int domain_count() const;
  std::vector<std::string> domains() const;

  bool contains(const SlotKey& key) const;
  const GoalSlot& at(const SlotKey& key) const;
  SlotSet slot_set() const;

  // Goal restricted to the given keys; keys outside the goal are ignored.
  UserGoal restricted_to(const SlotSet& keys) const;

  bool operator==(const UserGoal&) const = default;

 private:
  UserGoal() = default;
  std::vector<GoalSlot> entries_;
};

struct GoalComplexity {
  int min_domains = 1;
  int max_domains = 3;
  int min_slots_per_domain = 2;
  int max_slots_per_domain = 5;
};

// Pure function of (schema, seed, complexity).
UserGoal sample_goal(const GoalSchema& schema, std::uint64_t seed,
                     const GoalComplexity& complexity = {});

inline int slot_count(const UserGoal& goal) { return goal.slot_count(); }
inline int domain_count(const UserGoal& goal) { return goal.domain_count(); }

const char* to_string(SlotKind kind);
SlotKind slot_kind_from_string(const std::string& s);

}  // namespace deus
