#include "deus/goal_schema.hpp"

#include <algorithm>
#include <fstream>

#include "deus/errors.hpp"
#include "deus/rng.hpp"

namespace deus {

GoalSchema::GoalSchema(std::vector<DomainDef> domains, int value_vocab_size)
    : domains_(std::move(domains)), value_vocab_size_(value_vocab_size) {
  if (domains_.empty()) throw InvalidArgument("schema needs at least one domain");
  if (value_vocab_size_ < 1) throw InvalidArgument("value vocabulary must be non-empty");
  std::set<std::string> names;
  for (const auto& d : domains_) {
    if (d.name.empty()) throw InvalidArgument("empty domain name");
    if (!names.insert(d.name).second) {
      throw InvalidArgument("duplicate domain name: " + d.name);
    }
    if (d.inform_slots.empty() && d.request_slots.empty()) {
      throw InvalidArgument("domain without slots: " + d.name);
    }
    std::set<std::string> slots;
    for (const auto* list : {&d.inform_slots, &d.request_slots}) {
      for (const auto& s : *list) {
        if (s.empty()) throw InvalidArgument("empty slot name in " + d.name);
        if (!slots.insert(s).second) {
          throw InvalidArgument("duplicate slot " + s + " in domain " + d.name);
        }
      }
    }
  }
}

GoalSchema GoalSchema::default_schema() {
  return GoalSchema({
      {"attraction", {"area", "day", "people", "type"}, {"address", "phone"}},
      {"hotel", {"area", "day", "price", "stars"}, {"address", "phone"}},
      {"restaurant", {"area", "day", "food", "price"}, {"address", "phone"}},
      {"taxi", {"arrive_by", "depart", "destination", "leave_at"}, {"car_type", "phone"}},
      {"train", {"arrive_by", "day", "depart", "destination"}, {"duration", "price"}},
  });
}

GoalSchema GoalSchema::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw FormatError("schema must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (key != "domains" && key != "value_vocab_size") {
      throw FormatError("unknown schema key: " + key);
    }
  }
  std::vector<DomainDef> domains;
  try {
    for (const auto& d : j.at("domains")) {
      DomainDef def;
      def.name = d.at("name").get<std::string>();
      def.inform_slots = d.value("inform_slots", std::vector<std::string>{});
      def.request_slots = d.value("request_slots", std::vector<std::string>{});
      domains.push_back(std::move(def));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad schema: ") + e.what());
  }
  return GoalSchema(std::move(domains), j.value("value_vocab_size", 8));
}

nlohmann::json GoalSchema::to_json() const {
  nlohmann::json doms = nlohmann::json::array();
  for (const auto& d : domains_) {
    doms.push_back({{"name", d.name},
                    {"inform_slots", d.inform_slots},
                    {"request_slots", d.request_slots}});
  }
  return {{"domains", doms}, {"value_vocab_size", value_vocab_size_}};
}

GoalSchema GoalSchema::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open schema file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("cannot parse schema file " + path + ": " + e.what());
  }
  return from_json(j);
}

int GoalSchema::domain_index(const std::string& name) const {
  for (std::size_t i = 0; i < domains_.size(); ++i) {
    if (domains_[i].name == name) return static_cast<int>(i);
  }
  return -1;
}

std::size_t GoalSchema::max_inform_slots() const {
  std::size_t n = 0;
  for (const auto& d : domains_) n = std::max(n, d.inform_slots.size());
  return n;
}

std::size_t GoalSchema::max_request_slots() const {
  std::size_t n = 0;
  for (const auto& d : domains_) n = std::max(n, d.request_slots.size());
  return n;
}

UserGoal::UserGoal(std::vector<GoalSlot> entries) : entries_(std::move(entries)) {
  if (entries_.empty()) throw InvalidArgument("user goal must have at least one slot");
  std::sort(entries_.begin(), entries_.end(),
            [](const GoalSlot& a, const GoalSlot& b) { return a.key < b.key; });
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const auto& e = entries_[i];
    if (e.key.domain.empty() || e.key.slot.empty()) {
      throw InvalidArgument("goal slot with empty domain or slot name");
    }
    if (i > 0 && entries_[i - 1].key == e.key) {
      throw InvalidArgument("duplicate goal slot " + e.key.domain + "." + e.key.slot);
    }
    if (e.kind == SlotKind::Request && !e.value.empty()) {
      throw InvalidArgument("request slot carries a value: " + e.key.slot);
    }
  }
}

int UserGoal::domain_count() const {
  int n = 0;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (i == 0 || entries_[i].key.domain != entries_[i - 1].key.domain) ++n;
  }
  return n;
}

std::vector<std::string> UserGoal::domains() const {
  std::vector<std::string> out;
  for (const auto& e : entries_) {
    if (out.empty() || out.back() != e.key.domain) out.push_back(e.key.domain);
  }
  return out;
}

bool UserGoal::contains(const SlotKey& key) const {
  return std::binary_search(entries_.begin(), entries_.end(), GoalSlot{key, {}, {}},
                            [](const GoalSlot& a, const GoalSlot& b) { return a.key < b.key; });
}

const GoalSlot& UserGoal::at(const SlotKey& key) const {
  auto it = std::lower_bound(entries_.begin(), entries_.end(), key,
                             [](const GoalSlot& a, const SlotKey& k) { return a.key < k; });
  if (it == entries_.end() || it->key != key) {
    throw UnknownSlot("slot not in goal: " + key.domain + "." + key.slot);
  }
  return *it;
}

SlotSet UserGoal::slot_set() const {
  SlotSet out;
  for (const auto& e : entries_) out.insert(e.key);
  return out;
}

UserGoal UserGoal::restricted_to(const SlotSet& keys) const {
  UserGoal out;
  for (const auto& e : entries_) {
    if (keys.count(e.key)) out.entries_.push_back(e);
  }
  return out;
}

UserGoal sample_goal(const GoalSchema& schema, std::uint64_t seed,
                     const GoalComplexity& c) {
  if (c.min_domains < 1 || c.min_slots_per_domain < 1 || c.min_domains > c.max_domains ||
      c.min_slots_per_domain > c.max_slots_per_domain) {
    throw UnsatisfiableComplexity("inconsistent complexity bounds");
  }
  std::vector<std::size_t> eligible;
  for (std::size_t i = 0; i < schema.domains().size(); ++i) {
    const auto& d = schema.domains()[i];
    if (static_cast<int>(d.inform_slots.size() + d.request_slots.size()) >=
        c.min_slots_per_domain) {
      eligible.push_back(i);
    }
  }
  if (static_cast<int>(eligible.size()) < c.min_domains) {
    throw UnsatisfiableComplexity("schema has only " + std::to_string(eligible.size()) +
                                  " domains with >= " +
                                  std::to_string(c.min_slots_per_domain) + " slots");
  }

  Rng rng(derive_seed(seed, 0x60a1));
  const int max_d = std::min<int>(c.max_domains, static_cast<int>(eligible.size()));
  const int n_domains = static_cast<int>(rng.uniform_int(c.min_domains, max_d));
  std::vector<GoalSlot> entries;
  for (std::size_t pick : rng.sample_indices(eligible.size(), n_domains)) {
    const auto& d = schema.domains()[eligible[pick]];
    const int total = static_cast<int>(d.inform_slots.size() + d.request_slots.size());
    const int k = static_cast<int>(
        rng.uniform_int(c.min_slots_per_domain, std::min(c.max_slots_per_domain, total)));
    for (std::size_t s : rng.sample_indices(total, k)) {
      GoalSlot g;
      g.key.domain = d.name;
      if (s < d.inform_slots.size()) {
        g.key.slot = d.inform_slots[s];
        g.kind = SlotKind::Constraint;
        g.value = "v" + std::to_string(rng.index(schema.value_vocab_size()));
      } else {
        g.key.slot = d.request_slots[s - d.inform_slots.size()];
        g.kind = SlotKind::Request;
      }
      entries.push_back(std::move(g));
    }
  }
  return UserGoal(std::move(entries));
}

const char* to_string(SlotKind kind) {
  return kind == SlotKind::Constraint ? "constraint" : "request";
}

SlotKind slot_kind_from_string(const std::string& s) {
  if (s == "constraint") return SlotKind::Constraint;
  if (s == "request") return SlotKind::Request;
  throw FormatError("unknown slot kind: " + s);
}

}  // namespace deus
