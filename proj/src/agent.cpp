#include "deus/agent.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "deus/errors.hpp"
#include "deus/file_util.hpp"

namespace deus {

std::string describe(const ActionTemplate& t) {
  std::string out = to_string(t.kind);
  for (int p : t.positions) out += ' ' + std::to_string(p);
  return out;
}

ActionTemplate template_from_description(const std::string& s) {
  std::istringstream in(s);
  std::string kind;
  if (!(in >> kind)) throw FormatError("empty action template");
  ActionTemplate t;
  try {
    t.kind = action_kind_from_string(kind);
  } catch (const InvalidArgument& e) {
    throw FormatError(e.what());
  }
  int p = 0;
  while (in >> p) t.positions.push_back(p);
  if (!in.eof()) throw FormatError("bad action template: " + s);
  return t;
}

namespace {

void combinations(int n, int k, std::vector<std::vector<int>>& out) {
  std::vector<int> c(k);
  for (int i = 0; i < k; ++i) c[i] = i;
  if (k > n) return;
  while (true) {
    out.push_back(c);
    int i = k - 1;
    while (i >= 0 && c[i] == n - k + i) --i;
    if (i < 0) return;
    ++c[i];
    for (int j = i + 1; j < k; ++j) c[j] = c[j - 1] + 1;
  }
}

}  // namespace

ActionTemplateSet::ActionTemplateSet(const GoalSchema& schema, int max_slots) {
  if (max_slots < 1) throw InvalidArgument("max_slots must be positive");
  const std::pair<ActionKind, int> kinds[] = {
      {ActionKind::Request, static_cast<int>(schema.max_inform_slots())},
      {ActionKind::Inform, static_cast<int>(schema.max_request_slots())}};
  for (const auto& [kind, n] : kinds) {
    for (int k = 1; k <= std::min(max_slots, n); ++k) {
      std::vector<std::vector<int>> combos;
      combinations(n, k, combos);
      for (auto& c : combos) templates_.push_back({kind, std::move(c)});
    }
  }
  templates_.push_back({ActionKind::Greet, {}});
  templates_.push_back({ActionKind::Close, {}});
}

ActionTemplateSet::ActionTemplateSet(std::vector<ActionTemplate> templates)
    : templates_(std::move(templates)) {
  if (templates_.empty()) throw InvalidArgument("empty template set");
  for (const auto& t : templates_) {
    const bool slotted = t.kind == ActionKind::Request || t.kind == ActionKind::Inform;
    if (slotted == t.positions.empty()) throw InvalidArgument("malformed action template");
  }
}

const DomainDef* ActionTemplateSet::active_domain(const GoalSchema& schema,
                                                  const DialogueState& s) {
  if (s.pending.empty()) return nullptr;
  const int d = schema.domain_index(s.pending.begin()->domain);
  if (d < 0) throw UnknownSlot("pending slot outside schema: " + s.pending.begin()->domain);
  return &schema.domains()[d];
}

bool ActionTemplateSet::valid(std::size_t i, const GoalSchema& schema,
                              const DialogueState& s) const {
  const ActionTemplate& t = templates_.at(i);
  if (t.kind == ActionKind::Greet || t.kind == ActionKind::Close) return true;
  const DomainDef* d = active_domain(schema, s);
  if (!d) return false;
  const auto& slots = t.kind == ActionKind::Request ? d->inform_slots : d->request_slots;
  for (int p : t.positions) {
    if (p < 0 || p >= static_cast<int>(slots.size())) return false;
  }
  return true;
}

std::vector<std::size_t> ActionTemplateSet::valid_indices(const GoalSchema& schema,
                                                          const DialogueState& s) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < templates_.size(); ++i) {
    if (valid(i, schema, s)) out.push_back(i);
  }
  return out;
}

AgentAction ActionTemplateSet::instantiate(std::size_t i, const GoalSchema& schema,
                                           const DialogueState& s) const {
  if (!valid(i, schema, s)) throw InvalidArgument("template not valid in this state");
  const ActionTemplate& t = templates_[i];
  if (t.kind == ActionKind::Greet) return AgentAction::greet();
  if (t.kind == ActionKind::Close) return AgentAction::close();
  const DomainDef* d = active_domain(schema, s);
  const auto& names = t.kind == ActionKind::Request ? d->inform_slots : d->request_slots;
  std::vector<SlotKey> slots;
  for (int p : t.positions) slots.push_back({d->name, names[p]});
  return t.kind == ActionKind::Request ? AgentAction::request(std::move(slots))
                                       : AgentAction::inform(std::move(slots));
}

int ActionTemplateSet::index_of(const AgentAction& a, const GoalSchema& schema,
                                const DialogueState& s) const {
  for (std::size_t i = 0; i < templates_.size(); ++i) {
    if (templates_[i].kind != a.kind || !valid(i, schema, s)) continue;
    if (instantiate(i, schema, s).slots == a.slots) return static_cast<int>(i);
  }
  return -1;
}

// ---------------------------------------------------------------------------

StateFeaturizer::StateFeaturizer(GoalSchema schema, int max_turns)
    : schema_(std::move(schema)),
      max_turns_(max_turns),
      n_inform_(schema_.max_inform_slots()),
      n_request_(schema_.max_request_slots()) {
  if (max_turns_ < 1) throw InvalidArgument("max_turns must be positive");
  for (std::size_t i = 0; i < n_inform_; ++i) {
    names_.push_back("inf_pend_" + std::to_string(i));
    names_.push_back("inf_sat_" + std::to_string(i));
  }
  for (std::size_t j = 0; j < n_request_; ++j) {
    names_.push_back("req_pend_" + std::to_string(j));
    names_.push_back("req_sat_" + std::to_string(j));
  }
  for (const char* n : {"pending_total", "satisfied_total", "pending_domains",
                        "turn",
                        "user_none", "user_open", "user_answer", "user_accept", "user_silent",
                        "user_slots"}) {
    names_.push_back(n);
  }
}

std::vector<double> StateFeaturizer::features(const DialogueState& s) const {
  std::vector<double> x(names_.size(), 0.0);
  const DomainDef* d = ActionTemplateSet::active_domain(schema_, s);
  std::size_t k = 0;
  auto flags = [&](const std::vector<std::string>* slots, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i, k += 2) {
      if (!slots || i >= slots->size()) continue;
      const SlotKey key{d->name, (*slots)[i]};
      x[k] = s.pending.count(key) ? 1.0 : 0.0;
      x[k + 1] = s.satisfied.count(key) ? 1.0 : 0.0;
    }
  };
  flags(d ? &d->inform_slots : nullptr, n_inform_);
  flags(d ? &d->request_slots : nullptr, n_request_);
  std::set<std::string> domains;
  for (const auto& p : s.pending) domains.insert(p.domain);
  x[k++] = s.pending.size() / 10.0;
  x[k++] = s.satisfied.size() / 10.0;
  x[k++] = domains.size() / 3.0;
  x[k++] = static_cast<double>(s.turn_index) / max_turns_;
  x[k + static_cast<std::size_t>(s.last_user_act.kind)] = 1.0;
  k += 5;
  x[k] = s.last_user_act.n_slots / 3.0;
  return x;
}

// ---------------------------------------------------------------------------

void AgentHyperparams::validate() const {
  if (!(discount > 0.0 && discount <= 1.0)) throw InvalidArgument("discount must be in (0, 1]");
  if (replay_capacity < 1) throw InvalidArgument("replay capacity must be positive");
  if (target_sync_steps < 1) throw InvalidArgument("target sync interval must be positive");
  for (double e : {epsilon_start, epsilon_end}) {
    if (!(e >= 0.0 && e <= 1.0)) throw InvalidArgument("epsilon must be in [0, 1]");
  }
  if (!(epsilon_decay_fraction > 0.0 && epsilon_decay_fraction <= 1.0)) {
    throw InvalidArgument("epsilon decay fraction must be in (0, 1]");
  }
  if (batch_size < 1 || train_every < 1 || warmup_steps < 0 || curve_window < 1) {
    throw InvalidArgument("bad agent training schedule");
  }
  if (!(huber_delta > 0.0)) throw InvalidArgument("huber delta must be positive");
  if (max_slots < 1) throw InvalidArgument("max_slots must be positive");
  for (int h : hidden) {
    if (h < 1) throw InvalidArgument("hidden layer sizes must be positive");
  }
}

QPolicy::QPolicy(StateFeaturizer featurizer, ActionTemplateSet templates, FeedForwardNet q_net,
                 double discount, double epsilon)
    : featurizer_(std::move(featurizer)),
      templates_(std::move(templates)),
      q_net_(std::move(q_net)),
      discount_(discount),
      epsilon_(epsilon) {
  if (q_net_.input_dim() != static_cast<int>(featurizer_.dim()) ||
      q_net_.output_dim() != static_cast<int>(templates_.size())) {
    throw DimensionMismatch("Q network shape does not match features and templates");
  }
  set_epsilon(epsilon);
}

QPolicy QPolicy::create(const GoalSchema& schema, int max_turns, const AgentHyperparams& hp,
                        std::uint64_t seed) {
  hp.validate();
  StateFeaturizer fz(schema, max_turns);
  ActionTemplateSet templates(schema, hp.max_slots);
  std::vector<int> dims{static_cast<int>(fz.dim())};
  dims.insert(dims.end(), hp.hidden.begin(), hp.hidden.end());
  dims.push_back(static_cast<int>(templates.size()));
  FeedForwardNet net(dims, Activation::Tanh, seed);
  return QPolicy(std::move(fz), std::move(templates), std::move(net), hp.discount,
                 hp.epsilon_end);
}

void QPolicy::set_epsilon(double e) {
  if (!(e >= 0.0 && e <= 1.0)) throw InvalidArgument("epsilon must be in [0, 1]");
  epsilon_ = e;
}

std::vector<double> QPolicy::q_values(const DialogueState& s) const {
  return q_net_.forward(featurizer_.features(s));
}

namespace {

std::size_t argmax_valid(std::span<const double> q, const std::vector<std::size_t>& valid) {
  std::size_t best = valid.front();
  for (std::size_t i : valid) {
    if (q[i] > q[best]) best = i;
  }
  return best;
}

}  // namespace

std::size_t QPolicy::greedy_index(const DialogueState& s) const {
  const auto valid = templates_.valid_indices(featurizer_.schema(), s);
  return argmax_valid(q_values(s), valid);
}

std::size_t QPolicy::select_index(const DialogueState& s, bool explore, Rng& rng) const {
  if (explore && rng.uniform01() < epsilon_) {
    const auto valid = templates_.valid_indices(featurizer_.schema(), s);
    return valid[rng.index(valid.size())];
  }
  return greedy_index(s);
}

void QPolicy::save(std::ostream& out) const {
  out << "deus-policy 1\n";
  out << "discount " << format_double(discount_) << '\n';
  out << "epsilon " << format_double(epsilon_) << '\n';
  out << "max_turns " << featurizer_.max_turns() << '\n';
  out << "schema " << featurizer_.schema().to_json().dump() << '\n';
  out << "features";
  for (const auto& n : featurizer_.layout()) out << ' ' << n;
  out << "\ntemplates " << templates_.size() << '\n';
  for (const auto& t : templates_.templates()) out << describe(t) << '\n';
  out << "q_net\n";
  q_net_.save(out);
}

namespace {

std::string read_field(std::istream& in, const std::string& key) {
  std::string line;
  if (!std::getline(in, line)) throw FormatError("policy file truncated before " + key);
  if (line.rfind(key, 0) != 0) throw FormatError("policy file: expected " + key);
  return line.size() > key.size() ? line.substr(key.size() + 1) : std::string{};
}

}  // namespace

QPolicy QPolicy::load(std::istream& in) {
  if (read_field(in, "deus-policy") != "1") throw FormatError("unsupported policy version");
  const double discount = parse_double(read_field(in, "discount"));
  const double epsilon = parse_double(read_field(in, "epsilon"));
  int max_turns = 0;
  try {
    max_turns = std::stoi(read_field(in, "max_turns"));
  } catch (const std::logic_error&) {
    throw FormatError("policy file: bad max_turns");
  }
  nlohmann::json schema_json;
  try {
    schema_json = nlohmann::json::parse(read_field(in, "schema"));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("policy schema: ") + e.what());
  }
  try {
    StateFeaturizer fz(GoalSchema::from_json(schema_json), max_turns);
    std::istringstream names(read_field(in, "features"));
    std::vector<std::string> layout;
    for (std::string w; names >> w;) layout.push_back(w);
    if (layout != fz.layout()) throw FormatError("policy feature layout does not match this build");
    const std::size_t n = std::stoul(read_field(in, "templates"));
    std::vector<ActionTemplate> templates;
    for (std::size_t i = 0; i < n; ++i) {
      std::string line;
      if (!std::getline(in, line)) throw FormatError("policy file: truncated templates");
      templates.push_back(template_from_description(line));
    }
    read_field(in, "q_net");
    FeedForwardNet net = FeedForwardNet::load(in);
    return QPolicy(std::move(fz), ActionTemplateSet(std::move(templates)), std::move(net),
                   discount, epsilon);
  } catch (const InvalidArgument& e) {
    throw FormatError(std::string("invalid policy: ") + e.what());
  } catch (const DimensionMismatch& e) {
    throw FormatError(std::string("invalid policy: ") + e.what());
  } catch (const std::logic_error& e) {
    throw FormatError(std::string("invalid policy: ") + e.what());
  }
}

void QPolicy::save(const std::string& path) const {
  write_file_atomic(path, [&](std::ostream& out) { save(out); });
}

QPolicy QPolicy::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open policy: " + path);
  return load(in);
}

AgentAction act(const QPolicy& policy, const DialogueState& state, bool explore, Rng& rng) {
  const std::size_t i = policy.select_index(state, explore, rng);
  return policy.templates().instantiate(i, policy.featurizer().schema(), state);
}

AgentPolicy as_agent_policy(const QPolicy& policy, bool explore) {
  return [&policy, explore](const DialogueState& s, Rng& rng) {
    return act(policy, s, explore, rng);
  };
}

// ---------------------------------------------------------------------------

double User1Reward::reward(const DialogueState& s, const AgentAction& a, const UserGoal&,
                           bool terminal, DialogueStatus status) const {
  return f1(s, a, terminal, status, cfg_);
}

double BudgetReward::reward(const DialogueState& s, const AgentAction& a,
                            const UserGoal& goal, bool terminal, DialogueStatus status) const {
  double r = model_.turn_cost(s, a);
  if (terminal && status == DialogueStatus::Success) r += model_.budget(goal);
  return r;
}

void LearningCurve::write_csv(std::ostream& out) const {
  out << "episodes,success_rate,mean_return\n";
  for (const auto& p : points) {
    out << p.episodes << ',' << format_double(p.success_rate) << ','
        << format_double(p.mean_return) << '\n';
  }
}

UserGoal episode_goal(const GoalSchema& schema, const GoalComplexity& complexity,
                      std::uint64_t seed, int i) {
  return sample_goal(schema, derive_seed(seed, static_cast<std::uint64_t>(i)), complexity);
}

namespace {

class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {}
  void push(Transition t) {
    if (items_.size() < capacity_) {
      items_.push_back(std::move(t));
    } else {
      items_[head_] = std::move(t);
    }
    head_ = (head_ + 1) % capacity_;
  }
  std::size_t size() const { return items_.size(); }
  const Transition& operator[](std::size_t i) const { return items_[i]; }

 private:
  std::size_t capacity_;
  std::size_t head_ = 0;
  std::vector<Transition> items_;
};

}  // namespace

AgentTrainResult train_agent(const UserProfile& profile, const RewardModel& reward,
                             const GoalSchema& schema, const GoalComplexity& complexity,
                             int episodes, std::uint64_t seed, const AgentHyperparams& hp,
                             const EpisodeObserver& observer) {
  hp.validate();
  if (episodes < 1) throw InvalidArgument("episodes must be positive");
  QPolicy policy = QPolicy::create(schema, profile.max_turns, hp, derive_seed(seed, 0xa9e1));
  FeedForwardNet target = policy.q_net();
  Optimizer opt(hp.optimizer, policy.q_net().param_count());
  ReplayBuffer replay(hp.replay_capacity);
  Rng rng(derive_seed(seed, 0xa9e2));
  const std::uint64_t goal_seed = derive_seed(seed, 0xa9e3);
  const ActionTemplateSet& templates = policy.templates();
  const StateFeaturizer& fz = policy.featurizer();

  const double decay_episodes = std::max(1.0, hp.epsilon_decay_fraction * episodes);
  std::vector<double> grads(policy.q_net().param_count());
  std::vector<double> upstream(templates.size());
  FeedForwardNet::Tape tape;
  long long steps = 0;

  LearningCurve curve;
  int window_successes = 0;
  double window_return = 0.0;
  int window_n = 0;

  auto gradient_step = [&]() {
    std::fill(grads.begin(), grads.end(), 0.0);
    const double scale = 1.0 / hp.batch_size;
    for (int b = 0; b < hp.batch_size; ++b) {
      const Transition& t = replay[rng.index(replay.size())];
      double y = t.reward;
      if (!t.done && !t.next_valid.empty()) {
        const auto q_next = target.forward(t.next_state);
        std::size_t a_next = 0;
        if (hp.double_q) {
          a_next = argmax_valid(policy.q_net().forward(t.next_state), t.next_valid);
        } else {
          a_next = argmax_valid(q_next, t.next_valid);
        }
        y += policy.discount() * q_next[a_next];
      }
      policy.q_net().forward(t.state, tape);
      const double td = tape.output()[t.action] - y;
      std::fill(upstream.begin(), upstream.end(), 0.0);
      upstream[t.action] = scale * std::clamp(td, -hp.huber_delta, hp.huber_delta);
      policy.q_net().backward(tape, upstream, grads);
    }
    opt.apply(policy.q_net(), grads);
  };

  for (int ep = 0; ep < episodes; ++ep) {
    const double frac = std::min(1.0, ep / decay_episodes);
    policy.set_epsilon(hp.epsilon_start + (hp.epsilon_end - hp.epsilon_start) * frac);
    const UserGoal goal = episode_goal(schema, complexity, goal_seed, ep);
    UserSession session(profile, goal);
    std::vector<Transition> contributed;
    std::vector<double> state = fz.features(session.state());
    double ret = 0.0;
    while (!session.done()) {
      const DialogueState before = session.state();
      const std::size_t a = policy.select_index(before, true, rng);
      const AgentAction action = templates.instantiate(a, schema, before);
      session.step(action);
      const bool done = session.done();
      const double r = reward.reward(before, action, goal, done,
                                     done ? session.status() : DialogueStatus::Failure);
      ret += r;
      Transition t;
      t.state = state;
      t.action = a;
      t.reward = r;
      t.next_state = fz.features(session.state());
      if (!done) t.next_valid = templates.valid_indices(schema, session.state());
      t.done = done;
      state = t.next_state;
      if (observer) contributed.push_back(t);
      replay.push(std::move(t));
      ++steps;
      if (replay.size() >= static_cast<std::size_t>(std::max(hp.batch_size, hp.warmup_steps)) &&
          steps % hp.train_every == 0) {
        gradient_step();
      }
      if (steps % hp.target_sync_steps == 0) target = policy.q_net();
    }
    const EpisodeOutcome outcome = session.outcome();
    if (observer) observer(outcome, contributed);
    window_successes += outcome.trajectory.status == DialogueStatus::Success ? 1 : 0;
    window_return += ret;
    ++window_n;
    if (window_n == hp.curve_window || ep + 1 == episodes) {
      curve.points.push_back({ep + 1, static_cast<double>(window_successes) / window_n,
                              window_return / window_n});
      window_successes = 0;
      window_return = 0.0;
      window_n = 0;
    }
  }
  policy.set_epsilon(hp.epsilon_end);
  return {std::move(policy), std::move(curve)};
}

AgentEvaluation evaluate_agent(const AgentPolicy& policy, const UserProfile& profile,
                               const GoalSchema& schema, const GoalComplexity& complexity,
                               int n_goals, std::uint64_t seed) {
  if (n_goals < 1) throw InvalidArgument("n_goals must be positive");
  AgentEvaluation ev;
  ev.episodes = n_goals;
  double turns = 0.0;
  double remaining = 0.0;
  for (int i = 0; i < n_goals; ++i) {
    const UserGoal goal = episode_goal(schema, complexity, seed, i);
    const EpisodeOutcome out =
        run_episode(profile, policy, goal, derive_seed(seed, 0x5eed0000ULL + i));
    if (out.trajectory.status == DialogueStatus::Success) ++ev.successes;
    turns += out.trajectory.turn_count();
    double r = profile.budget(goal);
    for (double c : *out.trajectory.true_costs) r += c;
    remaining += r;
  }
  ev.success_rate = static_cast<double>(ev.successes) / n_goals;
  ev.mean_turns = turns / n_goals;
  ev.mean_remaining_budget = remaining / n_goals;
  return ev;
}

AgentEvaluation evaluate_agent(const QPolicy& policy, const UserProfile& profile,
                               const GoalComplexity& complexity, int n_goals,
                               std::uint64_t seed) {
  return evaluate_agent(as_agent_policy(policy, false), profile, policy.featurizer().schema(),
                        complexity, n_goals, seed);
}

std::vector<Trajectory> collect_dialogues(const QPolicy& policy, double epsilon,
                                          const UserProfile& profile,
                                          const GoalComplexity& complexity, int n,
                                          std::uint64_t seed) {
  if (n < 1) throw InvalidArgument("number of dialogues must be positive");
  QPolicy explorer = policy;
  explorer.set_epsilon(epsilon);
  const AgentPolicy agent = as_agent_policy(explorer, epsilon > 0.0);
  std::vector<Trajectory> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) {
    const UserGoal goal = episode_goal(explorer.featurizer().schema(), complexity, seed, i);
    out.push_back(
        run_episode(profile, agent, goal, derive_seed(seed, 0x5eed0000ULL + i)).trajectory);
  }
  return out;
}

}  // namespace deus
