#include "deus/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>

#include "deus/errors.hpp"
#include "deus/file_util.hpp"
#include "deus/rng.hpp"

namespace deus {

const char* to_string(LossMode m) {
  switch (m) {
    case LossMode::Full: return "full";
    case LossMode::Light: return "light";
    case LossMode::FullForward: return "full_forward";
  }
  return "?";
}

LossMode loss_mode_from_string(const std::string& s) {
  if (s == "full") return LossMode::Full;
  if (s == "light") return LossMode::Light;
  if (s == "full_forward") return LossMode::FullForward;
  throw InvalidArgument("unknown loss mode: " + s);
}

double SatisfactionModel::potential_cost(const UserGoal&) const { return 0.0; }

void EstimatorConfig::validate() const {
  if (!(v_b < 0.0)) throw InvalidArgument("v_b must be negative");
  if (!(budget_scale > 0.0)) throw InvalidArgument("budget_scale must be positive");
  for (int h : hidden) {
    if (h < 1) throw InvalidArgument("hidden layer sizes must be positive");
  }
}

namespace {

std::vector<int> dims_for(std::size_t in, const std::vector<int>& hidden) {
  std::vector<int> dims{static_cast<int>(in)};
  dims.insert(dims.end(), hidden.begin(), hidden.end());
  dims.push_back(1);
  return dims;
}

}  // namespace

EstimatorBundle::EstimatorBundle(Featurizer featurizer, EstimatorConfig cfg, FeedForwardNet f,
                                 FeedForwardNet b, std::optional<FeedForwardNet> c)
    : featurizer_(std::move(featurizer)),
      cfg_(std::move(cfg)),
      f_net_(std::move(f)),
      b_net_(std::move(b)),
      c_net_(std::move(c)) {
  cfg_.validate();
  if (c_net_.has_value() != (cfg_.loss_mode == LossMode::FullForward)) {
    throw ModeMismatch("c net must be present exactly in full_forward mode");
  }
  if (f_net_.input_dim() != static_cast<int>(featurizer_.state_action_dim()) ||
      b_net_.input_dim() != static_cast<int>(featurizer_.goal_dim()) ||
      (c_net_ && c_net_->input_dim() != static_cast<int>(featurizer_.goal_dim()))) {
    throw DimensionMismatch("network inputs do not match the feature layout");
  }
}

EstimatorBundle::EstimatorBundle(Featurizer featurizer, EstimatorConfig cfg,
                                 std::uint64_t init_seed)
    : EstimatorBundle(
          featurizer, cfg,
          FeedForwardNet(dims_for(featurizer.state_action_dim(), cfg.hidden), cfg.activation,
                         derive_seed(init_seed, 1)),
          FeedForwardNet(dims_for(featurizer.goal_dim(), cfg.hidden), cfg.activation,
                         derive_seed(init_seed, 2)),
          cfg.loss_mode == LossMode::FullForward
              ? std::optional<FeedForwardNet>(FeedForwardNet(
                    dims_for(featurizer.goal_dim(), cfg.hidden), cfg.activation,
                    derive_seed(init_seed, 3)))
              : std::nullopt) {
  // Every estimate starts at 0 and is pushed down to v_b by loss_3; training
  // stops at the first feasible point, which keeps the cheapest turns near v_b.
  f_net_.zero_output_layer();
  b_net_.zero_output_layer();
  if (c_net_) c_net_->zero_output_layer();
}

EstimatorBundle EstimatorBundle::zeros(Featurizer featurizer, EstimatorConfig cfg) {
  auto f = FeedForwardNet::zeros(dims_for(featurizer.state_action_dim(), cfg.hidden),
                                 cfg.activation);
  auto b = FeedForwardNet::zeros(dims_for(featurizer.goal_dim(), cfg.hidden), cfg.activation);
  std::optional<FeedForwardNet> c;
  if (cfg.loss_mode == LossMode::FullForward) c = b;
  return EstimatorBundle(std::move(featurizer), std::move(cfg), std::move(f), std::move(b),
                         std::move(c));
}

FeedForwardNet& EstimatorBundle::c_net() {
  if (!c_net_) throw ModeMismatch("bundle has no potential-cost net");
  return *c_net_;
}

const FeedForwardNet& EstimatorBundle::c_net() const {
  if (!c_net_) throw ModeMismatch("bundle has no potential-cost net");
  return *c_net_;
}

double EstimatorBundle::estimate_turn_cost(const DialogueState& s, const AgentAction& a) const {
  return cost_scale() * f_net_.forward_scalar(featurizer_.state_action(s, a));
}

double EstimatorBundle::estimate_budget(const UserGoal& goal) const {
  return budget_out_scale() * b_net_.forward_scalar(featurizer_.goal(goal));
}

double EstimatorBundle::estimate_potential_cost(const UserGoal& remaining) const {
  const auto& net = c_net();
  if (remaining.is_empty()) return 0.0;
  return budget_out_scale() * net.forward_scalar(featurizer_.goal(remaining));
}

void EstimatorBundle::save(std::ostream& out) const {
  out << "deus-bundle 1\n";
  out << "v_b " << format_double(cfg_.v_b) << '\n';
  out << "loss_mode " << to_string(cfg_.loss_mode) << '\n';
  out << "budget_scale " << format_double(cfg_.budget_scale) << '\n';
  out << "max_turns " << featurizer_.max_turns() << '\n';
  out << "schema " << featurizer_.schema().to_json().dump() << '\n';
  out << "state_action_layout";
  for (const auto& n : featurizer_.state_action_layout()) out << ' ' << n;
  out << "\ngoal_layout";
  for (const auto& n : featurizer_.goal_layout()) out << ' ' << n;
  out << "\nf_net\n";
  f_net_.save(out);
  out << "b_net\n";
  b_net_.save(out);
  if (c_net_) {
    out << "c_net\n";
    c_net_->save(out);
  }
}

namespace {

std::string expect_key(std::istream& in, const std::string& key) {
  std::string line;
  if (!std::getline(in, line)) throw FormatError("bundle file truncated before " + key);
  if (line.rfind(key, 0) != 0) throw FormatError("bundle file: expected " + key);
  return line.size() > key.size() ? line.substr(key.size() + 1) : std::string{};
}

std::vector<std::string> split_words(const std::string& s) {
  std::istringstream ss(s);
  std::vector<std::string> out;
  std::string w;
  while (ss >> w) out.push_back(w);
  return out;
}

}  // namespace

EstimatorBundle EstimatorBundle::load(std::istream& in) {
  if (expect_key(in, "deus-bundle") != "1") throw FormatError("unsupported bundle version");
  EstimatorConfig cfg;
  cfg.v_b = parse_double(expect_key(in, "v_b"));
  try {
    cfg.loss_mode = loss_mode_from_string(expect_key(in, "loss_mode"));
  } catch (const InvalidArgument& e) {
    throw FormatError(e.what());
  }
  cfg.budget_scale = parse_double(expect_key(in, "budget_scale"));
  const int max_turns = std::stoi(expect_key(in, "max_turns"));
  nlohmann::json schema_json;
  try {
    schema_json = nlohmann::json::parse(expect_key(in, "schema"));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bundle schema: ") + e.what());
  }
  Featurizer featurizer(GoalSchema::from_json(schema_json), max_turns);
  if (split_words(expect_key(in, "state_action_layout")) != featurizer.state_action_layout() ||
      split_words(expect_key(in, "goal_layout")) != featurizer.goal_layout()) {
    throw FormatError("bundle feature layout does not match this build");
  }
  expect_key(in, "f_net");
  FeedForwardNet f = FeedForwardNet::load(in);
  std::string rest;
  std::getline(in, rest);
  expect_key(in, "b_net");
  FeedForwardNet b = FeedForwardNet::load(in);
  std::getline(in, rest);
  std::optional<FeedForwardNet> c;
  if (cfg.loss_mode == LossMode::FullForward) {
    expect_key(in, "c_net");
    c = FeedForwardNet::load(in);
  }
  std::vector<int> hidden(f.layer_dims().begin() + 1, f.layer_dims().end() - 1);
  cfg.hidden = hidden;
  cfg.activation = f.activation();
  try {
    return EstimatorBundle(std::move(featurizer), cfg, std::move(f), std::move(b), std::move(c));
  } catch (const InvalidArgument& e) {
    throw FormatError(std::string("invalid bundle: ") + e.what());
  } catch (const DimensionMismatch& e) {
    throw FormatError(std::string("invalid bundle: ") + e.what());
  }
}

void EstimatorBundle::save(const std::string& path) const {
  write_file_atomic(path, [&](std::ostream& out) { save(out); });
}

EstimatorBundle EstimatorBundle::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open bundle: " + path);
  return load(in);
}

// ---------------------------------------------------------------------------

namespace {

bool uses_prefix(LossMode mode) { return mode != LossMode::Light; }

struct HingeArgs {
  double a1 = 0.0;  // -status * (S + b - c)
  double a2 = 0.0;  // -(P + b - c)
};

HingeArgs hinge_args(LossMode mode, std::span<const double> costs, double budget,
                     double potential, int status) {
  if (costs.empty()) throw InvalidArgument("trajectory without turns");
  if (status != 1 && status != -1) throw InvalidArgument("status must be +1 or -1");
  if (uses_prefix(mode) && costs.size() < 2) {
    throw PrefixTooShort("loss_2 needs at least 2 turns");
  }
  const double c = mode == LossMode::FullForward ? potential : 0.0;
  double prefix = 0.0;
  for (std::size_t t = 0; t + 1 < costs.size(); ++t) prefix += costs[t];
  const double sum = prefix + costs.back();
  return {-status * (sum + budget - c), -(prefix + budget - c)};
}

}  // namespace

LossTerms hinge_losses(LossMode mode, std::span<const double> costs, double budget,
                       double potential, int status, double v_b) {
  const HingeArgs a = hinge_args(mode, costs, budget, potential, status);
  LossTerms out;
  out.loss_1 = std::max(0.0, a.a1);
  if (uses_prefix(mode)) out.loss_2 = std::max(0.0, a.a2);
  for (double f : costs) out.loss_3 += std::max(0.0, f - v_b);
  return out;
}

LossGradient hinge_gradient(LossMode mode, std::span<const double> costs, double budget,
                            double potential, int status, double v_b) {
  const HingeArgs a = hinge_args(mode, costs, budget, potential, status);
  const bool fwd = mode == LossMode::FullForward;
  LossGradient g;
  g.d_costs.assign(costs.size(), 0.0);
  if (a.a1 > 0.0) {
    for (double& d : g.d_costs) d -= status;
    g.d_budget -= status;
    if (fwd) g.d_potential += status;
  }
  if (uses_prefix(mode) && a.a2 > 0.0) {
    for (std::size_t t = 0; t + 1 < costs.size(); ++t) g.d_costs[t] -= 1.0;
    g.d_budget -= 1.0;
    if (fwd) g.d_potential += 1.0;
  }
  for (std::size_t t = 0; t < costs.size(); ++t) {
    if (costs[t] - v_b > 0.0) g.d_costs[t] += 1.0;
  }
  return g;
}

// ---------------------------------------------------------------------------

namespace {

std::vector<double> turn_costs(const SatisfactionModel& model, const Trajectory& traj) {
  std::vector<double> out;
  out.reserve(traj.turns.size());
  for (const auto& t : traj.turns) out.push_back(model.turn_cost(t.state, t.action));
  return out;
}

LossTerms bundle_terms(const EstimatorBundle& bundle, const Trajectory& traj, LossMode mode) {
  return hinge_losses(mode, turn_costs(bundle, traj), bundle.estimate_budget(traj.goal),
                      mode == LossMode::FullForward ? bundle.estimate_potential_cost(
                                                          traj.terminal_unsatisfied)
                                                    : 0.0,
                      status_sign(traj.status), bundle.v_b());
}

}  // namespace

double loss_1(const EstimatorBundle& bundle, const Trajectory& traj) {
  return bundle_terms(bundle, traj, LossMode::Light).loss_1;
}

double loss_2(const EstimatorBundle& bundle, const Trajectory& traj) {
  return bundle_terms(bundle, traj, LossMode::Full).loss_2;
}

double loss_3(const EstimatorBundle& bundle, const Trajectory& traj) {
  return bundle_terms(bundle, traj, LossMode::Light).loss_3;
}

double loss_forward(const EstimatorBundle& bundle, const Trajectory& traj) {
  if (!bundle.has_c_net()) throw ModeMismatch("loss_forward needs a full_forward bundle");
  return bundle_terms(bundle, traj, LossMode::FullForward).total();
}

double total_loss(const EstimatorBundle& bundle, const Trajectory& traj) {
  return bundle_terms(bundle, traj, bundle.loss_mode()).total();
}

namespace {

// Precomputed inputs of one trajectory.
struct Prepared {
  std::vector<std::vector<double>> sa;
  std::vector<double> goal;
  std::vector<double> remaining;  // empty when goal' is empty
  int status = 1;
};

Prepared prepare(const Featurizer& fz, const Trajectory& traj) {
  Prepared p;
  p.sa.reserve(traj.turns.size());
  for (const auto& t : traj.turns) p.sa.push_back(fz.state_action(t.state, t.action));
  p.goal = fz.goal(traj.goal);
  if (!traj.terminal_unsatisfied.is_empty()) p.remaining = fz.goal(traj.terminal_unsatisfied);
  p.status = status_sign(traj.status);
  return p;
}

struct Workspace {
  std::vector<FeedForwardNet::Tape> turn_tapes;
  FeedForwardNet::Tape goal_tape;
  FeedForwardNet::Tape rem_tape;
  std::vector<double> costs;
};

// Forward + backward of one trajectory; gradients are scaled by `weight` and
// added to the buffers. Returns the loss terms.
LossTerms accumulate(const EstimatorBundle& bundle, const Prepared& p, double weight,
                     Workspace& ws, std::span<double> gf, std::span<double> gb,
                     std::span<double> gc) {
  const double fs = bundle.cost_scale();
  const double bs = bundle.budget_out_scale();
  const std::size_t m = p.sa.size();
  if (ws.turn_tapes.size() < m) ws.turn_tapes.resize(m);
  ws.costs.resize(m);
  for (std::size_t t = 0; t < m; ++t) {
    bundle.f_net().forward(p.sa[t], ws.turn_tapes[t]);
    ws.costs[t] = fs * ws.turn_tapes[t].output()[0];
  }
  bundle.b_net().forward(p.goal, ws.goal_tape);
  const double b = bs * ws.goal_tape.output()[0];
  double c = 0.0;
  const bool fwd = bundle.loss_mode() == LossMode::FullForward;
  if (fwd && !p.remaining.empty()) {
    bundle.c_net().forward(p.remaining, ws.rem_tape);
    c = bs * ws.rem_tape.output()[0];
  }
  const LossTerms terms = hinge_losses(bundle.loss_mode(), ws.costs, b, c, p.status, bundle.v_b());
  const LossGradient g =
      hinge_gradient(bundle.loss_mode(), ws.costs, b, c, p.status, bundle.v_b());
  for (std::size_t t = 0; t < m; ++t) {
    if (g.d_costs[t] == 0.0) continue;
    const double up = weight * fs * g.d_costs[t];
    bundle.f_net().backward(ws.turn_tapes[t], std::span<const double>(&up, 1), gf);
  }
  if (g.d_budget != 0.0) {
    const double up = weight * bs * g.d_budget;
    bundle.b_net().backward(ws.goal_tape, std::span<const double>(&up, 1), gb);
  }
  if (fwd && !p.remaining.empty() && g.d_potential != 0.0) {
    const double up = weight * bs * g.d_potential;
    bundle.c_net().backward(ws.rem_tape, std::span<const double>(&up, 1), gc);
  }
  return terms;
}

}  // namespace

BundleGradients total_loss_gradients(const EstimatorBundle& bundle, const Trajectory& traj) {
  BundleGradients g;
  g.f.assign(bundle.f_net().param_count(), 0.0);
  g.b.assign(bundle.b_net().param_count(), 0.0);
  if (bundle.has_c_net()) g.c.assign(bundle.c_net().param_count(), 0.0);
  Workspace ws;
  accumulate(bundle, prepare(bundle.featurizer(), traj), 1.0, ws, g.f, g.b, g.c);
  return g;
}

double remaining_budget(const SatisfactionModel& model, const Trajectory& traj) {
  double r = model.budget(traj.goal);
  for (const auto& t : traj.turns) r += model.turn_cost(t.state, t.action);
  return r;
}

double status_score(const SatisfactionModel& model, const Trajectory& traj) {
  double r = remaining_budget(model, traj);
  if (model.forward_looking()) r -= model.potential_cost(traj.terminal_unsatisfied);
  return r;
}

double dialogue_level_satisfaction(double remaining, DialogueStatus status) {
  return status == DialogueStatus::Failure ? std::max(0.0, remaining) : remaining;
}

void TrainingBatch::validate(LossMode mode) const {
  if (trajectories.empty()) throw InvalidArgument("empty training batch");
  for (const auto& t : trajectories) {
    if (t.turns.empty()) throw InvalidArgument("trajectory without turns");
    if (uses_prefix(mode) && t.turns.size() < 2) {
      throw PrefixTooShort("loss mode " + std::string(to_string(mode)) +
                           " needs trajectories with at least 2 turns");
    }
  }
}

void TrainingTrace::write_csv(std::ostream& out) const {
  out << "epoch,loss_1,loss_2,loss_3,total\n";
  for (const auto& e : epochs) {
    out << e.epoch << ',' << format_double(e.mean.loss_1) << ',' << format_double(e.mean.loss_2)
        << ',' << format_double(e.mean.loss_3) << ',' << format_double(e.mean.total()) << '\n';
  }
}

TrainResult train(EstimatorBundle bundle, const TrainingBatch& batch, const TrainConfig& cfg) {
  batch.validate(bundle.loss_mode());
  if (cfg.epochs < 1 || cfg.batch_size < 1) throw InvalidArgument("epochs and batch size must be positive");

  std::vector<Prepared> data;
  data.reserve(batch.trajectories.size());
  for (const auto& t : batch.trajectories) data.push_back(prepare(bundle.featurizer(), t));

  const bool fwd = bundle.has_c_net();
  Optimizer opt_f(cfg.optimizer, bundle.f_net().param_count());
  Optimizer opt_b(cfg.optimizer, bundle.b_net().param_count());
  std::optional<Optimizer> opt_c;
  if (fwd) opt_c.emplace(cfg.optimizer, bundle.c_net().param_count());

  std::vector<double> gf(bundle.f_net().param_count());
  std::vector<double> gb(bundle.b_net().param_count());
  std::vector<double> gc(fwd ? bundle.c_net().param_count() : 0);

  TrainingTrace trace;
  Rng rng(derive_seed(cfg.seed, 0x7ea1));
  std::vector<std::size_t> order(data.size());
  Workspace ws;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    rng.shuffle(order);
    LossTerms sum;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      const double weight = 1.0 / static_cast<double>(end - start);
      std::fill(gf.begin(), gf.end(), 0.0);
      std::fill(gb.begin(), gb.end(), 0.0);
      std::fill(gc.begin(), gc.end(), 0.0);
      for (std::size_t i = start; i < end; ++i) {
        const LossTerms t = accumulate(bundle, data[order[i]], weight, ws, gf, gb, gc);
        sum.loss_1 += t.loss_1;
        sum.loss_2 += t.loss_2;
        sum.loss_3 += t.loss_3;
      }
      opt_f.apply(bundle.f_net(), gf);
      opt_b.apply(bundle.b_net(), gb);
      if (fwd) opt_c->apply(bundle.c_net(), gc);
    }
    const double n = static_cast<double>(data.size());
    trace.epochs.push_back({epoch, {sum.loss_1 / n, sum.loss_2 / n, sum.loss_3 / n}});
  }
  return {std::move(bundle), std::move(trace)};
}

}  // namespace deus
