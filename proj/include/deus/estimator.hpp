#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "deus/dialogue.hpp"
#include "deus/features.hpp"
#include "deus/mlp.hpp"
#include "deus/user_sim.hpp"

namespace deus {

enum class LossMode { Full, Light, FullForward };

const char* to_string(LossMode m);
LossMode loss_mode_from_string(const std::string& s);

// Anything that assigns a cost to a turn and a budget to a goal: a trained
// estimator or the simulator's ground truth. Reports are written against this.
class SatisfactionModel {
 public:
  virtual ~SatisfactionModel() = default;
  virtual double turn_cost(const DialogueState& s, const AgentAction& a) const = 0;
  virtual double budget(const UserGoal& goal) const = 0;
  // True when status prediction should subtract the potential cost of goal'.
  virtual bool forward_looking() const { return false; }
  virtual double potential_cost(const UserGoal& remaining) const;
};

// The simulator's own f2 and budget; the reference for status exactness.
class GroundTruthModel final : public SatisfactionModel {
 public:
  explicit GroundTruthModel(UserProfile profile) : profile_(std::move(profile)) {}
  double turn_cost(const DialogueState& s, const AgentAction& a) const override {
    return profile_.turn_cost(s, a);
  }
  double budget(const UserGoal& goal) const override { return profile_.budget(goal); }

 private:
  UserProfile profile_;
};

struct EstimatorConfig {
  double v_b = -1.0;
  LossMode loss_mode = LossMode::Full;
  std::vector<int> hidden = {64, 64};
  Activation activation = Activation::Tanh;
  // Net outputs are multiplied by |v_b| (turn costs) and budget_scale * |v_b|
  // (budget, potential cost).
  double budget_scale = 10.0;

  void validate() const;
};

// Learned f(s,a), b(goal) and, in forward mode, c(goal').
class EstimatorBundle final : public SatisfactionModel {
 public:
  EstimatorBundle(Featurizer featurizer, EstimatorConfig cfg, std::uint64_t init_seed);
  // Every parameter zero: all estimates are 0.
  static EstimatorBundle zeros(Featurizer featurizer, EstimatorConfig cfg);

  const Featurizer& featurizer() const { return featurizer_; }
  const EstimatorConfig& config() const { return cfg_; }
  double v_b() const { return cfg_.v_b; }
  LossMode loss_mode() const { return cfg_.loss_mode; }
  double cost_scale() const { return -cfg_.v_b; }
  double budget_out_scale() const { return -cfg_.v_b * cfg_.budget_scale; }

  FeedForwardNet& f_net() { return f_net_; }
  FeedForwardNet& b_net() { return b_net_; }
  const FeedForwardNet& f_net() const { return f_net_; }
  const FeedForwardNet& b_net() const { return b_net_; }
  bool has_c_net() const { return c_net_.has_value(); }
  FeedForwardNet& c_net();
  const FeedForwardNet& c_net() const;

  double estimate_turn_cost(const DialogueState& s, const AgentAction& a) const;
  double estimate_budget(const UserGoal& goal) const;
  // 0 for an empty goal'; throws ModeMismatch without a c net.
  double estimate_potential_cost(const UserGoal& remaining) const;

  double turn_cost(const DialogueState& s, const AgentAction& a) const override {
    return estimate_turn_cost(s, a);
  }
  double budget(const UserGoal& goal) const override { return estimate_budget(goal); }
  bool forward_looking() const override { return has_c_net(); }
  double potential_cost(const UserGoal& remaining) const override {
    return estimate_potential_cost(remaining);
  }

  void save(std::ostream& out) const;
  static EstimatorBundle load(std::istream& in);
  void save(const std::string& path) const;
  static EstimatorBundle load(const std::string& path);

 private:
  EstimatorBundle(Featurizer featurizer, EstimatorConfig cfg, FeedForwardNet f,
                  FeedForwardNet b, std::optional<FeedForwardNet> c);

  Featurizer featurizer_;
  EstimatorConfig cfg_;
  FeedForwardNet f_net_;
  FeedForwardNet b_net_;
  std::optional<FeedForwardNet> c_net_;
};

// ---------------------------------------------------------------------------
// Hinge losses on plain numbers. `costs` are the per-turn estimates f(s_t,a_t)
// for t = 1..m, `budget` is b(goal), `potential` is c(goal') (0 when unused),
// `status` is +1 / -1.

struct LossTerms {
  double loss_1 = 0.0;
  double loss_2 = 0.0;
  double loss_3 = 0.0;
  double total() const { return loss_1 + loss_2 + loss_3; }
};

struct LossGradient {
  std::vector<double> d_costs;
  double d_budget = 0.0;
  double d_potential = 0.0;
};

// Which terms enter the total for a mode: light drops loss_2; forward modes
// subtract the potential cost inside loss_1 and loss_2. The subgradient at a
// hinge kink is 0.
LossTerms hinge_losses(LossMode mode, std::span<const double> costs, double budget,
                       double potential, int status, double v_b);
LossGradient hinge_gradient(LossMode mode, std::span<const double> costs, double budget,
                            double potential, int status, double v_b);

// ---------------------------------------------------------------------------
// Losses of one trajectory under the bundle's current estimates.

double loss_1(const EstimatorBundle& bundle, const Trajectory& traj);
// Throws PrefixTooShort when the trajectory has fewer than 2 turns.
double loss_2(const EstimatorBundle& bundle, const Trajectory& traj);
double loss_3(const EstimatorBundle& bundle, const Trajectory& traj);
// loss_1_forward + loss_2_forward + loss_3, with c evaluated on the terminal
// goal'. Throws ModeMismatch without a c net.
double loss_forward(const EstimatorBundle& bundle, const Trajectory& traj);
// Total loss for the bundle's own loss mode.
double total_loss(const EstimatorBundle& bundle, const Trajectory& traj);

// Parameter gradients of total_loss for one trajectory.
struct BundleGradients {
  std::vector<double> f;
  std::vector<double> b;
  std::vector<double> c;
};
BundleGradients total_loss_gradients(const EstimatorBundle& bundle, const Trajectory& traj);

// sum_t f(s_t, a_t) + b(goal).
double remaining_budget(const SatisfactionModel& model, const Trajectory& traj);
// remaining_budget minus c(terminal goal') for forward-looking models.
double status_score(const SatisfactionModel& model, const Trajectory& traj);
// Reported dialogue-level satisfaction: failed dialogues are clamped at 0.
double dialogue_level_satisfaction(double remaining, DialogueStatus status);

// ---------------------------------------------------------------------------
// Training.

struct TrainingBatch {
  std::vector<Trajectory> trajectories;
  // Throws InvalidArgument / PrefixTooShort when unusable under `mode`.
  void validate(LossMode mode) const;
};

struct TrainConfig {
  int epochs = 200;
  int batch_size = 32;
  OptimizerConfig optimizer;
  std::uint64_t seed = 1;
};

struct EpochTrace {
  int epoch = 0;
  LossTerms mean;
};

struct TrainingTrace {
  std::vector<EpochTrace> epochs;
  void write_csv(std::ostream& out) const;
};

struct TrainResult {
  EstimatorBundle bundle;
  TrainingTrace trace;
};

// Mini-batch descent on the mean total loss of the bundle's mode. Only goal,
// turns, status and terminal_unsatisfied are read; true costs are ignored.
TrainResult train(EstimatorBundle bundle, const TrainingBatch& batch, const TrainConfig& cfg);

}  // namespace deus
