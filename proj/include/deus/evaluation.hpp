#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "deus/agent.hpp"
#include "deus/dialogue.hpp"
#include "deus/estimator.hpp"
#include "deus/user_sim.hpp"

namespace deus {

// ---------------------------------------------------------------------------
// Small statistics helpers.

double mean(const std::vector<double>& xs);
// Population standard deviation.
double stddev(const std::vector<double>& xs);
// Throws InvalidArgument for fewer than 2 points or zero variance.
double pearson(const std::vector<double>& xs, const std::vector<double>& ys);
// Least-squares y = slope * x + intercept.
std::pair<double, double> linear_fit(const std::vector<double>& xs, const std::vector<double>& ys);

double normal_cdf(double z);
// One-sided p-value of H1: p_a > p_b with a pooled two-proportion z-test.
double two_proportion_p(int successes_a, int n_a, int successes_b, int n_b);
// One-sided p-value of H1: p_a > ratio * p_b (Wald z, unpooled variance).
double ratio_proportion_p(int successes_a, int n_a, int successes_b, int n_b, double ratio);

// ---------------------------------------------------------------------------
// Satisfaction recovery.

struct BinStats {
  double true_value = 0.0;
  double frequency_pct = 0.0;
  double est_mean = 0.0;
  double est_std = 0.0;
  int n = 0;
};

struct CorrelationReport {
  double pearson_r = 0.0;
  double slope = 0.0;
  double intercept = 0.0;
  std::vector<BinStats> per_bin;      // ascending true value, all bins
  std::vector<double> outlier_bins;   // true values of bins below the threshold
  double outlier_threshold_pct = 1.0;

  // Bins whose frequency is at least `min_pct`.
  std::vector<BinStats> bins_with_frequency(double min_pct) const;
  void write_csv(std::ostream& out) const;
};

// Bins (true, estimate) pairs by true value. Bins under the threshold are
// excluded from r and the fit. Throws InsufficientBins with fewer than 3
// distinct true values (or fewer than 2 bins left after excluding outliers).
CorrelationReport recovery_report(const std::vector<std::pair<double, double>>& pairs,
                                  double outlier_threshold_pct = 1.0);
// Pairs every turn's true cost with the model's estimate.
CorrelationReport recovery_report(const SatisfactionModel& model,
                                  const std::vector<Trajectory>& trajs,
                                  double outlier_threshold_pct = 1.0);

// ---------------------------------------------------------------------------
// Status prediction.

// Fraction of dialogues whose status_score sign (>= 0 means success) matches
// the logged status.
double status_accuracy(const SatisfactionModel& model, const std::vector<Trajectory>& trajs);

struct StatusBreakdown {
  std::string termination;  // termination reason, or "unknown"
  int n = 0;
  int correct = 0;
};
std::vector<StatusBreakdown> status_breakdown(const SatisfactionModel& model,
                                              const std::vector<Trajectory>& trajs);

// ---------------------------------------------------------------------------
// Remaining budget against dialogue-level ratings.

struct RatedDialogue {
  Trajectory trajectory;
  std::string rating_type;  // e.g. "appropriateness"
  int rating = 3;           // 1..5
  void validate() const;
};

struct LevelStats {
  int level = 0;
  int n = 0;
  double mean_remaining = 0.0;
  double std_remaining = 0.0;
};

struct GroupStats {
  int n = 0;
  double mean = 0.0;
  double std = 0.0;
};

struct RatedCorrelation {
  std::string rating_type;
  std::vector<LevelStats> levels;  // ascending level
  double pearson_r = 0.0;          // over (level, mean remaining)
  bool monotone = false;           // mean remaining non-decreasing in level
};

struct RatedReport {
  std::vector<RatedCorrelation> by_type;
  GroupStats success;
  GroupStats failure;
  void write_csv(std::ostream& out) const;
};

// Throws InsufficientLevels when a rating type has fewer than 2 levels.
RatedReport rated_correlation(const SatisfactionModel& model,
                              const std::vector<RatedDialogue>& rated);

// Synthetic rated log: ratings are quintiles (1..5) of the true remaining
// budget of each trajectory (tied budgets share a rating).
std::vector<RatedDialogue> quantile_rated(const std::vector<Trajectory>& trajs,
                                          const std::string& rating_type);

// ---------------------------------------------------------------------------
// Success matrix.

struct NamedAgent {
  std::string name;
  AgentPolicy policy;
};

struct SuccessCell {
  std::string agent;
  std::string user;
  int successes = 0;
  int n = 0;
  double rate() const { return n > 0 ? static_cast<double>(successes) / n : 0.0; }
};

struct SuccessMatrix {
  std::vector<std::string> agents;
  std::vector<std::string> users;
  std::vector<SuccessCell> cells;  // row-major: agent, then user

  const SuccessCell& at(const std::string& agent, const std::string& user) const;
  void write_csv(std::ostream& out) const;
  void write_markdown(std::ostream& out) const;
};

// Every agent plays the same n_goals held-out goals against every user.
SuccessMatrix success_matrix(const std::vector<NamedAgent>& agents,
                             const std::vector<UserProfile>& users, const GoalSchema& schema,
                             const GoalComplexity& complexity, int n_goals, std::uint64_t seed);

}  // namespace deus
