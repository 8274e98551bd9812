#include "deus/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include "deus/errors.hpp"
#include "deus/file_util.hpp"

namespace deus {

double mean(const std::vector<double>& xs) {
  if (xs.empty()) return 0.0;
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

double stddev(const std::vector<double>& xs) {
  if (xs.empty()) return 0.0;
  const double m = mean(xs);
  double s = 0.0;
  for (double x : xs) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(xs.size()));
}

double pearson(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size()) throw InvalidArgument("pearson: length mismatch");
  if (xs.size() < 2) throw InvalidArgument("pearson: need at least 2 points");
  const double mx = mean(xs);
  const double my = mean(ys);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) throw InvalidArgument("pearson: zero variance");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

std::pair<double, double> linear_fit(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size() || xs.size() < 2) throw InvalidArgument("linear_fit: bad input");
  const double mx = mean(xs);
  const double my = mean(ys);
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
  }
  if (sxx == 0.0) throw InvalidArgument("linear_fit: zero variance in x");
  const double slope = sxy / sxx;
  return {slope, my - slope * mx};
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

double two_proportion_p(int sa, int na, int sb, int nb) {
  if (na < 1 || nb < 1) throw InvalidArgument("empty sample");
  const double pa = static_cast<double>(sa) / na;
  const double pb = static_cast<double>(sb) / nb;
  const double pooled = static_cast<double>(sa + sb) / (na + nb);
  const double se = std::sqrt(pooled * (1.0 - pooled) * (1.0 / na + 1.0 / nb));
  if (se == 0.0) return pa > pb ? 0.0 : 1.0;
  return 1.0 - normal_cdf((pa - pb) / se);
}

double ratio_proportion_p(int sa, int na, int sb, int nb, double ratio) {
  if (na < 1 || nb < 1) throw InvalidArgument("empty sample");
  const double pa = static_cast<double>(sa) / na;
  const double pb = static_cast<double>(sb) / nb;
  const double var = pa * (1.0 - pa) / na + ratio * ratio * pb * (1.0 - pb) / nb;
  const double diff = pa - ratio * pb;
  if (var == 0.0) return diff > 0.0 ? 0.0 : 1.0;
  return 1.0 - normal_cdf(diff / std::sqrt(var));
}

// ---------------------------------------------------------------------------

std::vector<BinStats> CorrelationReport::bins_with_frequency(double min_pct) const {
  std::vector<BinStats> out;
  for (const auto& b : per_bin) {
    if (b.frequency_pct >= min_pct) out.push_back(b);
  }
  return out;
}

void CorrelationReport::write_csv(std::ostream& out) const {
  out << "true_value,frequency_pct,est_mean,est_std,n,outlier\n";
  for (const auto& b : per_bin) {
    const bool outlier = b.frequency_pct < outlier_threshold_pct;
    out << format_double(b.true_value) << ',' << fixed(b.frequency_pct, 4) << ','
        << fixed(b.est_mean, 6) << ',' << fixed(b.est_std, 6) << ',' << b.n << ','
        << (outlier ? 1 : 0) << '\n';
  }
}

CorrelationReport recovery_report(const std::vector<std::pair<double, double>>& pairs,
                                  double outlier_threshold_pct) {
  std::map<double, std::vector<double>> bins;
  for (const auto& [t, e] : pairs) bins[t].push_back(e);
  if (bins.size() < 3) {
    throw InsufficientBins("need at least 3 distinct true values, got " +
                           std::to_string(bins.size()));
  }
  CorrelationReport rep;
  rep.outlier_threshold_pct = outlier_threshold_pct;
  std::vector<double> xs, ys;
  for (auto& [t, est] : bins) {
    // Sorting makes the per-bin sums independent of trajectory order.
    std::sort(est.begin(), est.end());
    BinStats b;
    b.true_value = t;
    b.n = static_cast<int>(est.size());
    b.frequency_pct = 100.0 * b.n / static_cast<double>(pairs.size());
    b.est_mean = mean(est);
    b.est_std = stddev(est);
    rep.per_bin.push_back(b);
    if (b.frequency_pct < outlier_threshold_pct) {
      rep.outlier_bins.push_back(t);
    } else {
      xs.push_back(t);
      ys.push_back(b.est_mean);
    }
  }
  if (xs.size() < 2) throw InsufficientBins("fewer than 2 bins above the outlier threshold");
  const auto [slope, intercept] = linear_fit(xs, ys);
  rep.slope = slope;
  rep.intercept = intercept;
  try {
    rep.pearson_r = pearson(xs, ys);
  } catch (const InvalidArgument&) {
    rep.pearson_r = 0.0;  // constant estimates carry no linear relation
  }
  return rep;
}

CorrelationReport recovery_report(const SatisfactionModel& model,
                                  const std::vector<Trajectory>& trajs,
                                  double outlier_threshold_pct) {
  std::vector<std::pair<double, double>> pairs;
  for (const auto& t : trajs) {
    if (!t.true_costs) throw InvalidArgument("recovery report needs trajectories with true costs");
    for (std::size_t k = 0; k < t.turns.size(); ++k) {
      pairs.emplace_back((*t.true_costs)[k],
                         model.turn_cost(t.turns[k].state, t.turns[k].action));
    }
  }
  return recovery_report(pairs, outlier_threshold_pct);
}

// ---------------------------------------------------------------------------

namespace {

bool predicted_success(const SatisfactionModel& model, const Trajectory& t) {
  return status_score(model, t) >= 0.0;
}

}  // namespace

double status_accuracy(const SatisfactionModel& model, const std::vector<Trajectory>& trajs) {
  if (trajs.empty()) throw InvalidArgument("status accuracy of an empty log");
  int correct = 0;
  for (const auto& t : trajs) {
    correct += predicted_success(model, t) == (t.status == DialogueStatus::Success) ? 1 : 0;
  }
  return static_cast<double>(correct) / static_cast<double>(trajs.size());
}

std::vector<StatusBreakdown> status_breakdown(const SatisfactionModel& model,
                                              const std::vector<Trajectory>& trajs) {
  std::map<std::string, StatusBreakdown> rows;
  for (const auto& t : trajs) {
    const std::string key = t.termination ? to_string(*t.termination) : "unknown";
    auto& row = rows[key];
    row.termination = key;
    row.n += 1;
    row.correct += predicted_success(model, t) == (t.status == DialogueStatus::Success) ? 1 : 0;
  }
  std::vector<StatusBreakdown> out;
  for (auto& [k, v] : rows) out.push_back(v);
  return out;
}

// ---------------------------------------------------------------------------

void RatedDialogue::validate() const {
  if (rating < 1 || rating > 5) throw InvalidArgument("rating must be in 1..5");
  if (rating_type.empty()) throw InvalidArgument("rating type must be named");
  trajectory.validate();
}

namespace {

GroupStats group(const std::vector<double>& xs) {
  return {static_cast<int>(xs.size()), mean(xs), stddev(xs)};
}

double true_remaining(const Trajectory& t) {
  if (!t.true_costs) throw InvalidArgument("trajectory carries no true costs");
  double r = budget(t.goal);
  for (double c : *t.true_costs) r += c;
  return r;
}

}  // namespace

void RatedReport::write_csv(std::ostream& out) const {
  out << "rating_type,level,n,mean_remaining,std_remaining\n";
  for (const auto& rc : by_type) {
    for (const auto& l : rc.levels) {
      out << rc.rating_type << ',' << l.level << ',' << l.n << ',' << fixed(l.mean_remaining, 6)
          << ',' << fixed(l.std_remaining, 6) << '\n';
    }
  }
}

RatedReport rated_correlation(const SatisfactionModel& model,
                              const std::vector<RatedDialogue>& rated) {
  std::map<std::string, std::map<int, std::vector<double>>> by_type;
  std::vector<double> succ, fail;
  for (const auto& r : rated) {
    r.validate();
    const double rem = remaining_budget(model, r.trajectory);
    by_type[r.rating_type][r.rating].push_back(rem);
    (r.trajectory.status == DialogueStatus::Success ? succ : fail).push_back(rem);
  }
  RatedReport rep;
  for (auto& [type, levels] : by_type) {
    if (levels.size() < 2) {
      throw InsufficientLevels("rating type '" + type + "' has fewer than 2 distinct levels");
    }
    RatedCorrelation rc;
    rc.rating_type = type;
    std::vector<double> xs, ys;
    for (auto& [level, vals] : levels) {
      std::sort(vals.begin(), vals.end());
      rc.levels.push_back({level, static_cast<int>(vals.size()), mean(vals), stddev(vals)});
      xs.push_back(level);
      ys.push_back(rc.levels.back().mean_remaining);
    }
    rc.monotone = std::is_sorted(ys.begin(), ys.end());
    try {
      rc.pearson_r = pearson(xs, ys);
    } catch (const InvalidArgument&) {
      rc.pearson_r = 0.0;
    }
    rep.by_type.push_back(std::move(rc));
  }
  rep.success = group(succ);
  rep.failure = group(fail);
  return rep;
}

std::vector<RatedDialogue> quantile_rated(const std::vector<Trajectory>& trajs,
                                          const std::string& rating_type) {
  if (trajs.empty()) throw InvalidArgument("no trajectories to rate");
  std::vector<double> sorted;
  for (const auto& t : trajs) sorted.push_back(true_remaining(t));
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(sorted.size());
  // Quintile of x: ceil(5 F(x)) with F the empirical CDF, so equal budgets
  // always share a rating.
  std::vector<RatedDialogue> out;
  out.reserve(trajs.size());
  for (const auto& t : trajs) {
    const double x = true_remaining(t);
    const auto at_most = std::upper_bound(sorted.begin(), sorted.end(), x) - sorted.begin();
    const int level = static_cast<int>(std::ceil(5.0 * static_cast<double>(at_most) / n - 1e-12));
    out.push_back({t, rating_type, std::clamp(level, 1, 5)});
  }
  return out;
}

// ---------------------------------------------------------------------------

const SuccessCell& SuccessMatrix::at(const std::string& agent, const std::string& user) const {
  for (const auto& c : cells) {
    if (c.agent == agent && c.user == user) return c;
  }
  throw InvalidArgument("no success cell for " + agent + " / " + user);
}

void SuccessMatrix::write_csv(std::ostream& out) const {
  out << "agent,user,successes,n,success_rate\n";
  for (const auto& c : cells) {
    out << c.agent << ',' << c.user << ',' << c.successes << ',' << c.n << ','
        << fixed(c.rate(), 4) << '\n';
  }
}

void SuccessMatrix::write_markdown(std::ostream& out) const {
  out << "| agent |";
  for (const auto& u : users) out << ' ' << u << " |";
  out << "\n|---|";
  for (std::size_t i = 0; i < users.size(); ++i) out << "---|";
  out << '\n';
  for (const auto& a : agents) {
    out << "| " << a << " |";
    for (const auto& u : users) {
      const auto& c = at(a, u);
      if (c.n == 0) {
        out << " - |";
      } else {
        out << ' ' << fixed(100.0 * c.rate(), 1) << "% |";
      }
    }
    out << '\n';
  }
}

SuccessMatrix success_matrix(const std::vector<NamedAgent>& agents,
                             const std::vector<UserProfile>& users, const GoalSchema& schema,
                             const GoalComplexity& complexity, int n_goals, std::uint64_t seed) {
  SuccessMatrix m;
  for (const auto& u : users) m.users.push_back(to_string(u.id));
  for (const auto& a : agents) {
    m.agents.push_back(a.name);
    for (const auto& u : users) {
      const AgentEvaluation ev = evaluate_agent(a.policy, u, schema, complexity, n_goals, seed);
      m.cells.push_back({a.name, to_string(u.id), ev.successes, ev.episodes});
    }
  }
  return m;
}

}  // namespace deus
