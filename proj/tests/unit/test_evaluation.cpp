#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "deus/errors.hpp"
#include "deus/evaluation.hpp"
#include "helpers.hpp"

using namespace deus;

TEST_CASE("statistics helpers") {
  const std::vector<double> x{1, 2, 3, 4}, y{2, 4, 6, 8};
  CHECK(mean(x) == 2.5);
  CHECK(stddev(x) == doctest::Approx(std::sqrt(1.25)));
  CHECK(pearson(x, y) == doctest::Approx(1.0));
  const auto [slope, intercept] = linear_fit(x, y);
  CHECK(slope == doctest::Approx(2.0));
  CHECK(intercept == doctest::Approx(0.0).epsilon(1e-12));
  CHECK_THROWS_AS(pearson({1.0}, {1.0}), InvalidArgument);
  CHECK_THROWS_AS(pearson({1, 1, 1}, {1, 2, 3}), InvalidArgument);
  CHECK(normal_cdf(0.0) == doctest::Approx(0.5));
  CHECK(normal_cdf(1.959964) == doctest::Approx(0.975).epsilon(1e-5));
}

TEST_CASE("proportion tests") {
  // 60/100 vs 40/100: pooled z = 0.2 / sqrt(0.5*0.5*0.02) = 2.828
  CHECK(two_proportion_p(60, 100, 40, 100) == doctest::Approx(1 - normal_cdf(2.8284271)).epsilon(1e-6));
  CHECK(two_proportion_p(40, 100, 60, 100) > 0.99);
  CHECK(two_proportion_p(50, 100, 50, 100) == doctest::Approx(0.5));
  CHECK(ratio_proportion_p(200, 500, 50, 500, 2.0) < 1e-6);
  CHECK(ratio_proportion_p(100, 500, 50, 500, 2.0) == doctest::Approx(0.5));
}

TEST_CASE("recovery report on synthetic pairs") {
  std::vector<std::pair<double, double>> exact, half;
  for (int v = -1; v >= -5; --v) {
    for (int k = 0; k < 20; ++k) {
      exact.emplace_back(v, v);
      half.emplace_back(v, 0.5 * v);
    }
  }
  const auto r1 = recovery_report(exact);
  CHECK(r1.pearson_r == doctest::Approx(1.0));
  CHECK(r1.slope == doctest::Approx(1.0));
  CHECK(r1.intercept == doctest::Approx(0.0).epsilon(1e-12));
  const auto r2 = recovery_report(half);
  CHECK(r2.pearson_r == doctest::Approx(1.0));
  CHECK(r2.slope == doctest::Approx(0.5));
  double total = 0.0;
  for (const auto& b : r2.per_bin) total += b.frequency_pct;
  CHECK(total == doctest::Approx(100.0).epsilon(1e-3));
  CHECK_THROWS_AS(recovery_report({{-1, -1}, {-2, -2}}), InsufficientBins);
}

TEST_CASE("outlier bins are excluded from the fit and reported") {
  std::vector<std::pair<double, double>> pairs;
  for (int v = -1; v >= -4; --v) {
    for (int k = 0; k < 100; ++k) pairs.emplace_back(v, v);
  }
  pairs.emplace_back(-7, 10.0);  // 0.25% of the data, wildly off
  const auto r = recovery_report(pairs, 1.0);
  CHECK(r.outlier_bins == std::vector<double>{-7.0});
  CHECK(r.pearson_r == doctest::Approx(1.0));
  CHECK(r.bins_with_frequency(5.0).size() == 4);
}

TEST_CASE("recovery report is permutation invariant") {
  auto logs = testing_helpers::simulate(UserId::User2, 150, 31);
  const GroundTruthModel gt(UserProfile::make(UserId::User2));
  std::stringstream a, b;
  recovery_report(gt, logs).write_csv(a);
  std::reverse(logs.begin(), logs.end());
  recovery_report(gt, logs).write_csv(b);
  CHECK(a.str() == b.str());
}

TEST_CASE("ground truth status accuracy is exact outside max-turn endings") {
  const auto logs = testing_helpers::simulate(UserId::User2, 300, 12);
  std::vector<Trajectory> constrained;
  for (const auto& t : logs) {
    if (t.termination == TerminationReason::TaskComplete ||
        t.termination == TerminationReason::BudgetExhausted) {
      constrained.push_back(t);
    }
  }
  const GroundTruthModel gt(UserProfile::make(UserId::User2));
  CHECK(status_accuracy(gt, constrained) == 1.0);
  int n = 0;
  for (const auto& row : status_breakdown(gt, logs)) n += row.n;
  CHECK(n == static_cast<int>(logs.size()));
}

TEST_CASE("rated correlation") {
  const auto logs = testing_helpers::simulate(UserId::User1, 400, 6);
  const GroundTruthModel gt(UserProfile::make(UserId::User1));
  const auto rated = quantile_rated(logs, "appropriateness");
  // Equal true budgets share a rating.
  for (std::size_t i = 0; i < rated.size(); ++i) {
    for (std::size_t j = 0; j < rated.size(); ++j) {
      if (remaining_budget(gt, logs[i]) == remaining_budget(gt, logs[j])) {
        CHECK(rated[i].rating == rated[j].rating);
      }
    }
  }
  const auto rep = rated_correlation(gt, rated);
  REQUIRE(rep.by_type.size() == 1);
  CHECK(rep.by_type[0].monotone);
  CHECK(rep.by_type[0].pearson_r > 0.9);
  CHECK(rep.success.mean > rep.failure.mean);

  std::vector<RatedDialogue> flat = rated;
  for (auto& r : flat) r.rating = 3;
  CHECK_THROWS_AS(rated_correlation(gt, flat), InsufficientLevels);
  flat.front().rating = 6;
  CHECK_THROWS_AS(flat.front().validate(), InvalidArgument);
}

TEST_CASE("success matrix cells") {
  const auto schema = GoalSchema::default_schema();
  const auto greeter = [](const DialogueState&, Rng&) { return AgentAction::greet(); };
  const auto m = success_matrix({{"greeter", greeter}, {"random", testing_helpers::random_policy(schema)}},
                                {UserProfile::make(UserId::User1), UserProfile::make(UserId::User2)},
                                schema, {}, 50, 1);
  CHECK(m.cells.size() == 4);
  CHECK(m.at("greeter", "user1").successes == 0);
  CHECK(m.at("greeter", "user2").n == 50);
  CHECK_THROWS_AS(m.at("nobody", "user1"), InvalidArgument);
  std::stringstream md;
  m.write_markdown(md);
  CHECK(md.str().find("greeter") != std::string::npos);
}
