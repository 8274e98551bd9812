#include <doctest.h>

#include <cmath>
#include <sstream>

#include "../loss_oracle.hpp"
#include "deus/errors.hpp"
#include "deus/estimator.hpp"
#include "helpers.hpp"

using namespace deus;

namespace {

oracle::Tuple random_tuple(Rng& rng, int m) {
  oracle::Tuple x;
  for (int t = 0; t < m; ++t) x.f.push_back(rng.uniform(-5, 1));
  x.b = rng.uniform(-3, 12);
  x.c = rng.uniform(-8, 3);
  x.status = rng.uniform01() < 0.5 ? 1 : -1;
  x.v_b = rng.uniform(-3, -0.1);
  return x;
}

Featurizer default_featurizer() { return Featurizer(GoalSchema::default_schema(), 40); }

EstimatorBundle random_bundle(LossMode mode, std::uint64_t seed) {
  EstimatorConfig cfg;
  cfg.loss_mode = mode;
  cfg.hidden = {6, 5};
  EstimatorBundle b(default_featurizer(), cfg, seed);
  Rng rng(seed + 100);
  auto jitter = [&](FeedForwardNet& n) {
    for (double& p : n.params()) p = rng.uniform(-0.6, 0.6);
  };
  jitter(b.f_net());
  jitter(b.b_net());
  if (b.has_c_net()) jitter(b.c_net());
  return b;
}

double rel_err(double a, double b) {
  return std::abs(a - b) / std::max(1e-6, std::abs(a) + std::abs(b));
}

}  // namespace

TEST_CASE("hinge losses equal the brute-force transcription") {
  Rng rng(2024);
  for (int i = 0; i < 1000; ++i) {
    const auto x = random_tuple(rng, 2 + static_cast<int>(rng.index(12)));
    const auto full = hinge_losses(LossMode::Full, x.f, x.b, x.c, x.status, x.v_b);
    const auto light = hinge_losses(LossMode::Light, x.f, x.b, x.c, x.status, x.v_b);
    const auto fwd = hinge_losses(LossMode::FullForward, x.f, x.b, x.c, x.status, x.v_b);
    CHECK(std::abs(full.loss_1 - oracle::loss_1(x, false)) < 1e-9);
    CHECK(std::abs(full.loss_2 - oracle::loss_2(x, false)) < 1e-9);
    CHECK(std::abs(full.loss_3 - oracle::loss_3(x)) < 1e-9);
    CHECK(std::abs(full.total() - oracle::loss_full(x)) < 1e-9);
    CHECK(std::abs(light.total() - oracle::loss_light(x)) < 1e-9);
    CHECK(std::abs(fwd.total() - oracle::loss_full_forward(x)) < 1e-9);
  }
}

TEST_CASE("hinge boundaries and short prefixes") {
  const std::vector<double> f{-1.0, -2.0};
  // Exactly on the success boundary: no loss.
  CHECK(hinge_losses(LossMode::Full, f, 3.0, 0.0, 1, -0.5).loss_1 == 0.0);
  CHECK(hinge_losses(LossMode::Full, f, 1.0, 0.0, 1, -0.5).loss_2 == 0.0);
  CHECK(hinge_losses(LossMode::Full, f, 1.0, 0.0, 1, -0.5).loss_3 == 0.0);
  const std::vector<double> one{-1.0};
  CHECK_THROWS_AS(hinge_losses(LossMode::Full, one, 3.0, 0.0, 1, -1.0), PrefixTooShort);
  CHECK_NOTHROW(hinge_losses(LossMode::Light, one, 3.0, 0.0, 1, -1.0));
}

TEST_CASE("hinge gradient matches finite differences away from kinks") {
  Rng rng(7);
  const double h = 1e-5;
  int checked = 0;
  for (int i = 0; i < 300; ++i) {
    auto x = random_tuple(rng, 2 + static_cast<int>(rng.index(6)));
    for (auto mode : {LossMode::Full, LossMode::Light, LossMode::FullForward}) {
      auto L = [&](const oracle::Tuple& y) {
        return hinge_losses(mode, y.f, y.b, y.c, y.status, y.v_b).total();
      };
      const auto g = hinge_gradient(mode, x.f, x.b, x.c, x.status, x.v_b);
      auto fd = [&](double& v) {
        const double o = v;
        v = o + h;
        const double up = L(x);
        v = o - h;
        const double down = L(x);
        v = o;
        return (up - down) / (2 * h);
      };
      bool near_kink = false;
      {
        double s = x.b - (mode == LossMode::FullForward ? x.c : 0.0), p = s;
        for (std::size_t t = 0; t < x.f.size(); ++t) {
          s += x.f[t];
          if (t + 1 < x.f.size()) p += x.f[t];
          near_kink = near_kink || std::abs(x.f[t] - x.v_b) < 1e-3;
        }
        near_kink = near_kink || std::abs(s) < 1e-3 || std::abs(p) < 1e-3;
      }
      if (near_kink) continue;
      for (std::size_t t = 0; t < x.f.size(); ++t) CHECK(std::abs(fd(x.f[t]) - g.d_costs[t]) < 1e-6);
      CHECK(std::abs(fd(x.b) - g.d_budget) < 1e-6);
      CHECK(std::abs(fd(x.c) - g.d_potential) < 1e-6);
      ++checked;
    }
  }
  CHECK(checked > 500);
}

TEST_CASE("per-trajectory losses use the bundle estimates") {
  const auto logs = testing_helpers::simulate(UserId::User3, 40, 3);
  for (auto mode : {LossMode::Full, LossMode::Light, LossMode::FullForward}) {
    const auto bundle = random_bundle(mode, 5);
    for (const auto& t : logs) {
      if (t.turn_count() < 2) continue;
      oracle::Tuple x;
      for (const auto& turn : t.turns) x.f.push_back(bundle.estimate_turn_cost(turn.state, turn.action));
      x.b = bundle.estimate_budget(t.goal);
      x.c = mode == LossMode::FullForward ? bundle.estimate_potential_cost(t.terminal_unsatisfied) : 0.0;
      x.status = status_sign(t.status);
      x.v_b = bundle.v_b();
      const double expected = mode == LossMode::Full    ? oracle::loss_full(x)
                              : mode == LossMode::Light ? oracle::loss_light(x)
                                                        : oracle::loss_full_forward(x);
      CHECK(std::abs(total_loss(bundle, t) - expected) < 1e-9);
      CHECK(std::abs(loss_1(bundle, t) - oracle::loss_1(x, false)) < 1e-9);
      CHECK(std::abs(loss_2(bundle, t) - oracle::loss_2(x, false)) < 1e-9);
      CHECK(std::abs(loss_3(bundle, t) - oracle::loss_3(x)) < 1e-9);
      if (mode == LossMode::FullForward) {
        CHECK(std::abs(loss_forward(bundle, t) - oracle::loss_full_forward(x)) < 1e-9);
      }
    }
  }
  CHECK_THROWS_AS(loss_forward(random_bundle(LossMode::Full, 1), logs.front()), ModeMismatch);
}

TEST_CASE("parameter gradients of every total loss match finite differences") {
  const auto logs = testing_helpers::simulate(UserId::User3, 30, 17);
  const double h = 1e-5;
  for (auto mode : {LossMode::Full, LossMode::Light, LossMode::FullForward}) {
    auto bundle = random_bundle(mode, 11);
    double worst = 0.0;
    int used = 0;
    for (const auto& t : logs) {
      if (t.turn_count() < 2 || used >= 6) continue;
      const auto g = total_loss_gradients(bundle, t);
      auto check_net = [&](FeedForwardNet& net, const std::vector<double>& grad) {
        for (std::size_t p = 0; p < net.param_count(); ++p) {
          const double o = net.params()[p];
          net.params()[p] = o + h;
          const double up = total_loss(bundle, t);
          net.params()[p] = o - h;
          const double down = total_loss(bundle, t);
          net.params()[p] = o;
          const double fd = (up - down) / (2 * h);
          if (std::abs(fd) < 1e-8 && std::abs(grad[p]) < 1e-8) continue;
          worst = std::max(worst, rel_err(fd, grad[p]));
        }
      };
      check_net(bundle.f_net(), g.f);
      check_net(bundle.b_net(), g.b);
      if (bundle.has_c_net()) check_net(bundle.c_net(), g.c);
      ++used;
    }
    CHECK(used > 0);
    CHECK(worst < 1e-4);
  }
}

TEST_CASE("bundle save/load round trip") {
  for (auto mode : {LossMode::Full, LossMode::FullForward}) {
    const auto b = random_bundle(mode, 3);
    std::stringstream ss;
    b.save(ss);
    const std::string text = ss.str();
    const auto back = EstimatorBundle::load(ss);
    std::stringstream again;
    back.save(again);
    CHECK(again.str() == text);
    CHECK(back.has_c_net() == (mode == LossMode::FullForward));
  }
  std::stringstream bad("deus-bundle 1\nv_b 0.5\n");
  CHECK_THROWS_AS(EstimatorBundle::load(bad), FormatError);
  CHECK_THROWS_AS(EstimatorBundle::load("/nonexistent/bundle.txt"), FormatError);
}

TEST_CASE("zero bundle and output scaling") {
  EstimatorConfig cfg;
  const auto z = EstimatorBundle::zeros(default_featurizer(), cfg);
  const auto g = sample_goal(GoalSchema::default_schema(), 1);
  CHECK(z.estimate_budget(g) == 0.0);
  CHECK(z.estimate_turn_cost(initial_state(g), AgentAction::greet()) == 0.0);
  CHECK_THROWS_AS(z.estimate_potential_cost(g), ModeMismatch);
  cfg.loss_mode = LossMode::FullForward;
  const auto zf = EstimatorBundle::zeros(default_featurizer(), cfg);
  CHECK(zf.estimate_potential_cost(UserGoal::empty()) == 0.0);
  cfg.v_b = 0.5;
  CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
}

TEST_CASE("ground truth model scores simulator logs perfectly") {
  const auto logs = testing_helpers::simulate(UserId::User2, 200, 8);
  const GroundTruthModel gt(UserProfile::make(UserId::User2));
  for (const auto& t : logs) {
    const double r = remaining_budget(gt, t);
    double expected = budget(t.goal);
    for (double c : *t.true_costs) expected += c;
    CHECK(r == expected);
    if (t.termination != TerminationReason::MaxTurns) {
      CHECK((r >= 0.0) == (t.status == DialogueStatus::Success));
    }
  }
  CHECK(dialogue_level_satisfaction(-2.0, DialogueStatus::Failure) == 0.0);
  CHECK(dialogue_level_satisfaction(2.0, DialogueStatus::Success) == 2.0);
}

TEST_CASE("training reduces the loss, is deterministic, and rejects bad batches") {
  const auto logs = testing_helpers::simulate(UserId::User2, 200, 4);
  TrainingBatch batch;
  for (const auto& t : logs) {
    if (t.turn_count() >= 2) batch.trajectories.push_back(t);
  }
  EstimatorConfig cfg;
  cfg.hidden = {16};
  TrainConfig tc;
  tc.epochs = 15;
  tc.seed = 3;
  const auto r1 = train(EstimatorBundle(default_featurizer(), cfg, 1), batch, tc);
  const auto r2 = train(EstimatorBundle(default_featurizer(), cfg, 1), batch, tc);
  CHECK(r1.trace.epochs.back().mean.total() < r1.trace.epochs.front().mean.total());
  std::stringstream a, b;
  r1.bundle.save(a);
  r2.bundle.save(b);
  CHECK(a.str() == b.str());

  TrainingBatch short_batch;
  for (const auto& t : logs) {
    if (t.turn_count() == 1) short_batch.trajectories.push_back(t);
  }
  if (!short_batch.trajectories.empty()) {
    CHECK_THROWS_AS(train(EstimatorBundle(default_featurizer(), cfg, 1), short_batch, tc),
                    PrefixTooShort);
  }
  CHECK_THROWS_AS(train(EstimatorBundle(default_featurizer(), cfg, 1), TrainingBatch{}, tc),
                  InvalidArgument);
}
