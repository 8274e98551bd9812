#include <doctest.h>

#include <cmath>
#include <limits>
#include <sstream>

#include "deus/errors.hpp"
#include "deus/mlp.hpp"
#include "deus/rng.hpp"

using namespace deus;

namespace {

double rel_err(double a, double b) {
  return std::abs(a - b) / std::max(1e-8, std::abs(a) + std::abs(b));
}

// Finite-difference check of backward() for a weighted sum of outputs.
double max_grad_error(FeedForwardNet net, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> x(net.input_dim()), w(net.output_dim());
  for (double& v : x) v = rng.uniform(-1, 1);
  for (double& v : w) v = rng.uniform(-1, 1);
  auto loss = [&](const FeedForwardNet& n) {
    const auto y = n.forward(x);
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) s += w[i] * y[i];
    return s;
  };
  FeedForwardNet::Tape tape;
  net.forward(x, tape);
  const auto g = net.backward(tape, w);
  const double h = 1e-5;
  double worst = 0.0;
  for (std::size_t p = 0; p < net.param_count(); ++p) {
    const double orig = net.params()[p];
    net.params()[p] = orig + h;
    const double up = loss(net);
    net.params()[p] = orig - h;
    const double down = loss(net);
    net.params()[p] = orig;
    const double fd = (up - down) / (2 * h);
    if (std::abs(fd) < 1e-7 && std::abs(g[p]) < 1e-7) continue;
    worst = std::max(worst, rel_err(fd, g[p]));
  }
  return worst;
}

}  // namespace

TEST_CASE("forward pass of a hand-set net") {
  auto net = FeedForwardNet::zeros({2, 2, 1}, Activation::Relu);
  auto p = net.params();
  // hidden: h0 = x0 - x1, h1 = x0 + x1 + 1; out = 2 h0 + h1 - 0.5
  double vals[] = {1, -1, 1, 1, 0, 1, 2, 1, -0.5};
  std::copy(std::begin(vals), std::end(vals), p.begin());
  const std::vector<double> x{2.0, 1.0};
  CHECK(net.forward_scalar(x) == doctest::Approx(2 * 1 + 4 - 0.5));
  const std::vector<double> x2{0.0, 1.0};
  CHECK(net.forward_scalar(x2) == doctest::Approx(0 + 2 - 0.5));
  CHECK_THROWS_AS(net.forward(std::vector<double>{1.0}), DimensionMismatch);
}

TEST_CASE("backward matches finite differences") {
  CHECK(max_grad_error(FeedForwardNet({5, 8, 6, 3}, Activation::Tanh, 3), 1) < 1e-6);
  CHECK(max_grad_error(FeedForwardNet({4, 7, 1}, Activation::Relu, 4), 2) < 1e-6);
  CHECK(max_grad_error(FeedForwardNet({3, 1}, Activation::Tanh, 5), 3) < 1e-6);
}

TEST_CASE("glorot init is deterministic and bounded; zero output layer") {
  FeedForwardNet a({6, 10, 1}, Activation::Tanh, 42), b({6, 10, 1}, Activation::Tanh, 42);
  CHECK(a == b);
  const double bound = std::sqrt(6.0 / 16.0);
  for (std::size_t i = 0; i < 60; ++i) CHECK(std::abs(a.params()[i]) <= bound);
  a.zero_output_layer();
  CHECK(a.forward_scalar(std::vector<double>(6, 0.3)) == 0.0);
  CHECK(a.params()[0] == b.params()[0]);
}

TEST_CASE("model save/load round trip is exact") {
  FeedForwardNet net({3, 4, 2}, Activation::Relu, 9);
  std::stringstream ss;
  net.save(ss);
  const auto back = FeedForwardNet::load(ss);
  CHECK(back == net);
  std::stringstream bad("deus-mlp 1\ngarbage\n");
  CHECK_THROWS_AS(FeedForwardNet::load(bad), FormatError);
}

TEST_CASE("optimizers descend a quadratic and refuse non-finite gradients") {
  for (auto kind : {OptimizerKind::Adam, OptimizerKind::SgdMomentum}) {
    auto net = FeedForwardNet::zeros({1, 1}, Activation::Tanh);
    OptimizerConfig cfg;
    cfg.kind = kind;
    cfg.learning_rate = kind == OptimizerKind::Adam ? 0.05 : 0.1;
    cfg.momentum = 0.5;
    Optimizer opt(cfg, net.param_count());
    // minimise (w - 3)^2 + (b + 1)^2
    for (int i = 0; i < 2000; ++i) {
      std::vector<double> g{2 * (net.params()[0] - 3), 2 * (net.params()[1] + 1)};
      opt.apply(net, g);
    }
    CHECK(net.params()[0] == doctest::Approx(3.0).epsilon(1e-3));
    CHECK(net.params()[1] == doctest::Approx(-1.0).epsilon(1e-3));
    const auto before = std::vector<double>(net.params().begin(), net.params().end());
    std::vector<double> bad{std::numeric_limits<double>::quiet_NaN(), 0.0};
    CHECK_THROWS_AS(opt.apply(net, bad), NonFiniteGradient);
    CHECK(std::vector<double>(net.params().begin(), net.params().end()) == before);
  }
}

TEST_CASE("rng helpers") {
  Rng a(7), b(7);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
  Rng r(1);
  for (int i = 0; i < 1000; ++i) {
    const auto v = r.uniform_int(-3, 4);
    CHECK(v >= -3);
    CHECK(v <= 4);
    const double u = r.uniform01();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
  CHECK(derive_seed(1, 2) != derive_seed(1, 3));
  CHECK(derive_seed(1, 2) != derive_seed(2, 2));
}
