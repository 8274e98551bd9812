#include "deus/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>

#include "deus/errors.hpp"
#include "deus/file_util.hpp"
#include "deus/rng.hpp"

namespace deus {

const char* to_string(Activation a) { return a == Activation::Tanh ? "tanh" : "relu"; }

Activation activation_from_string(const std::string& s) {
  if (s == "tanh") return Activation::Tanh;
  if (s == "relu") return Activation::Relu;
  throw FormatError("unknown activation: " + s);
}

FeedForwardNet::FeedForwardNet(std::vector<int> layer_dims, Activation hidden, ZeroInit)
    : dims_(std::move(layer_dims)), act_(hidden) {
  if (dims_.size() < 2) throw InvalidArgument("network needs at least input and output dims");
  for (int d : dims_) {
    if (d < 1) throw InvalidArgument("layer dims must be positive");
  }
  offsets_.assign(1, 0);
  for (std::size_t l = 0; l + 1 < dims_.size(); ++l) {
    offsets_.push_back(offsets_.back() +
                       static_cast<std::size_t>(dims_[l + 1]) * (dims_[l] + 1));
  }
  params_.assign(offsets_.back(), 0.0);
}

FeedForwardNet::FeedForwardNet(std::vector<int> layer_dims, Activation hidden,
                               std::uint64_t seed)
    : FeedForwardNet(std::move(layer_dims), hidden, ZeroInit{}) {
  Rng rng(seed);
  for (std::size_t l = 0; l + 1 < dims_.size(); ++l) {
    const int in = dims_[l];
    const int out = dims_[l + 1];
    const double limit = std::sqrt(6.0 / (in + out));
    double* w = params_.data() + offsets_[l];
    for (int i = 0; i < in * out; ++i) w[i] = rng.uniform(-limit, limit);
  }
}

void FeedForwardNet::zero_output_layer() {
  std::fill(params_.begin() + static_cast<std::ptrdiff_t>(offsets_[offsets_.size() - 2]),
            params_.end(), 0.0);
}

FeedForwardNet FeedForwardNet::zeros(std::vector<int> layer_dims, Activation hidden) {
  return FeedForwardNet(std::move(layer_dims), hidden, ZeroInit{});
}

void FeedForwardNet::check_input(std::size_t n) const {
  if (n != static_cast<std::size_t>(dims_.front())) {
    throw DimensionMismatch("network expects " + std::to_string(dims_.front()) +
                            " inputs, got " + std::to_string(n));
  }
}

void FeedForwardNet::forward(std::span<const double> x, Tape& tape) const {
  check_input(x.size());
  const std::size_t layers = dims_.size() - 1;
  tape.acts.resize(dims_.size());
  tape.acts[0].assign(x.begin(), x.end());
  for (std::size_t l = 0; l < layers; ++l) {
    const int in = dims_[l];
    const int out = dims_[l + 1];
    const double* w = params_.data() + offsets_[l];
    const double* b = w + static_cast<std::size_t>(in) * out;
    const std::vector<double>& a = tape.acts[l];
    std::vector<double>& z = tape.acts[l + 1];
    z.resize(out);
    for (int o = 0; o < out; ++o) {
      const double* row = w + static_cast<std::size_t>(o) * in;
      double s = b[o];
      for (int i = 0; i < in; ++i) s += row[i] * a[i];
      if (l + 1 < layers) {
        s = act_ == Activation::Tanh ? std::tanh(s) : (s > 0.0 ? s : 0.0);
      }
      z[o] = s;
    }
  }
}

std::vector<double> FeedForwardNet::forward(std::span<const double> x) const {
  Tape tape;
  forward(x, tape);
  return tape.acts.back();
}

double FeedForwardNet::forward_scalar(std::span<const double> x) const {
  if (dims_.back() != 1) throw DimensionMismatch("network output is not scalar");
  Tape tape;
  forward(x, tape);
  return tape.acts.back()[0];
}

void FeedForwardNet::backward(const Tape& tape, std::span<const double> upstream,
                              std::span<double> grads) const {
  if (upstream.size() != static_cast<std::size_t>(dims_.back())) {
    throw DimensionMismatch("upstream gradient has wrong length");
  }
  if (grads.size() != params_.size()) throw DimensionMismatch("gradient buffer has wrong length");
  if (tape.acts.size() != dims_.size()) throw InvalidArgument("tape does not match network");

  std::vector<double> delta(upstream.begin(), upstream.end());
  std::vector<double> prev;
  for (std::size_t l = dims_.size() - 1; l-- > 0;) {
    const int in = dims_[l];
    const int out = dims_[l + 1];
    const double* w = params_.data() + offsets_[l];
    double* gw = grads.data() + offsets_[l];
    double* gb = gw + static_cast<std::size_t>(in) * out;
    const std::vector<double>& a = tape.acts[l];
    for (int o = 0; o < out; ++o) {
      const double d = delta[o];
      if (d == 0.0) continue;
      double* grow = gw + static_cast<std::size_t>(o) * in;
      for (int i = 0; i < in; ++i) grow[i] += d * a[i];
      gb[o] += d;
    }
    if (l == 0) break;
    prev.assign(in, 0.0);
    for (int o = 0; o < out; ++o) {
      const double d = delta[o];
      if (d == 0.0) continue;
      const double* row = w + static_cast<std::size_t>(o) * in;
      for (int i = 0; i < in; ++i) prev[i] += row[i] * d;
    }
    for (int i = 0; i < in; ++i) {
      const double h = a[i];
      prev[i] *= act_ == Activation::Tanh ? 1.0 - h * h : (h > 0.0 ? 1.0 : 0.0);
    }
    delta.swap(prev);
  }
}

std::vector<double> FeedForwardNet::backward(const Tape& tape,
                                             std::span<const double> upstream) const {
  std::vector<double> grads(params_.size(), 0.0);
  backward(tape, upstream, grads);
  return grads;
}

void FeedForwardNet::save(std::ostream& out) const {
  out << "deus-mlp 1\n";
  out << "dims";
  for (int d : dims_) out << ' ' << d;
  out << "\nactivation " << to_string(act_) << "\nparams " << params_.size() << '\n';
  for (double p : params_) out << format_double(p) << '\n';
}

FeedForwardNet FeedForwardNet::load(std::istream& in) {
  auto expect = [&](const std::string& word) {
    std::string tok;
    if (!(in >> tok) || tok != word) throw FormatError("model file: expected '" + word + "'");
  };
  expect("deus-mlp");
  int version = 0;
  if (!(in >> version) || version != 1) throw FormatError("model file: unsupported version");
  expect("dims");
  std::string line;
  std::getline(in, line);
  std::vector<int> dims;
  {
    std::istringstream ls(line);
    int d = 0;
    while (ls >> d) dims.push_back(d);
  }
  expect("activation");
  std::string act;
  in >> act;
  expect("params");
  std::size_t n = 0;
  if (!(in >> n)) throw FormatError("model file: missing parameter count");
  FeedForwardNet net;
  try {
    net = FeedForwardNet(dims, activation_from_string(act), ZeroInit{});
  } catch (const InvalidArgument& e) {
    throw FormatError(std::string("model file: ") + e.what());
  }
  if (n != net.params_.size()) throw FormatError("model file: parameter count mismatch");
  for (auto& p : net.params_) {
    std::string tok;
    if (!(in >> tok)) throw FormatError("model file: truncated parameters");
    p = parse_double(tok);
  }
  return net;
}

const char* to_string(OptimizerKind k) {
  return k == OptimizerKind::Adam ? "adaptive_moment" : "sgd_momentum";
}

OptimizerKind optimizer_kind_from_string(const std::string& s) {
  if (s == "adaptive_moment" || s == "adam") return OptimizerKind::Adam;
  if (s == "sgd_momentum" || s == "sgd") return OptimizerKind::SgdMomentum;
  throw InvalidArgument("unknown optimizer: " + s);
}

Optimizer::Optimizer(OptimizerConfig cfg, std::size_t param_count)
    : cfg_(cfg), m_(param_count, 0.0) {
  if (!(cfg_.learning_rate > 0.0)) throw InvalidArgument("learning rate must be positive");
  if (cfg_.kind == OptimizerKind::Adam) v_.assign(param_count, 0.0);
}

void Optimizer::apply(FeedForwardNet& net, std::span<const double> grads) {
  auto params = net.params();
  if (grads.size() != params.size() || grads.size() != m_.size()) {
    throw DimensionMismatch("gradient shape does not match parameters");
  }
  for (double g : grads) {
    if (!std::isfinite(g)) throw NonFiniteGradient("non-finite gradient");
  }
  ++steps_;
  const double lr = cfg_.learning_rate;
  if (cfg_.kind == OptimizerKind::SgdMomentum) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_[i] = cfg_.momentum * m_[i] + grads[i];
      params[i] -= lr * m_[i];
    }
    return;
  }
  const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(steps_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * g;
    v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * g * g;
    params[i] -= lr * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + cfg_.epsilon);
  }
}

}  // namespace deus
