#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace deus {

enum class Activation { Tanh, Relu };

const char* to_string(Activation a);
Activation activation_from_string(const std::string& s);

// Fully connected network with a linear output layer. Parameters live in one
// flat vector: for each layer, the row-major weight matrix (out x in) followed
// by the bias vector.
class FeedForwardNet {
 public:
  // Keeps the inputs and post-activation values of one forward pass.
  struct Tape {
    std::vector<std::vector<double>> acts;
    std::span<const double> output() const { return acts.back(); }
  };

  FeedForwardNet() = default;
  // Glorot-uniform weights in +-sqrt(6 / (fan_in + fan_out)), zero biases.
  FeedForwardNet(std::vector<int> layer_dims, Activation hidden, std::uint64_t seed);
  static FeedForwardNet zeros(std::vector<int> layer_dims, Activation hidden);

  int input_dim() const { return dims_.front(); }
  int output_dim() const { return dims_.back(); }
  const std::vector<int>& layer_dims() const { return dims_; }
  Activation activation() const { return act_; }

  std::size_t param_count() const { return params_.size(); }
  // Zeroes the weights and bias of the last layer, so the net outputs 0.
  void zero_output_layer();
  std::span<const double> params() const { return params_; }
  std::span<double> params() { return params_; }

  // Throws DimensionMismatch when x has the wrong length.
  std::vector<double> forward(std::span<const double> x) const;
  double forward_scalar(std::span<const double> x) const;
  void forward(std::span<const double> x, Tape& tape) const;

  // Adds d(loss)/d(params) to grads given d(loss)/d(output) for the pass
  // recorded in tape.
  void backward(const Tape& tape, std::span<const double> upstream,
                std::span<double> grads) const;
  std::vector<double> backward(const Tape& tape, std::span<const double> upstream) const;

  void save(std::ostream& out) const;
  static FeedForwardNet load(std::istream& in);

  bool operator==(const FeedForwardNet&) const = default;

 private:
  struct ZeroInit {};
  FeedForwardNet(std::vector<int> layer_dims, Activation hidden, ZeroInit);
  void check_input(std::size_t n) const;

  std::vector<int> dims_{1, 1};
  Activation act_ = Activation::Tanh;
  std::vector<std::size_t> offsets_{0, 2};
  std::vector<double> params_ = std::vector<double>(2, 0.0);
};

enum class OptimizerKind { SgdMomentum, Adam };

const char* to_string(OptimizerKind k);
OptimizerKind optimizer_kind_from_string(const std::string& s);

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::Adam;
  double learning_rate = 1e-3;
  double momentum = 0.0;  // sgd_momentum
  double beta1 = 0.9;     // adam
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// First-order optimizer bound to one parameter vector shape.
class Optimizer {
 public:
  Optimizer(OptimizerConfig cfg, std::size_t param_count);

  // Throws NonFiniteGradient (leaving the net untouched) if any gradient is
  // NaN or infinite.
  void apply(FeedForwardNet& net, std::span<const double> grads);

  std::int64_t step_count() const { return steps_; }
  const OptimizerConfig& config() const { return cfg_; }

 private:
  OptimizerConfig cfg_;
  std::int64_t steps_ = 0;
  std::vector<double> m_;
  std::vector<double> v_;
};

}  // namespace deus
