#pragma once

#include "repinfo/tensor.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace repinfo {

enum class LayerKind : std::uint8_t { affine, relu, leaky_relu, batch_norm, dropout };

const char* to_string(LayerKind kind);

struct LayerSpec {
  LayerKind kind = LayerKind::affine;
  int out_width = 0;            // affine
  double slope = 0.0;           // leaky_relu
  double eps = 1e-5;            // batch_norm
  double stat_momentum = 0.1;   // batch_norm
  double drop_prob = 0.0;       // dropout

  static LayerSpec affine(int out_width);
  static LayerSpec relu();
  static LayerSpec leaky_relu(double slope);
  static LayerSpec batch_norm(double eps = 1e-5, double stat_momentum = 0.1);
  static LayerSpec dropout(double drop_prob);

  bool operator==(const LayerSpec&) const = default;
};

struct NetworkSpec {
  int input_dim = 0;
  std::vector<LayerSpec> layers;
  int output_classes = 0;

  /// Throws ConfigError unless the last layer is affine(output_classes) and
  /// every layer's own parameters are in range.
  void validate() const;

  /// Width of the output of layer `index`.
  int width_after(std::size_t index) const;

  /// Positions (into `layers`) of the hidden representations Z_0, Z_1, ...:
  /// the last layer before each affine except the first. A network with k
  /// affine layers has k-1 representations.
  std::vector<std::size_t> representation_layers() const;

  bool operator==(const NetworkSpec&) const = default;
};

/// affine(w)+relu per hidden width, then affine(classes).
NetworkSpec dense_relu_spec(int input_dim, std::span<const int> hidden, int classes);

enum class Mode : std::uint8_t { train, eval };

/// Parameters of one layer. Affine layers use weight (in x out) and bias
/// (1 x out); batch-norm uses weight as the per-feature scale and bias as the
/// shift (both 1 x C) plus running statistics. Other layers leave all empty.
struct LayerParams {
  Matrix weight, bias;
  Matrix weight_velocity, bias_velocity;
  RowVector running_mean, running_var;

  bool has_params() const { return weight.size() > 0; }
  bool operator==(const LayerParams&) const;
};

struct NetworkState {
  NetworkSpec spec;
  std::vector<LayerParams> layers;
  Rng rng;
  std::uint64_t epoch_counter = 0;

  std::size_t parameter_count() const;
  /// Zeroes every velocity buffer (used at the pretraining switch).
  void reset_velocity();

  bool operator==(const NetworkState&) const;
};

struct Gradients {
  struct Pair {
    Matrix weight, bias;
  };
  std::vector<Pair> layers;
};

struct LayerCache {
  Matrix mask;        // dropout: keep mask already scaled by 1/(1-p)
  Matrix normalized;  // batch_norm: x_hat
  RowVector inv_std;  // batch_norm: 1/sqrt(var + eps)
};

struct ForwardTrace {
  Mode mode = Mode::eval;
  Matrix input;
  std::vector<Matrix> outputs;  // post-layer output, one per LayerSpec
  std::vector<LayerCache> cache;

  const Matrix& logits() const { return outputs.back(); }
};

/// Gaussian N(0, 2/fan_in) weights, zero biases, unit batch-norm scale,
/// running mean 0 / var 1, zero velocities. Deterministic in (spec, seed).
NetworkState init_network(const NetworkSpec& spec, std::uint64_t seed);

/// Train mode normalizes with batch statistics (updating the running ones)
/// and samples inverted-dropout masks from state.rng.
ForwardTrace forward(NetworkState& state, const Matrix& inputs, Mode mode);
/// Eval-mode forward; never touches the state.
ForwardTrace forward(const NetworkState& state, const Matrix& inputs);
/// Train-mode forward that reuses the dropout masks recorded in `frozen`
/// instead of sampling new ones. Used by finite-difference checks.
ForwardTrace forward_frozen(NetworkState& state, const Matrix& inputs, const ForwardTrace& frozen);

/// Gradients of softmax_cross_entropy_bits(trace.logits(), labels).
Gradients backward(const NetworkState& state, const ForwardTrace& trace, std::span<const int> labels);

struct TrainConfig {
  double learning_rate = 0.05;
  int batch_size = 32;
  int epochs = 100;
  double momentum = 0.0;
  double anneal_factor = 1.0;
  double weight_decay = 0.0;
  // Skip a trailing partial minibatch (when at least one full batch exists).
  // Batch-norm statistics from a handful of rows are unusable.
  bool drop_last = false;

  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

/// v <- momentum*v + g + weight_decay*w ; w <- w - lr*v. Commits nothing if
/// any updated value would be non-finite.
void sgd_step(NetworkState& state, const Gradients& grads, const TrainConfig& config, double lr);

/// base * anneal_factor^epoch
double effective_lr(double base, double anneal_factor, std::uint64_t epoch);

struct LabeledSet {
  Matrix inputs;
  std::vector<int> labels;
  int classes = 0;

  std::size_t size() const { return labels.size(); }
};

struct EpochMetrics {
  double loss_bits = 0.0;
  double accuracy = 0.0;
  double lr = 0.0;
  std::size_t steps = 0;
};

/// One shuffled pass in minibatches; shuffling and dropout draw from
/// state.rng. Increments state.epoch_counter.
EpochMetrics train_epoch(NetworkState& state, const LabeledSet& data, const TrainConfig& config);

struct Evaluation {
  double accuracy = 0.0;
  double loss_bits = 0.0;
};

Evaluation evaluate(const NetworkState& state, const LabeledSet& data);

}  // namespace repinfo
