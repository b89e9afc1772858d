#pragma once

#include "repinfo/checkerboard.hpp"
#include "repinfo/network.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace repinfo {

/// Decoder q(y|z): per hidden width an affine -> batch-norm -> leaky-ReLU ->
/// dropout block, then an affine head. Trained with plain SGD.
struct ProbeConfig {
  std::vector<int> hidden{128, 64, 32};
  double leaky_slope = 0.2;
  double drop_prob = 0.7;
  bool batch_norm = true;
  int epochs = 100;
  double learning_rate = 0.05;
  int batch_size = 32;
  int train_samples = 1250;
  int test_samples = 3750;
  std::uint64_t seed = 0;

  void validate() const;
  NetworkSpec decoder_spec(int input_width, int classes) const;
  bool operator==(const ProbeConfig&) const = default;
};

/// A layer's eval-mode output on a batch of task samples, with every label.
struct ActivationMatrix {
  int layer_index = 0;
  int epoch = 0;
  Matrix values;
  std::vector<int> direction, color, coarse;

  std::vector<int> labels(LabelKind kind) const;
};

struct InfoEstimate {
  double h_y = 0.0;
  double ce_test = 0.0;
  double iu_raw = 0.0;  // h_y - ce_test; negative when the decoder overfits
  double iu = 0.0;      // max(iu_raw, 0)
  LabelKind label_kind = LabelKind::direction;
  int layer_index = 0;
  int epoch = 0;
  std::uint64_t probe_seed = 0;

  bool operator==(const InfoEstimate&) const = default;
};

struct ProbeState {
  NetworkState decoder;
};

/// -sum p log2 p with 0 log 0 = 0. Throws InputError unless p >= 0 and
/// sums to 1 within 1e-9.
double entropy_bits(std::span<const double> probabilities);

std::vector<double> uniform_marginal(int classes);

/// Eval-mode activations of hidden representation `layer_index` (see
/// NetworkSpec::representation_layers) on `samples`.
ActivationMatrix capture_activations(const NetworkState& state, const std::vector<Sample>& samples,
                                     int layer_index, int epoch = 0);

/// Trains on the first config.train_samples rows of (z, labels).
ProbeState train_probe(const Matrix& z, std::span<const int> labels, int classes,
                       const ProbeConfig& config);
ProbeState train_probe(const ActivationMatrix& acts, LabelKind kind, int classes,
                       const ProbeConfig& config);

/// ce_test is the eval-mode mean cross-entropy in bits over (z, labels);
/// h_y comes from the known class marginal. label_kind/layer/epoch are left
/// for the caller to fill.
InfoEstimate estimate_usable_info(const ProbeState& probe, const Matrix& z,
                                  std::span<const int> labels, std::span<const double> class_marginal);

}  // namespace repinfo
