#include "repinfo/probe.hpp"

#include "repinfo/errors.hpp"
#include "repinfo/loss.hpp"

#include <cmath>
#include <string>

namespace repinfo {

void ProbeConfig::validate() const {
  if (hidden.empty()) throw ConfigError("probe.hidden must be nonempty");
  for (int w : hidden) {
    if (w < 1) throw ConfigError("probe.hidden widths must be >= 1");
  }
  if (!(leaky_slope > 0.0)) throw ConfigError("probe.leaky_slope must be > 0");
  if (!(drop_prob >= 0.0 && drop_prob < 1.0)) throw ConfigError("probe.drop_prob must be in [0,1)");
  if (epochs < 1) throw ConfigError("probe.epochs must be >= 1");
  if (!(learning_rate > 0.0)) throw ConfigError("probe.learning_rate must be > 0");
  if (batch_size < 1) throw ConfigError("probe.batch_size must be >= 1");
  if (train_samples < 1) throw ConfigError("probe.train_samples must be >= 1");
  if (test_samples < 1) throw ConfigError("probe.test_samples must be >= 1");
}

NetworkSpec ProbeConfig::decoder_spec(int input_width, int classes) const {
  NetworkSpec spec;
  spec.input_dim = input_width;
  spec.output_classes = classes;
  for (int w : hidden) {
    spec.layers.push_back(LayerSpec::affine(w));
    if (batch_norm) spec.layers.push_back(LayerSpec::batch_norm());
    spec.layers.push_back(LayerSpec::leaky_relu(leaky_slope));
    if (drop_prob > 0.0) spec.layers.push_back(LayerSpec::dropout(drop_prob));
  }
  spec.layers.push_back(LayerSpec::affine(classes));
  return spec;
}

std::vector<int> ActivationMatrix::labels(LabelKind kind) const {
  switch (kind) {
    case LabelKind::direction: return direction;
    case LabelKind::color: return color;
    case LabelKind::coarse:
      for (int c : coarse) {
        if (c < 0) throw InputError("activations carry no coarse labels");
      }
      return coarse;
  }
  return {};
}

double entropy_bits(std::span<const double> probabilities) {
  if (probabilities.empty()) throw InputError("entropy of an empty distribution");
  double total = 0.0;
  double h = 0.0;
  for (double p : probabilities) {
    if (!(p >= 0.0) || !std::isfinite(p)) throw InputError("probabilities must be finite and >= 0");
    total += p;
    if (p > 0.0) h -= p * std::log2(p);
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw InputError("probabilities sum to " + std::to_string(total) + ", not 1");
  }
  return h;
}

std::vector<double> uniform_marginal(int classes) {
  if (classes < 1) throw InputError("marginal needs at least one class");
  return std::vector<double>(static_cast<std::size_t>(classes), 1.0 / classes);
}

ActivationMatrix capture_activations(const NetworkState& state, const std::vector<Sample>& samples,
                                     int layer_index, int epoch) {
  const auto reps = state.spec.representation_layers();
  if (layer_index < 0 || static_cast<std::size_t>(layer_index) >= reps.size()) {
    throw InputError("layer index " + std::to_string(layer_index) + " outside [0, " +
                     std::to_string(reps.size()) + ")");
  }
  if (samples.empty()) throw InputError("no samples to capture");

  Matrix x(static_cast<Eigen::Index>(samples.size()), state.spec.input_dim);
  ActivationMatrix acts;
  acts.layer_index = layer_index;
  acts.epoch = epoch;
  for (std::size_t r = 0; r < samples.size(); ++r) {
    const Sample& s = samples[r];
    if (static_cast<Eigen::Index>(s.input.size()) != x.cols()) {
      throw ShapeError("sample width does not match the network input");
    }
    x.row(static_cast<Eigen::Index>(r)) = Eigen::Map<const RowVector>(s.input.data(), x.cols());
    acts.direction.push_back(s.direction);
    acts.color.push_back(s.color);
    acts.coarse.push_back(s.coarse);
  }
  ForwardTrace trace = forward(state, x);
  acts.values = std::move(trace.outputs[reps[static_cast<std::size_t>(layer_index)]]);
  return acts;
}

ProbeState train_probe(const Matrix& z, std::span<const int> labels, int classes,
                       const ProbeConfig& config) {
  config.validate();
  if (classes < 2) throw InputError("a probe needs at least 2 classes");
  if (static_cast<std::size_t>(z.rows()) != labels.size()) {
    throw InputError("activation rows and labels disagree in length");
  }
  if (z.rows() < config.train_samples) {
    throw InputError("probe needs " + std::to_string(config.train_samples) + " training rows, got " +
                     std::to_string(z.rows()));
  }
  if (z.cols() < 1) throw InputError("probe input has zero width");

  LabeledSet data;
  data.classes = classes;
  data.inputs = z.topRows(config.train_samples);
  data.labels.assign(labels.begin(), labels.begin() + config.train_samples);

  TrainConfig tc;
  tc.learning_rate = config.learning_rate;
  tc.batch_size = config.batch_size;
  tc.epochs = config.epochs;
  tc.drop_last = true;

  ProbeState probe{init_network(config.decoder_spec(static_cast<int>(z.cols()), classes), config.seed)};
  for (int e = 0; e < config.epochs; ++e) train_epoch(probe.decoder, data, tc);
  return probe;
}

ProbeState train_probe(const ActivationMatrix& acts, LabelKind kind, int classes,
                       const ProbeConfig& config) {
  const auto y = acts.labels(kind);
  return train_probe(acts.values, y, classes, config);
}

InfoEstimate estimate_usable_info(const ProbeState& probe, const Matrix& z,
                                  std::span<const int> labels, std::span<const double> class_marginal) {
  if (z.rows() == 0 || labels.empty()) throw InputError("usable information needs test rows");
  if (z.cols() != probe.decoder.spec.input_dim) {
    throw InputError("test activations have width " + std::to_string(z.cols()) + ", probe expects " +
                     std::to_string(probe.decoder.spec.input_dim));
  }
  if (static_cast<int>(class_marginal.size()) != probe.decoder.spec.output_classes) {
    throw InputError("class marginal size does not match the probe's classes");
  }
  LabeledSet test;
  test.inputs = z;
  test.labels.assign(labels.begin(), labels.end());
  test.classes = probe.decoder.spec.output_classes;

  InfoEstimate est;
  est.h_y = entropy_bits(class_marginal);
  est.ce_test = evaluate(probe.decoder, test).loss_bits;
  est.iu_raw = est.h_y - est.ce_test;
  est.iu = std::max(est.iu_raw, 0.0);
  return est;
}

}  // namespace repinfo
