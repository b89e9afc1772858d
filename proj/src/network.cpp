#include "repinfo/network.hpp"

#include "repinfo/errors.hpp"
#include "repinfo/loss.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <string>

namespace repinfo {

namespace {

template <typename A, typename B>
bool same(const A& a, const B& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() && (a.size() == 0 || a == b);
}

std::string layer_name(std::size_t i, LayerKind kind) {
  return "layer " + std::to_string(i) + " (" + to_string(kind) + ")";
}

// Shared by the train, eval and frozen-mask forward passes. `mut` is null in
// eval mode; in train mode it aliases `state`.
ForwardTrace run_forward(NetworkState* mut, const NetworkState& state, const Matrix& inputs,
                         Mode mode, const ForwardTrace* frozen) {
  const auto& spec = state.spec;
  if (inputs.cols() != spec.input_dim) {
    throw ShapeError("input has " + std::to_string(inputs.cols()) + " columns, network expects " +
                     std::to_string(spec.input_dim));
  }
  if (inputs.rows() == 0) throw InputError("forward pass over zero rows");
  require_finite(inputs, "network input");

  ForwardTrace trace;
  trace.mode = mode;
  trace.input = inputs;
  trace.outputs.resize(spec.layers.size());
  trace.cache.resize(spec.layers.size());

  const auto n = static_cast<double>(inputs.rows());
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const LayerSpec& ls = spec.layers[i];
    const LayerParams& p = state.layers[i];
    const Matrix& in = i == 0 ? trace.input : trace.outputs[i - 1];
    Matrix& out = trace.outputs[i];
    LayerCache& cache = trace.cache[i];

    switch (ls.kind) {
      case LayerKind::affine:
        out.noalias() = in * p.weight;
        out.rowwise() += p.bias.row(0);
        break;
      case LayerKind::relu:
        out = in.cwiseMax(0.0);
        break;
      case LayerKind::leaky_relu:
        out = (in.array() > 0.0).select(in, ls.slope * in);
        break;
      case LayerKind::batch_norm:
        if (mode == Mode::train) {
          const RowVector mean = in.colwise().mean();
          Matrix centered = in.rowwise() - mean;
          const RowVector var = centered.array().square().colwise().mean().matrix();
          cache.inv_std = (var.array() + ls.eps).sqrt().inverse().matrix();
          cache.normalized = centered * cache.inv_std.asDiagonal();
          LayerParams& mp = mut->layers[i];
          const double unbias = inputs.rows() > 1 ? n / (n - 1.0) : 1.0;
          mp.running_mean = (1.0 - ls.stat_momentum) * mp.running_mean + ls.stat_momentum * mean;
          mp.running_var =
              (1.0 - ls.stat_momentum) * mp.running_var + (ls.stat_momentum * unbias) * var;
        } else {
          const RowVector inv_std = (p.running_var.array() + ls.eps).sqrt().inverse().matrix();
          cache.normalized = (in.rowwise() - p.running_mean) * inv_std.asDiagonal();
        }
        out = cache.normalized * p.weight.row(0).asDiagonal();
        out.rowwise() += p.bias.row(0);
        break;
      case LayerKind::dropout:
        if (mode == Mode::train && ls.drop_prob > 0.0) {
          if (frozen != nullptr) {
            cache.mask = frozen->cache.at(i).mask;
            if (cache.mask.rows() != in.rows() || cache.mask.cols() != in.cols()) {
              throw StateError("frozen dropout mask does not match " + layer_name(i, ls.kind));
            }
          } else {
            const double keep = 1.0 - ls.drop_prob;
            std::bernoulli_distribution draw(keep);
            cache.mask.resize(in.rows(), in.cols());
            for (Eigen::Index k = 0; k < cache.mask.size(); ++k) {
              cache.mask.data()[k] = draw(mut->rng) ? 1.0 / keep : 0.0;
            }
          }
          out = in.cwiseProduct(cache.mask);
        } else {
          out = in;
        }
        break;
    }
    require_finite(out, layer_name(i, ls.kind));
  }
  return trace;
}

}  // namespace

const char* to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::affine: return "affine";
    case LayerKind::relu: return "relu";
    case LayerKind::leaky_relu: return "leaky_relu";
    case LayerKind::batch_norm: return "batch_norm";
    case LayerKind::dropout: return "dropout";
  }
  return "?";
}

LayerSpec LayerSpec::affine(int out_width) {
  LayerSpec s;
  s.kind = LayerKind::affine;
  s.out_width = out_width;
  return s;
}

LayerSpec LayerSpec::relu() {
  LayerSpec s;
  s.kind = LayerKind::relu;
  return s;
}

LayerSpec LayerSpec::leaky_relu(double slope) {
  LayerSpec s;
  s.kind = LayerKind::leaky_relu;
  s.slope = slope;
  return s;
}

LayerSpec LayerSpec::batch_norm(double eps, double stat_momentum) {
  LayerSpec s;
  s.kind = LayerKind::batch_norm;
  s.eps = eps;
  s.stat_momentum = stat_momentum;
  return s;
}

LayerSpec LayerSpec::dropout(double drop_prob) {
  LayerSpec s;
  s.kind = LayerKind::dropout;
  s.drop_prob = drop_prob;
  return s;
}

void NetworkSpec::validate() const {
  if (input_dim < 1) throw ConfigError("network input_dim must be >= 1");
  if (output_classes < 1) throw ConfigError("network output_classes must be >= 1");
  if (layers.empty()) throw ConfigError("network has no layers");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const LayerSpec& l = layers[i];
    switch (l.kind) {
      case LayerKind::affine:
        if (l.out_width < 1) throw ConfigError(layer_name(i, l.kind) + ": out_width must be >= 1");
        break;
      case LayerKind::leaky_relu:
        if (!(l.slope > 0.0)) throw ConfigError(layer_name(i, l.kind) + ": slope must be > 0");
        break;
      case LayerKind::batch_norm:
        if (!(l.eps > 0.0)) throw ConfigError(layer_name(i, l.kind) + ": eps must be > 0");
        if (!(l.stat_momentum >= 0.0 && l.stat_momentum <= 1.0)) {
          throw ConfigError(layer_name(i, l.kind) + ": stat_momentum must be in [0,1]");
        }
        break;
      case LayerKind::dropout:
        if (!(l.drop_prob >= 0.0 && l.drop_prob < 1.0)) {
          throw ConfigError(layer_name(i, l.kind) + ": drop_prob must be in [0,1)");
        }
        break;
      case LayerKind::relu:
        break;
    }
  }
  const LayerSpec& last = layers.back();
  if (last.kind != LayerKind::affine || last.out_width != output_classes) {
    throw ConfigError("last layer must be affine with out_width = output_classes (" +
                      std::to_string(output_classes) + ")");
  }
}

int NetworkSpec::width_after(std::size_t index) const {
  int width = input_dim;
  for (std::size_t i = 0; i <= index && i < layers.size(); ++i) {
    if (layers[i].kind == LayerKind::affine) width = layers[i].out_width;
  }
  return width;
}

std::vector<std::size_t> NetworkSpec::representation_layers() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 1; i < layers.size(); ++i) {
    if (layers[i].kind == LayerKind::affine) out.push_back(i - 1);
  }
  return out;
}

NetworkSpec dense_relu_spec(int input_dim, std::span<const int> hidden, int classes) {
  NetworkSpec spec;
  spec.input_dim = input_dim;
  spec.output_classes = classes;
  for (int w : hidden) {
    spec.layers.push_back(LayerSpec::affine(w));
    spec.layers.push_back(LayerSpec::relu());
  }
  spec.layers.push_back(LayerSpec::affine(classes));
  return spec;
}

bool LayerParams::operator==(const LayerParams& o) const {
  return same(weight, o.weight) && same(bias, o.bias) && same(weight_velocity, o.weight_velocity) &&
         same(bias_velocity, o.bias_velocity) && same(running_mean, o.running_mean) &&
         same(running_var, o.running_var);
}

std::size_t NetworkState::parameter_count() const {
  std::size_t count = 0;
  for (const auto& p : layers) count += static_cast<std::size_t>(p.weight.size() + p.bias.size());
  return count;
}

void NetworkState::reset_velocity() {
  for (auto& p : layers) {
    p.weight_velocity.setZero();
    p.bias_velocity.setZero();
  }
}

bool NetworkState::operator==(const NetworkState& o) const {
  return spec == o.spec && layers == o.layers && rng == o.rng && epoch_counter == o.epoch_counter;
}

NetworkState init_network(const NetworkSpec& spec, std::uint64_t seed) {
  spec.validate();
  NetworkState state;
  state.spec = spec;
  state.rng.seed(seed);
  state.layers.resize(spec.layers.size());

  int width = spec.input_dim;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const LayerSpec& ls = spec.layers[i];
    LayerParams& p = state.layers[i];
    if (ls.kind == LayerKind::affine) {
      std::normal_distribution<double> gauss(0.0, std::sqrt(2.0 / width));
      p.weight.resize(width, ls.out_width);
      for (Eigen::Index k = 0; k < p.weight.size(); ++k) p.weight.data()[k] = gauss(state.rng);
      p.bias = Matrix::Zero(1, ls.out_width);
      width = ls.out_width;
    } else if (ls.kind == LayerKind::batch_norm) {
      p.weight = Matrix::Ones(1, width);
      p.bias = Matrix::Zero(1, width);
      p.running_mean = RowVector::Zero(width);
      p.running_var = RowVector::Ones(width);
    }
    if (p.has_params()) {
      p.weight_velocity = Matrix::Zero(p.weight.rows(), p.weight.cols());
      p.bias_velocity = Matrix::Zero(p.bias.rows(), p.bias.cols());
    }
  }
  return state;
}

ForwardTrace forward(NetworkState& state, const Matrix& inputs, Mode mode) {
  return run_forward(mode == Mode::train ? &state : nullptr, state, inputs, mode, nullptr);
}

ForwardTrace forward(const NetworkState& state, const Matrix& inputs) {
  return run_forward(nullptr, state, inputs, Mode::eval, nullptr);
}

ForwardTrace forward_frozen(NetworkState& state, const Matrix& inputs, const ForwardTrace& frozen) {
  if (frozen.cache.size() != state.spec.layers.size()) {
    throw StateError("frozen trace has a different layer count");
  }
  return run_forward(&state, state, inputs, Mode::train, &frozen);
}

Gradients backward(const NetworkState& state, const ForwardTrace& trace, std::span<const int> labels) {
  const auto& spec = state.spec;
  if (trace.mode != Mode::train) throw StateError("backward needs a train-mode trace");
  if (trace.outputs.size() != spec.layers.size() || trace.cache.size() != spec.layers.size() ||
      trace.input.cols() != spec.input_dim) {
    throw StateError("trace was not produced by this network");
  }
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    if (trace.outputs[i].cols() != spec.width_after(i)) {
      throw StateError("trace " + layer_name(i, spec.layers[i].kind) + " width mismatch");
    }
  }

  Gradients grads;
  grads.layers.resize(spec.layers.size());
  Matrix g = cross_entropy_bits_gradient(trace.logits(), labels);

  for (std::size_t i = spec.layers.size(); i-- > 0;) {
    const LayerSpec& ls = spec.layers[i];
    const LayerParams& p = state.layers[i];
    const Matrix& in = i == 0 ? trace.input : trace.outputs[i - 1];
    const LayerCache& cache = trace.cache[i];

    switch (ls.kind) {
      case LayerKind::affine: {
        grads.layers[i].weight.noalias() = in.transpose() * g;
        grads.layers[i].bias = g.colwise().sum();
        if (i > 0) {
          Matrix next;
          next.noalias() = g * p.weight.transpose();
          g = std::move(next);
        }
        break;
      }
      case LayerKind::relu:
        g = (in.array() > 0.0).select(g, 0.0);
        break;
      case LayerKind::leaky_relu:
        g = (in.array() > 0.0).select(g, ls.slope * g);
        break;
      case LayerKind::batch_norm: {
        const Matrix& xhat = cache.normalized;
        grads.layers[i].weight = g.cwiseProduct(xhat).colwise().sum();
        grads.layers[i].bias = g.colwise().sum();
        const Matrix dxhat = g * p.weight.row(0).asDiagonal();
        const RowVector mean_d = dxhat.colwise().mean();
        const RowVector mean_dx = dxhat.cwiseProduct(xhat).colwise().mean();
        Matrix dx = (dxhat.rowwise() - mean_d) - xhat * mean_dx.asDiagonal();
        g = dx * cache.inv_std.asDiagonal();
        break;
      }
      case LayerKind::dropout:
        if (cache.mask.size() > 0) g = g.cwiseProduct(cache.mask);
        break;
    }
  }
  return grads;
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError("learning_rate must be > 0");
  }
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (epochs < 0) throw ConfigError("epochs must be >= 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must be in [0,1)");
  if (!(anneal_factor > 0.0 && anneal_factor <= 1.0)) {
    throw ConfigError("anneal_factor must be in (0,1]");
  }
  if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be >= 0");
}

void sgd_step(NetworkState& state, const Gradients& grads, const TrainConfig& config, double lr) {
  if (grads.layers.size() != state.layers.size()) {
    throw StateError("gradient set has a different layer count");
  }
  struct Update {
    Matrix v, w;
  };
  std::vector<std::array<Update, 2>> staged(state.layers.size());
  for (std::size_t i = 0; i < state.layers.size(); ++i) {
    const LayerParams& p = state.layers[i];
    if (!p.has_params()) continue;
    const auto& gw = grads.layers[i].weight;
    const auto& gb = grads.layers[i].bias;
    if (gw.rows() != p.weight.rows() || gw.cols() != p.weight.cols() || gb.rows() != p.bias.rows() ||
        gb.cols() != p.bias.cols()) {
      throw ShapeError("gradient shape mismatch at layer " + std::to_string(i));
    }
    auto& [uw, ub] = staged[i];
    uw.v = config.momentum * p.weight_velocity + gw + config.weight_decay * p.weight;
    uw.w = p.weight - lr * uw.v;
    ub.v = config.momentum * p.bias_velocity + gb + config.weight_decay * p.bias;
    ub.w = p.bias - lr * ub.v;
    if (!uw.w.allFinite() || !ub.w.allFinite() || !uw.v.allFinite() || !ub.v.allFinite()) {
      throw NumericalError("non-finite parameter update at layer " + std::to_string(i));
    }
  }
  for (std::size_t i = 0; i < state.layers.size(); ++i) {
    LayerParams& p = state.layers[i];
    if (!p.has_params()) continue;
    auto& [uw, ub] = staged[i];
    p.weight_velocity = std::move(uw.v);
    p.weight = std::move(uw.w);
    p.bias_velocity = std::move(ub.v);
    p.bias = std::move(ub.w);
  }
}

double effective_lr(double base, double anneal_factor, std::uint64_t epoch) {
  return base * std::pow(anneal_factor, static_cast<double>(epoch));
}

EpochMetrics train_epoch(NetworkState& state, const LabeledSet& data, const TrainConfig& config) {
  config.validate();
  if (data.size() == 0) throw InputError("training on an empty dataset");
  if (data.inputs.rows() != static_cast<Eigen::Index>(data.size())) {
    throw ShapeError("dataset inputs and labels disagree in length");
  }

  std::vector<Eigen::Index> order(data.size());
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::shuffle(order.begin(), order.end(), state.rng);

  EpochMetrics m;
  m.lr = effective_lr(config.learning_rate, config.anneal_factor, state.epoch_counter);
  double loss_sum = 0.0;
  std::size_t correct = 0;

  const auto batch = static_cast<std::size_t>(config.batch_size);
  Matrix x;
  std::vector<int> y;
  std::size_t usable = order.size();
  if (config.drop_last && usable > batch) usable -= usable % batch;
  for (std::size_t start = 0; start < usable; start += batch) {
    const std::size_t end = std::min(usable, start + batch);
    x.resize(static_cast<Eigen::Index>(end - start), data.inputs.cols());
    y.resize(end - start);
    for (std::size_t k = start; k < end; ++k) {
      x.row(static_cast<Eigen::Index>(k - start)) = data.inputs.row(order[k]);
      y[k - start] = data.labels[order[k]];
    }
    ForwardTrace trace = forward(state, x, Mode::train);
    loss_sum += softmax_cross_entropy_bits(trace.logits(), y) * static_cast<double>(y.size());
    const auto pred = argmax_rows(trace.logits());
    for (std::size_t k = 0; k < y.size(); ++k) correct += pred[k] == y[k] ? 1 : 0;
    sgd_step(state, backward(state, trace, y), config, m.lr);
    ++m.steps;
  }
  m.loss_bits = loss_sum / static_cast<double>(usable);
  m.accuracy = static_cast<double>(correct) / static_cast<double>(usable);
  ++state.epoch_counter;
  return m;
}

Evaluation evaluate(const NetworkState& state, const LabeledSet& data) {
  if (data.size() == 0) throw InputError("evaluating on an empty dataset");
  constexpr Eigen::Index chunk = 4096;
  double loss_sum = 0.0;
  std::size_t correct = 0;
  const auto rows = data.inputs.rows();
  for (Eigen::Index start = 0; start < rows; start += chunk) {
    const Eigen::Index len = std::min(chunk, rows - start);
    const ForwardTrace trace = forward(state, Matrix(data.inputs.middleRows(start, len)));
    const std::span<const int> y(data.labels.data() + start, static_cast<std::size_t>(len));
    for (double v : cross_entropy_bits_rows(trace.logits(), y)) loss_sum += v;
    const auto pred = argmax_rows(trace.logits());
    for (Eigen::Index k = 0; k < len; ++k) correct += pred[k] == y[k] ? 1 : 0;
  }
  Evaluation e;
  e.accuracy = static_cast<double>(correct) / static_cast<double>(rows);
  e.loss_bits = loss_sum / static_cast<double>(rows);
  return e;
}

}  // namespace repinfo
