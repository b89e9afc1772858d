#include "repinfo/checkerboard.hpp"

#include "repinfo/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>
#include <string>

namespace repinfo {

const char* to_string(LabelKind kind) {
  switch (kind) {
    case LabelKind::direction: return "direction";
    case LabelKind::color: return "color";
    case LabelKind::coarse: return "coarse";
  }
  return "?";
}

LabelKind parse_label_kind(std::string_view text) {
  if (text == "direction") return LabelKind::direction;
  if (text == "color") return LabelKind::color;
  if (text == "coarse") return LabelKind::coarse;
  throw InputError("unknown label kind '" + std::string(text) + "'");
}

void CBConfig::validate() const {
  if (n < 2) throw ConfigError("task.n must be >= 2");
  if (num_samples < 1) throw ConfigError("task.num_samples must be >= 1");
  if (!(noise_std >= 0.0) || !std::isfinite(noise_std)) {
    throw ConfigError("task.noise_std must be >= 0");
  }
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw ConfigError("task.train_fraction must be in (0,1)");
  }
  if (coarse_groups && (*coarse_groups < 1 || n % *coarse_groups != 0)) {
    throw ConfigError("task.coarse_groups must divide n");
  }
}

int CBConfig::classes(LabelKind kind) const {
  if (kind != LabelKind::coarse) return n;
  if (!coarse_groups) throw ConfigError("coarse labels need task.coarse_groups");
  return *coarse_groups;
}

int Sample::label(LabelKind kind) const {
  switch (kind) {
    case LabelKind::direction: return direction;
    case LabelKind::color: return color;
    case LabelKind::coarse:
      if (coarse < 0) throw InputError("sample has no coarse label");
      return coarse;
  }
  return -1;
}

LabeledSet Dataset::labeled(const std::vector<std::size_t>& indices, LabelKind kind) const {
  LabeledSet out;
  out.classes = config.classes(kind);
  const int dim = input_dim(config.n);
  out.inputs.resize(static_cast<Eigen::Index>(indices.size()), dim);
  out.labels.resize(indices.size());
  for (std::size_t r = 0; r < indices.size(); ++r) {
    const Sample& s = samples.at(indices[r]);
    out.inputs.row(static_cast<Eigen::Index>(r)) =
        Eigen::Map<const RowVector>(s.input.data(), dim);
    out.labels[r] = s.label(kind);
  }
  return out;
}

LabeledSet Dataset::labeled_all(LabelKind kind) const {
  std::vector<std::size_t> all(samples.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  return labeled(all, kind);
}

int input_dim(int n) {
  if (n < 2) throw InputError("checkerboard needs n >= 2, got " + std::to_string(n));
  return n * n + n;
}

int coarse_label(int direction, int groups, int n) {
  if (groups < 1 || n % groups != 0) {
    throw InputError(std::to_string(groups) + " does not divide n = " + std::to_string(n));
  }
  if (direction < 0 || direction >= n) throw InputError("direction out of range");
  return direction % groups;
}

Sample make_sample(const std::vector<int>& permutation, int checkerboard_color, double noise_std,
                   std::optional<int> coarse_groups, Rng& rng) {
  const int n = static_cast<int>(permutation.size());
  Sample s;
  s.permutation = permutation;
  s.color = checkerboard_color;
  s.input.assign(static_cast<std::size_t>(input_dim(n)), 0.0);
  s.direction = -1;
  for (int pos = 0; pos < n; ++pos) {
    s.input[static_cast<std::size_t>(pos * n + permutation[pos])] = 1.0;
    if (permutation[pos] == checkerboard_color) s.direction = pos;
  }
  if (s.direction < 0) throw InputError("checkerboard colour missing from target permutation");
  double* board = s.input.data() + n * n;
  board[checkerboard_color] = 1.0;
  if (noise_std > 0.0) {
    std::normal_distribution<double> noise(0.0, noise_std);
    for (int k = 0; k < n; ++k) board[k] += noise(rng);
  }
  if (coarse_groups) s.coarse = coarse_label(s.direction, *coarse_groups, n);
  return s;
}

std::vector<Sample> draw_samples(const CBConfig& config, std::size_t count, std::uint64_t seed) {
  config.validate();
  Rng rng(seed);
  std::uniform_int_distribution<int> pick_color(0, config.n - 1);
  std::vector<int> perm(static_cast<std::size_t>(config.n));
  std::vector<Sample> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    const int color = pick_color(rng);
    out.push_back(make_sample(perm, color, config.noise_std, config.coarse_groups, rng));
  }
  return out;
}

Dataset generate(const CBConfig& config) {
  config.validate();
  Dataset d;
  d.config = config;
  d.samples = draw_samples(config, static_cast<std::size_t>(config.num_samples), config.seed);
  split(d, config.train_fraction, derive_seed(config.seed, 0x73706c6974ULL));
  return d;
}

void split(Dataset& dataset, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw InputError("train fraction must be in (0,1)");
  }
  const std::size_t total = dataset.samples.size();
  const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(total)));
  if (n_train == 0 || n_train >= total) {
    throw InputError("train fraction " + std::to_string(train_fraction) + " leaves an empty split of " +
                     std::to_string(total) + " samples");
  }
  std::vector<std::size_t> order(total);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  dataset.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  dataset.validation.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
  std::sort(dataset.train.begin(), dataset.train.end());
  std::sort(dataset.validation.begin(), dataset.validation.end());
  dataset.config.train_fraction = train_fraction;
}

void write_csv(std::ostream& out, const Dataset& dataset) {
  const int dim = input_dim(dataset.config.n);
  out << "sample_id,direction,color,coarse";
  for (int k = 0; k < dim; ++k) out << ",x_" << k;
  out << '\n';
  char buf[32];
  for (std::size_t i = 0; i < dataset.samples.size(); ++i) {
    const Sample& s = dataset.samples[i];
    out << i << ',' << s.direction << ',' << s.color << ',' << s.coarse;
    for (double v : s.input) {
      std::snprintf(buf, sizeof buf, ",%.17g", v);
      out << buf;
    }
    out << '\n';
  }
}

}  // namespace repinfo
