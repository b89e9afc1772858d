#pragma once

#include "repinfo/network.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string_view>
#include <vector>

namespace repinfo {

/// Which label of a checkerboard sample a network or probe is fit to.
enum class LabelKind : std::uint8_t { direction, color, coarse };

const char* to_string(LabelKind kind);
/// Throws InputError on anything other than direction|color|coarse.
LabelKind parse_label_kind(std::string_view text);

struct CBConfig {
  int n = 2;
  int num_samples = 10000;
  double noise_std = 0.1;
  std::uint64_t seed = 0;
  double train_fraction = 0.9;
  std::optional<int> coarse_groups;

  void validate() const;
  int classes(LabelKind kind) const;
  bool operator==(const CBConfig&) const = default;
};

struct Sample {
  // n target blocks (n-way one-hot colour each), then the noisy n-way
  // checkerboard block.
  std::vector<double> input;
  int direction = 0;
  int color = 0;
  int coarse = -1;               // -1 when the config has no coarse grouping
  std::vector<int> permutation;  // permutation[position] = colour of that target

  int label(LabelKind kind) const;
};

struct Dataset {
  CBConfig config;
  std::vector<Sample> samples;
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;

  /// Stacks the rows at `indices` into a LabeledSet for the given label.
  LabeledSet labeled(const std::vector<std::size_t>& indices, LabelKind kind) const;
  LabeledSet labeled_all(LabelKind kind) const;
};

/// n^2 + n. Throws InputError for n < 2.
int input_dim(int n);

/// direction mod groups. Throws InputError unless groups divides n.
int coarse_label(int direction, int groups, int n);

/// Builds one sample from an explicit target permutation and checkerboard
/// colour; noise is drawn from `rng` only when noise_std > 0.
Sample make_sample(const std::vector<int>& permutation, int checkerboard_color, double noise_std,
                   std::optional<int> coarse_groups, Rng& rng);

/// `count` iid samples of the task described by `config` (its num_samples and
/// seed are ignored), drawn from a generator seeded with `seed`.
std::vector<Sample> draw_samples(const CBConfig& config, std::size_t count, std::uint64_t seed);

/// config.num_samples samples split train/validation; deterministic in config.
Dataset generate(const CBConfig& config);

/// Uniformly random disjoint split with |train| = round(fraction * size).
void split(Dataset& dataset, double train_fraction, std::uint64_t seed);

/// Header: sample_id,direction,color,coarse,x_0..x_{n^2+n-1}. coarse is -1
/// without a grouping.
void write_csv(std::ostream& out, const Dataset& dataset);

}  // namespace repinfo
