#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <random>
#include <string>

namespace repinfo {

/// Dense row-major matrix; rows are samples, columns are features.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::Matrix<double, 1, Eigen::Dynamic>;

/// The one generator type used everywhere. Seeded explicitly, never from a clock.
using Rng = std::mt19937_64;

/// Throws NumericalError if any entry of `m` is NaN or infinite.
void require_finite(const Matrix& m, const std::string& where);

/// splitmix64 finalizer; used to derive independent seed streams.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Order-sensitive combination of a seed with any number of tags.
template <typename... Tags>
constexpr std::uint64_t derive_seed(std::uint64_t seed, Tags... tags) {
  std::uint64_t h = mix64(seed);
  ((h = mix64(h ^ static_cast<std::uint64_t>(tags))), ...);
  return h;
}

}  // namespace repinfo
