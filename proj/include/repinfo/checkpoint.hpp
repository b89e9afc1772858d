#pragma once

#include "repinfo/network.hpp"

#include <filesystem>
#include <iosfwd>

namespace repinfo {

// Binary checkpoint, little-endian host layout:
//   "RPNS" | u32 version | spec | per-layer matrices (row-major f64) |
//   running stats | velocities | u64 epoch_counter | rng state (text, length-prefixed)
inline constexpr std::uint32_t kCheckpointVersion = 1;

void write_state(std::ostream& out, const NetworkState& state);
NetworkState read_state(std::istream& in);

void save_state(const std::filesystem::path& path, const NetworkState& state);
NetworkState load_state(const std::filesystem::path& path);

}  // namespace repinfo
