#include "repinfo/checkpoint.hpp"

#include "repinfo/errors.hpp"

#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace repinfo {

namespace {

constexpr char kMagic[4] = {'R', 'P', 'N', 'S'};

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) throw InputError("truncated checkpoint");
  return v;
}

template <typename M>
void put_matrix(std::ostream& out, const M& m) {
  put<std::uint64_t>(out, static_cast<std::uint64_t>(m.rows()));
  put<std::uint64_t>(out, static_cast<std::uint64_t>(m.cols()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) put<double>(out, m(r, c));
  }
}

template <typename M>
void get_matrix(std::istream& in, M& m) {
  const auto rows = get<std::uint64_t>(in);
  const auto cols = get<std::uint64_t>(in);
  if (rows > (1u << 24) || cols > (1u << 24)) throw InputError("corrupt checkpoint matrix shape");
  m.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = get<double>(in);
  }
}

}  // namespace

void write_state(std::ostream& out, const NetworkState& state) {
  out.write(kMagic, 4);
  put<std::uint32_t>(out, kCheckpointVersion);

  const NetworkSpec& spec = state.spec;
  put<std::int32_t>(out, spec.input_dim);
  put<std::int32_t>(out, spec.output_classes);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(spec.layers.size()));
  for (const LayerSpec& l : spec.layers) {
    put<std::uint8_t>(out, static_cast<std::uint8_t>(l.kind));
    put<std::int32_t>(out, l.out_width);
    put<double>(out, l.slope);
    put<double>(out, l.eps);
    put<double>(out, l.stat_momentum);
    put<double>(out, l.drop_prob);
  }
  for (const LayerParams& p : state.layers) {
    put_matrix(out, p.weight);
    put_matrix(out, p.bias);
    put_matrix(out, p.weight_velocity);
    put_matrix(out, p.bias_velocity);
    put_matrix(out, p.running_mean);
    put_matrix(out, p.running_var);
  }
  put<std::uint64_t>(out, state.epoch_counter);
  std::ostringstream rng_text;
  rng_text << state.rng;
  const std::string s = rng_text.str();
  put<std::uint64_t>(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

NetworkState read_state(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) {
    throw InputError("not a network checkpoint");
  }
  const auto version = get<std::uint32_t>(in);
  if (version != kCheckpointVersion) {
    throw InputError("unsupported checkpoint version " + std::to_string(version));
  }

  NetworkState state;
  state.spec.input_dim = get<std::int32_t>(in);
  state.spec.output_classes = get<std::int32_t>(in);
  const auto count = get<std::uint32_t>(in);
  if (count > 4096) throw InputError("corrupt checkpoint layer count");
  state.spec.layers.resize(count);
  for (LayerSpec& l : state.spec.layers) {
    const auto kind = get<std::uint8_t>(in);
    if (kind > static_cast<std::uint8_t>(LayerKind::dropout)) throw InputError("unknown layer kind");
    l.kind = static_cast<LayerKind>(kind);
    l.out_width = get<std::int32_t>(in);
    l.slope = get<double>(in);
    l.eps = get<double>(in);
    l.stat_momentum = get<double>(in);
    l.drop_prob = get<double>(in);
  }
  state.spec.validate();
  state.layers.resize(count);
  for (LayerParams& p : state.layers) {
    get_matrix(in, p.weight);
    get_matrix(in, p.bias);
    get_matrix(in, p.weight_velocity);
    get_matrix(in, p.bias_velocity);
    get_matrix(in, p.running_mean);
    get_matrix(in, p.running_var);
  }
  state.epoch_counter = get<std::uint64_t>(in);
  const auto len = get<std::uint64_t>(in);
  if (len > (1u << 20)) throw InputError("corrupt checkpoint rng state");
  std::string s(len, '\0');
  if (!in.read(s.data(), static_cast<std::streamsize>(len))) throw InputError("truncated checkpoint");
  std::istringstream rng_text(s);
  rng_text >> state.rng;
  if (!rng_text) throw InputError("corrupt checkpoint rng state");
  return state;
}

void save_state(const std::filesystem::path& path, const NetworkState& state) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(path.string(), "cannot open for writing");
  write_state(out, state);
  if (!out) throw IoError(path.string(), "write failed");
}

NetworkState load_state(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path.string(), "cannot open for reading");
  return read_state(in);
}

}  // namespace repinfo
