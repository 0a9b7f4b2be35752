#include "dfm/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "dfm/error.hpp"

namespace dfm {
namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

constexpr std::array<char, 8> kMagic{'D', 'F', 'M', 'C', 'K', 'P', 'T', '\0'};

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) throw InputDomainError("truncated checkpoint");
  return v;
}

}  // namespace

void write_checkpoint(std::ostream& out, const NetParams& params) {
  out.write(kMagic.data(), kMagic.size());
  put<std::uint32_t>(out, kCheckpointVersion);
  const NetShape& s = params.shape();
  for (int v : {s.data_dim, s.hidden, s.depth, s.mlp_hidden, s.num_classes, s.num_pitches, s.num_velocities}) {
    put<std::int32_t>(out, v);
  }
  put<std::uint64_t>(out, params.init_seed());
  const Layout& lay = params.layout();
  put<std::uint32_t>(out, static_cast<std::uint32_t>(lay.tensors.size()));
  for (const TensorInfo& t : lay.tensors) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.name.size()));
    out.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
    put<std::uint64_t>(out, t.rows);
    put<std::uint64_t>(out, t.cols);
    auto data = params.at(t.offset, t.size());
    out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size_bytes()));
  }
  if (!out) throw Error("failed writing checkpoint");
}

NetParams read_checkpoint(std::istream& in) {
  std::array<char, 8> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kMagic) throw InputDomainError("not a DFM checkpoint");
  const auto version = get<std::uint32_t>(in);
  if (version != kCheckpointVersion) {
    throw InputDomainError("unsupported checkpoint version " + std::to_string(version));
  }
  NetShape s;
  s.data_dim = get<std::int32_t>(in);
  s.hidden = get<std::int32_t>(in);
  s.depth = get<std::int32_t>(in);
  s.mlp_hidden = get<std::int32_t>(in);
  s.num_classes = get<std::int32_t>(in);
  s.num_pitches = get<std::int32_t>(in);
  s.num_velocities = get<std::int32_t>(in);
  const auto seed = get<std::uint64_t>(in);
  NetParams params(s, seed);
  const Layout& lay = params.layout();
  const auto count = get<std::uint32_t>(in);
  if (count != lay.tensors.size()) throw InputDomainError("checkpoint tensor count does not match its shape");
  for (const TensorInfo& t : lay.tensors) {
    const auto len = get<std::uint32_t>(in);
    std::string name(len, '\0');
    if (!in.read(name.data(), len)) throw InputDomainError("truncated checkpoint");
    const auto rows = get<std::uint64_t>(in);
    const auto cols = get<std::uint64_t>(in);
    if (name != t.name || rows != t.rows || cols != t.cols) {
      throw InputDomainError("checkpoint tensor '" + name + "' does not match expected '" + t.name + "'");
    }
    auto data = params.at(t.offset, t.size());
    if (!in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(data.size_bytes()))) {
      throw InputDomainError("truncated checkpoint");
    }
  }
  return params;
}

void save_checkpoint(const std::filesystem::path& path, const NetParams& params) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  write_checkpoint(out, params);
}

NetParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputDomainError("cannot open checkpoint " + path.string());
  return read_checkpoint(in);
}

}  // namespace dfm
