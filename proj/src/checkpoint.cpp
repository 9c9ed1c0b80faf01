#include "emoreact/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

namespace emoreact {
namespace {

constexpr std::array<char, 8> k_magic = {'E', 'M', 'R', 'C', 'K', 'P', 'T', '\0'};
constexpr std::uint64_t k_max_elements = std::uint64_t{1} << 36;

template <typename T>
void put_le(std::ostream& out, T value) {
  std::array<unsigned char, sizeof(T)> bytes{};
  if constexpr (std::is_floating_point_v<T>) {
    using Bits = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
    put_le(out, std::bit_cast<Bits>(value));
    return;
  } else {
    for (std::size_t i = 0; i < sizeof(T); ++i) bytes[i] = static_cast<unsigned char>((value >> (8 * i)) & 0xFFu);
  }
  out.write(reinterpret_cast<const char*>(bytes.data()), bytes.size());
}

template <typename T>
T get_le(std::istream& in) {
  if constexpr (std::is_floating_point_v<T>) {
    using Bits = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
    return std::bit_cast<T>(get_le<Bits>(in));
  } else {
    std::array<unsigned char, sizeof(T)> bytes{};
    if (!in.read(reinterpret_cast<char*>(bytes.data()), bytes.size())) throw CheckpointError("truncated checkpoint");
    T value = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) value |= static_cast<T>(bytes[i]) << (8 * i);
    return value;
  }
}

}  // namespace

void write_checkpoint(std::ostream& out, const std::vector<NamedTensor>& tensors) {
  out.write(k_magic.data(), k_magic.size());
  put_le<std::uint32_t>(out, k_checkpoint_version);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& t : tensors) {
    std::uint64_t elements = 1;
    for (auto d : t.shape) elements *= d;
    if (elements != t.values.size()) throw CheckpointError("tensor '" + t.name + "' has inconsistent shape");
    if (t.dtype != 1 && t.dtype != 2) throw CheckpointError("tensor '" + t.name + "' has unknown dtype");
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(t.name.size()));
    out.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
    put_le<std::uint8_t>(out, t.dtype);
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(t.shape.size()));
    for (auto d : t.shape) put_le<std::uint64_t>(out, d);
    for (double v : t.values) {
      if (t.dtype == 1) put_le<float>(out, static_cast<float>(v));
      else put_le<double>(out, v);
    }
  }
  if (!out) throw CheckpointError("failed writing checkpoint");
}

std::vector<NamedTensor> read_checkpoint(std::istream& in) {
  std::array<char, 8> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != k_magic) throw CheckpointError("not a checkpoint file");
  const auto version = get_le<std::uint32_t>(in);
  if (version != k_checkpoint_version) {
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  }
  const auto count = get_le<std::uint32_t>(in);
  std::vector<NamedTensor> tensors;
  for (std::uint32_t k = 0; k < count; ++k) {
    NamedTensor t;
    const auto name_len = get_le<std::uint32_t>(in);
    if (name_len > 4096) throw CheckpointError("implausible tensor name length");
    t.name.resize(name_len);
    if (!in.read(t.name.data(), name_len)) throw CheckpointError("truncated checkpoint");
    t.dtype = get_le<std::uint8_t>(in);
    if (t.dtype != 1 && t.dtype != 2) throw CheckpointError("tensor '" + t.name + "' has unknown dtype");
    const auto rank = get_le<std::uint32_t>(in);
    if (rank > 8) throw CheckpointError("implausible tensor rank");
    std::uint64_t elements = 1;
    for (std::uint32_t r = 0; r < rank; ++r) {
      t.shape.push_back(get_le<std::uint64_t>(in));
      elements *= t.shape.back();
      if (elements > k_max_elements) throw CheckpointError("implausible tensor size");
    }
    t.values.resize(elements);
    for (auto& v : t.values) v = t.dtype == 1 ? static_cast<double>(get_le<float>(in)) : get_le<double>(in);
    tensors.push_back(std::move(t));
  }
  return tensors;
}

void save_checkpoint_file(const std::filesystem::path& path, const std::vector<NamedTensor>& tensors) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("cannot write " + path.string());
  write_checkpoint(out, tensors);
}

std::vector<NamedTensor> load_checkpoint_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open " + path.string());
  return read_checkpoint(in);
}

}  // namespace emoreact
