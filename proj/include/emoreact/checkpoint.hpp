#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "emoreact/numerics.hpp"

namespace emoreact {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Checkpoint layout, all integers little-endian:
//   magic "EMRCKPT\0" | u32 version | u32 tensor count
//   per tensor: u32 name length | name bytes | u8 dtype (1 = f32, 2 = f64)
//               | u32 rank | u64 dims[rank] | values, row-major, little-endian
inline constexpr std::uint32_t k_checkpoint_version = 1;

struct NamedTensor {
  std::string name;
  std::vector<std::uint64_t> shape;
  /// 1 = f32, 2 = f64. Values are held as double; f32 entries widen exactly.
  std::uint8_t dtype = 2;
  std::vector<double> values;
};

void write_checkpoint(std::ostream& out, const std::vector<NamedTensor>& tensors);
std::vector<NamedTensor> read_checkpoint(std::istream& in);

template <typename Scalar>
std::vector<NamedTensor> to_tensors(const nn::ParameterSet<Scalar>& params) {
  std::vector<NamedTensor> out;
  for (const auto& p : params) {
    NamedTensor t;
    t.name = p.name;
    t.shape = {static_cast<std::uint64_t>(p.value.rows()), static_cast<std::uint64_t>(p.value.cols())};
    t.dtype = sizeof(Scalar) == 4 ? 1 : 2;
    t.values.reserve(static_cast<std::size_t>(p.value.size()));
    for (Eigen::Index r = 0; r < p.value.rows(); ++r) {
      for (Eigen::Index c = 0; c < p.value.cols(); ++c) t.values.push_back(static_cast<double>(p.value(r, c)));
    }
    out.push_back(std::move(t));
  }
  return out;
}

/// Copies tensor values into same-named parameters. Every parameter must be
/// present with a matching shape.
template <typename Scalar>
void assign_tensors(nn::ParameterSet<Scalar>& params, const std::vector<NamedTensor>& tensors) {
  for (auto& p : params) {
    const NamedTensor* found = nullptr;
    for (const auto& t : tensors) {
      if (t.name == p.name) found = &t;
    }
    if (found == nullptr) throw CheckpointError("checkpoint is missing tensor '" + p.name + "'");
    if (found->shape.size() != 2 || found->shape[0] != static_cast<std::uint64_t>(p.value.rows()) ||
        found->shape[1] != static_cast<std::uint64_t>(p.value.cols())) {
      throw CheckpointError("shape mismatch for tensor '" + p.name + "'");
    }
    std::size_t k = 0;
    for (Eigen::Index r = 0; r < p.value.rows(); ++r) {
      for (Eigen::Index c = 0; c < p.value.cols(); ++c) p.value(r, c) = static_cast<Scalar>(found->values[k++]);
    }
  }
}

void save_checkpoint_file(const std::filesystem::path& path, const std::vector<NamedTensor>& tensors);
std::vector<NamedTensor> load_checkpoint_file(const std::filesystem::path& path);

template <typename Scalar>
void save_checkpoint(const std::filesystem::path& path, const nn::ParameterSet<Scalar>& params) {
  save_checkpoint_file(path, to_tensors(params));
}

}  // namespace emoreact
