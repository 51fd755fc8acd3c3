#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "taco/core/digest.hpp"
#include "taco/core/errors.hpp"
#include "taco/core/io.hpp"
#include "taco/nn/linear.hpp"

namespace taco::nn {

// Checkpoint layout (all integers little-endian):
//   magic "TACO-CKPT-v1\n"
//   u32 metadata count, then {string key, string value} pairs
//   u32 tensor count, then per tensor:
//     string name, u32 ndim, u64 dims..., f64 values (row-major)
inline constexpr const char* kCheckpointMagic = "TACO-CKPT-v1\n";

struct CheckpointTensor {
  std::vector<std::size_t> shape;
  Vec values;
};

struct CheckpointData {
  std::map<std::string, std::string> meta;
  std::vector<std::pair<std::string, CheckpointTensor>> tensors;

  const CheckpointTensor* find(const std::string& name) const {
    for (const auto& [n, t] : tensors)
      if (n == name) return &t;
    return nullptr;
  }
};

inline void save_checkpoint(const std::filesystem::path& path, const ParamList& params,
                            const std::map<std::string, std::string>& meta) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ArtifactError("cannot write checkpoint: " + path.string());
  out.write(kCheckpointMagic, static_cast<std::streamsize>(std::string(kCheckpointMagic).size()));
  io::write_u32(out, static_cast<std::uint32_t>(meta.size()));
  for (const auto& [k, v] : meta) {
    io::write_string(out, k);
    io::write_string(out, v);
  }
  io::write_u32(out, static_cast<std::uint32_t>(params.size()));
  for (const auto& p : params) {
    io::write_string(out, p.name);
    io::write_u32(out, static_cast<std::uint32_t>(p.shape.size()));
    for (std::size_t d : p.shape) io::write_u64(out, d);
    for (std::size_t k = 0; k < p.size; ++k) io::write_f64(out, p.value[k]);
  }
  if (!out) throw ArtifactError("short write on checkpoint: " + path.string());
}

inline CheckpointData load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArtifactError("missing checkpoint: " + path.string());
  const std::string magic(kCheckpointMagic);
  std::string head(magic.size(), '\0');
  in.read(head.data(), static_cast<std::streamsize>(magic.size()));
  if (!in || head != magic) throw ArtifactError("bad checkpoint magic in " + path.string());
  CheckpointData data;
  const std::uint32_t n_meta = io::read_u32(in);
  for (std::uint32_t i = 0; i < n_meta; ++i) {
    std::string k = io::read_string(in);
    data.meta[k] = io::read_string(in);
  }
  const std::uint32_t n_tensors = io::read_u32(in);
  for (std::uint32_t i = 0; i < n_tensors; ++i) {
    std::string name = io::read_string(in);
    CheckpointTensor t;
    const std::uint32_t ndim = io::read_u32(in);
    std::size_t total = 1;
    for (std::uint32_t dgt = 0; dgt < ndim; ++dgt) {
      const std::size_t dim = static_cast<std::size_t>(io::read_u64(in));
      t.shape.push_back(dim);
      total *= dim;
    }
    t.values.resize(total);
    for (std::size_t k = 0; k < total; ++k) t.values[k] = io::read_f64(in);
    data.tensors.emplace_back(std::move(name), std::move(t));
  }
  return data;
}

// Strict restore: every parameter must be present with the same shape.
inline void load_into(const CheckpointData& data, ParamList& params) {
  for (auto& p : params) {
    const CheckpointTensor* t = data.find(p.name);
    if (!t) throw ArtifactError("checkpoint missing tensor: " + p.name);
    if (t->shape != p.shape || t->values.size() != p.size)
      throw ShapeError("checkpoint shape mismatch for " + p.name);
    std::copy(t->values.begin(), t->values.end(), p.value);
  }
}

inline std::string params_digest(const ParamList& params) {
  Fnv1a h;
  for (const auto& p : params) {
    h.update(p.name);
    for (std::size_t d : p.shape) h.update_u64(d);
    for (std::size_t k = 0; k < p.size; ++k) h.update_f64(p.value[k]);
  }
  return h.hex();
}

}  // namespace taco::nn
