#pragma once

// On-disk checkpoint: a directory holding manifest.json and params.bin.
//
// manifest.json lists every tensor as {name, shape, byte_offset, byte_len};
// params.bin is the concatenation of those tensors as little-endian 32-bit
// floats in manifest order. A CRC-32 of params.bin guards against corruption.

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "drht/model.hpp"

namespace drht {

inline constexpr int kCheckpointVersion = 1;

struct NamedTensor {
  std::string name;
  Tensor<float> value;
};

struct Checkpoint {
  NetworkSpec spec;
  std::vector<NamedTensor> tensors;
  /// Free-form state saved alongside the tensors (training progress etc.).
  nlohmann::json meta = nlohmann::json::object();

  const Tensor<float>* find(const std::string& name) const;
  bool has_prefix(const std::string& prefix) const;
};

nlohmann::json to_json(const NetworkSpec& spec);
NetworkSpec network_spec_from_json(const nlohmann::json& j);

/// Appends every tensor of `params` under "<prefix>.<layer>.<field>".
void append_params(Checkpoint& ckpt, const std::string& prefix, const ModelParams<float>& params);

/// Rebuilds a network stored under `prefix`; throws CheckpointError naming
/// the layer whose tensors are missing or mis-shaped for ckpt.spec.
ModelParams<float> extract_params(const Checkpoint& ckpt, const std::string& prefix);

void save_checkpoint(const std::filesystem::path& dir, const Checkpoint& ckpt);

/// Throws CheckpointError on a missing, truncated or corrupted checkpoint.
Checkpoint load_checkpoint(const std::filesystem::path& dir);

}  // namespace drht
