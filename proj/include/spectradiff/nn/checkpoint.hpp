#pragma once

#include "spectradiff/nn/layers.hpp"
#include "spectradiff/nn/tensor.hpp"

#include <json.hpp>

#include <filesystem>
#include <map>
#include <string>

namespace spectradiff::nn {

/// Checkpoint container.
///
/// Layout on disk:
///   bytes 0..5   "SPDF1\n"
///   bytes 6..13  header length L, unsigned 64-bit little endian
///   next L bytes JSON header {"version", "kind", "meta", "tensors": [{name, shape, offset}]}
///   remainder    tensor payloads, float64 little endian, at the recorded offsets
struct Checkpoint {
  std::string kind;
  nlohmann::json meta = nlohmann::json::object();
  std::map<std::string, Tensor> tensors;

  const Tensor& tensor(const std::string& name) const;
};

inline constexpr char kCheckpointMagic[] = "SPDF1\n";

std::string serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint deserialize_checkpoint(const std::string& bytes);

void write_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint read_checkpoint(const std::filesystem::path& path);
/// Reads and checks the kind tag.
Checkpoint read_checkpoint(const std::filesystem::path& path, const std::string& expected_kind);

/// Copies parameter values into `ckpt.tensors` under `prefix.path`.
void save_params(Checkpoint& ckpt, const ParamStore& params, const std::string& prefix);
/// Restores every parameter from `ckpt`; shapes must match.
void load_params(const Checkpoint& ckpt, const ParamStore& params, const std::string& prefix);

}  // namespace spectradiff::nn
