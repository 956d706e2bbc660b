#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <torch/torch.h>

#include "json.hpp"

#include "texunwarp/model.hpp"

namespace texunwarp {

enum class Stage { pretrain_input, pretrain_gt, corrector, end_to_end, no_corrector };

std::string_view to_string(Stage s);
Stage stage_from_string(std::string_view s);

struct TensorEntry {
  std::string name;
  torch::Tensor value;
  bool frozen = false;
};

/// Everything needed to rebuild a trained network set: stage tag, model
/// dimensions, the resolved run configuration, parameters with freeze tags
/// and the final state of the run's RNG.
///
/// On disk: 8-byte magic "TUWCKPT1", little-endian u64 header length, a JSON
/// header indexing every tensor, then the raw tensor bytes.
struct Checkpoint {
  Stage stage = Stage::pretrain_input;
  ModelConfig model;
  nlohmann::json config = nlohmann::json::object();
  std::vector<TensorEntry> parameters;
  torch::Tensor rng_state;

  const TensorEntry* find(std::string_view name) const;
  bool has_prefix(std::string_view prefix) const;

  /// SHA-256 over names and bytes of the parameters starting with `prefix`.
  std::string digest(std::string_view prefix = {}) const;
};

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// True when both checkpoints hold the same metadata and bit-identical tensors.
bool checkpoints_equal(const Checkpoint& a, const Checkpoint& b);

std::string sha256_hex(const void* data, std::size_t size);
std::string sha256_file(const std::filesystem::path& path);

/// SHA-256 over (name, bytes) of each tensor in order.
std::string tensors_digest(const std::vector<std::pair<std::string, torch::Tensor>>& tensors);

}  // namespace texunwarp
