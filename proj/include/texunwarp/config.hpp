#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"

#include "texunwarp/datagen.hpp"
#include "texunwarp/training.hpp"

namespace texunwarp {

void to_json(nlohmann::json& j, const DatagenConfig& c);
void from_json(const nlohmann::json& j, DatagenConfig& c);

/// Every setting of one command, resolved as defaults < config file < flags.
/// JSON layout:
///   {"model": ..., "loss": ..., "train": {steps, batch, lr, ...},
///    "datagen": {...}, "num_samples": n, "ablation_seeds": [...],
///    "paths": {"out": ..., "dataset": ...}}
struct GlobalConfig {
  TrainConfig train;
  DatagenConfig datagen;
  int num_samples = 320;
  std::vector<std::uint64_t> ablation_seeds{0, 1, 2};
  std::map<std::string, std::string> paths;

  void validate() const;
  nlohmann::json to_json() const;
  static GlobalConfig from_json(const nlohmann::json& j);
};

nlohmann::json default_config_json();

/// Applies each layer as a JSON merge patch over the defaults, then parses
/// and validates. Unknown keys are rejected.
GlobalConfig resolve_config(const std::vector<nlohmann::json>& layers);

nlohmann::json read_json_file(const std::filesystem::path& path);

}  // namespace texunwarp
