#include "texunwarp/config.hpp"

#include <fstream>

#include "texunwarp/error.hpp"

namespace texunwarp {

using nlohmann::json;

void to_json(json& j, const DatagenConfig& c) {
  j = json{{"garment", to_string(c.garment)},
           {"resolution", c.resolution},
           {"crop_size", c.crop_size},
           {"map_size", c.map_size},
           {"strength_min", c.strength_min},
           {"strength_max", c.strength_max},
           {"zero_strength_fraction", c.zero_strength_fraction},
           {"num_bases", c.warp.num_bases},
           {"num_bumps", c.warp.num_bumps},
           {"max_occluders", c.warp.max_occluders},
           {"family", c.family ? json(*c.family) : json(nullptr)}};
}

void from_json(const json& j, DatagenConfig& c) {
  const DatagenConfig d;
  c.garment = garment_from_string(j.value("garment", std::string(to_string(d.garment))));
  c.resolution = j.value("resolution", d.resolution);
  c.crop_size = j.value("crop_size", d.crop_size);
  c.map_size = j.value("map_size", d.map_size);
  c.strength_min = j.value("strength_min", d.strength_min);
  c.strength_max = j.value("strength_max", d.strength_max);
  c.zero_strength_fraction = j.value("zero_strength_fraction", d.zero_strength_fraction);
  c.warp.num_bases = j.value("num_bases", d.warp.num_bases);
  c.warp.num_bumps = j.value("num_bumps", d.warp.num_bumps);
  c.warp.max_occluders = j.value("max_occluders", d.warp.max_occluders);
  if (j.contains("family") && !j.at("family").is_null())
    c.family = j.at("family").get<PatternFamily>();
  else
    c.family.reset();
}

void GlobalConfig::validate() const {
  train.validate();
  datagen.validate();
  if (num_samples < 1) throw ParameterError("num_samples must be >= 1");
  if (ablation_seeds.empty()) throw ParameterError("ablation needs at least one seed");
}

json GlobalConfig::to_json() const {
  json t = train;
  json model = t["model"], loss = t["loss"];
  t.erase("model");
  t.erase("loss");
  return json{{"model", model},
              {"loss", loss},
              {"train", t},
              {"datagen", datagen},
              {"num_samples", num_samples},
              {"ablation_seeds", ablation_seeds},
              {"paths", paths}};
}

namespace {
// Rejects keys of `j` that `reference` does not have, recursing into objects.
void check_keys(const json& j, const json& reference, const std::string& where) {
  for (const auto& [key, value] : j.items()) {
    if (!reference.contains(key)) throw ParameterError("unknown config key " + where + key);
    if (value.is_object() && reference.at(key).is_object() && key != "paths" && key != "family")
      check_keys(value, reference.at(key), where + key + ".");
  }
}
}  // namespace

GlobalConfig GlobalConfig::from_json(const json& j) {
  try {
    check_keys(j, default_config_json(), "");
    GlobalConfig g;
    json t = j.value("train", json::object());
    t["model"] = j.value("model", json::object());
    t["loss"] = j.value("loss", json::object());
    g.train = t.get<TrainConfig>();
    g.datagen = j.value("datagen", json::object()).get<DatagenConfig>();
    g.num_samples = j.value("num_samples", g.num_samples);
    g.ablation_seeds = j.value("ablation_seeds", g.ablation_seeds);
    g.paths = j.value("paths", g.paths);
    return g;
  } catch (const json::exception& e) {
    throw ParameterError(std::string("invalid configuration: ") + e.what());
  }
}

json default_config_json() { return GlobalConfig{}.to_json(); }

GlobalConfig resolve_config(const std::vector<json>& layers) {
  json merged = default_config_json();
  for (const auto& layer : layers) {
    if (!layer.is_object()) throw ParameterError("configuration layers must be JSON objects");
    merged.merge_patch(layer);
  }
  GlobalConfig g = GlobalConfig::from_json(merged);
  g.validate();
  return g;
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ParameterError(path.string() + ": " + e.what());
  }
}

}  // namespace texunwarp
