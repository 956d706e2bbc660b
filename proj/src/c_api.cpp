#include "texunwarp/texunwarp.h"

#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>

#include "texunwarp/assembler.hpp"
#include "texunwarp/config.hpp"
#include "texunwarp/error.hpp"
#include "texunwarp/evaluation.hpp"
#include "texunwarp/png_io.hpp"
#include "texunwarp/training.hpp"

using namespace texunwarp;
using nlohmann::json;
namespace fs = std::filesystem;

struct tu_model {
  Checkpoint checkpoint;
  Networks networks;
};

struct tu_image {
  Image image;
};

namespace {

thread_local std::string g_last_error;

tu_status code_of(ErrorCode c) {
  switch (c) {
    case ErrorCode::Parameter: return TU_ERR_PARAMETER;
    case ErrorCode::Size: return TU_ERR_SIZE;
    case ErrorCode::Shape: return TU_ERR_SHAPE;
    case ErrorCode::Io: return TU_ERR_IO;
    case ErrorCode::Manifest: return TU_ERR_MANIFEST;
    case ErrorCode::Numeric: return TU_ERR_NUMERIC;
    case ErrorCode::Freeze: return TU_ERR_FREEZE;
    case ErrorCode::Cache: return TU_ERR_CACHE;
    case ErrorCode::State: return TU_ERR_STATE;
  }
  return TU_ERR_INTERNAL;
}

template <class F>
tu_status guarded(F&& f) {
  g_last_error.clear();
  try {
    f();
    return TU_OK;
  } catch (const Error& e) {
    g_last_error = e.what();
    return code_of(e.code());
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return TU_ERR_INTERNAL;
  }
}

void require(const void* p, const char* what) {
  if (!p) throw ParameterError(std::string(what) + " must not be null");
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

json parse(const char* text, const char* what) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw ParameterError(std::string(what) + ": " + e.what());
  }
}

GlobalConfig config_of(const char* config_json) {
  require(config_json, "config_json");
  return resolve_config({parse(config_json, "config")});
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("short write on " + path.string());
}

void write_config(const fs::path& dir, const GlobalConfig& g) {
  fs::create_directories(dir);
  write_text(dir / "config.json", g.to_json().dump(2) + "\n");
}

struct LoadedDataset {
  TrainingData all;
  std::string id;
};

LoadedDataset load_dataset(const char* dir, const GlobalConfig& g) {
  require(dir, "dataset_dir");
  const Dataset ds = read_dataset(dir);
  if (ds.manifest.resolution != g.train.model.resolution || ds.manifest.crop_size != g.train.model.crop_size)
    throw ParameterError("dataset is " + std::to_string(ds.manifest.resolution) + "/" +
                         std::to_string(ds.manifest.crop_size) + " px but the model expects " +
                         std::to_string(g.train.model.resolution) + "/" + std::to_string(g.train.model.crop_size));
  return {TrainingData::from_samples(ds.samples), sha256_file(fs::path(dir) / "manifest.json")};
}

void write_training_run(const fs::path& dir, TrainResult& r, const GlobalConfig& g) {
  write_run(dir, r, g.to_json());
  const Checkpoint back = load_checkpoint(dir / r.record.checkpoint_path);
  if (!checkpoints_equal(back, r.checkpoint)) throw StateError("checkpoint did not round-trip");
}

}  // namespace

extern "C" {

const char* tu_version(void) { return "1.0.0"; }

const char* tu_status_string(tu_status status) {
  switch (status) {
    case TU_OK: return "ok";
    case TU_ERR_PARAMETER: return "invalid parameter";
    case TU_ERR_SIZE: return "invalid size";
    case TU_ERR_SHAPE: return "shape mismatch";
    case TU_ERR_IO: return "i/o error";
    case TU_ERR_MANIFEST: return "invalid dataset manifest";
    case TU_ERR_NUMERIC: return "numeric failure";
    case TU_ERR_FREEZE: return "frozen parameters changed";
    case TU_ERR_CACHE: return "latent cache mismatch";
    case TU_ERR_STATE: return "invalid state";
    case TU_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

const char* tu_last_error(void) { return g_last_error.c_str(); }

void tu_free_string(char* s) { std::free(s); }

tu_status tu_resolve_config(const char* file_json, const char* flags_json, char** resolved_json) {
  return guarded([&] {
    require(resolved_json, "resolved_json");
    std::vector<json> layers;
    if (file_json) layers.push_back(parse(file_json, "config file"));
    if (flags_json) layers.push_back(parse(flags_json, "flags"));
    *resolved_json = dup_string(resolve_config(layers).to_json().dump());
  });
}

tu_status tu_generate(const char* config_json, const char* out_dir, int* num_samples) {
  return guarded([&] {
    require(out_dir, "out_dir");
    const GlobalConfig g = config_of(config_json);
    const auto samples = generate_samples(g.datagen, g.num_samples, g.train.seed);
    write_dataset(samples, g.datagen, g.train.seed, out_dir);
    write_config(out_dir, g);
    validate_dataset(out_dir);
    if (num_samples) *num_samples = static_cast<int>(samples.size());
  });
}

tu_status tu_pretrain(const char* config_json, const char* dataset_dir, const char* side, const char* out_dir) {
  return guarded([&] {
    require(side, "side");
    require(out_dir, "out_dir");
    GlobalConfig g = config_of(config_json);
    const std::string s = side;
    if (s != "input" && s != "gt") throw ParameterError("side must be input or gt");
    g.train.stage = s == "input" ? Stage::pretrain_input : Stage::pretrain_gt;
    const LoadedDataset ds = load_dataset(dataset_dir, g);
    TrainResult r = pretrain_autoencoder(split_dataset(ds.all).train, g.train);
    write_training_run(out_dir, r, g);
  });
}

tu_status tu_train_corrector(const char* config_json, const char* dataset_dir, const char* ckpt_input,
                             const char* ckpt_gt, const char* out_dir) {
  return guarded([&] {
    require(ckpt_input, "ckpt_input");
    require(ckpt_gt, "ckpt_gt");
    require(out_dir, "out_dir");
    GlobalConfig g = config_of(config_json);
    g.train.stage = Stage::corrector;
    const LoadedDataset ds = load_dataset(dataset_dir, g);
    const TrainingData train = split_dataset(ds.all).train;
    const Checkpoint a_in = load_checkpoint(ckpt_input);
    const Checkpoint a_gt = load_checkpoint(ckpt_gt);
    const LatentCache cache = cache_latents(a_in, train);
    TrainResult r = train_corrector(a_in, a_gt, &cache, train, g.train);
    write_training_run(out_dir, r, g);
  });
}

tu_status tu_evaluate(const char* config_json, const char* ckpt, const char* dataset_dir, const char* out_dir,
                      char** report_json) {
  return guarded([&] {
    require(ckpt, "ckpt");
    require(out_dir, "out_dir");
    const GlobalConfig g = config_of(config_json);
    const Checkpoint c = load_checkpoint(ckpt);
    const LoadedDataset ds = load_dataset(dataset_dir, g);
    const TrainingData test = split_dataset(ds.all).test;
    const std::vector<Image> outputs = infer_all(c, test);
    const std::vector<Image> targets = tensor_to_images(test.gt);
    MetricReport report = score_outputs(outputs, targets);
    report.checkpoint_id = c.digest();
    report.dataset_id = ds.id;
    report.validate();

    write_config(out_dir, g);
    const std::string text = json(report).dump(2);
    write_text(fs::path(out_dir) / "report.json", text + "\n");
    constexpr std::size_t kRows = 8;
    const std::size_t rows = std::min(kRows, outputs.size());
    const std::vector<Image> inputs = tensor_to_images(test.input.slice(0, 0, static_cast<int64_t>(rows)));
    emit_figure_grid(inputs, std::span(outputs).first(rows), std::span(targets).first(rows),
                     fs::path(out_dir) / "grid.png");
    if (report_json) *report_json = dup_string(text);
  });
}

tu_status tu_ablate(const char* config_json, const char* dataset_dir, const char* out_dir, tu_progress_fn progress,
                    void* user) {
  return guarded([&] {
    require(out_dir, "out_dir");
    const GlobalConfig g = config_of(config_json);
    const LoadedDataset ds = load_dataset(dataset_dir, g);
    const DataSplit split = split_dataset(ds.all);
    AblationConfig ac;
    ac.base = g.train;
    ac.pretrain_steps = g.train.steps;
    ac.corrector_steps = g.train.steps;
    ac.seeds = g.ablation_seeds;
    const AblationResult r = run_ablation(split.train, split.test, ac, [&](const std::string& msg) {
      if (progress) progress(msg.c_str(), user);
    });
    write_config(out_dir, g);
    write_text(fs::path(out_dir) / "ablation.json", r.table.to_json().dump(2) + "\n");
    write_text(fs::path(out_dir) / "ablation.md", r.table.to_markdown());
  });
}

tu_status tu_model_load(const char* path, tu_model** model) {
  return guarded([&] {
    require(path, "path");
    require(model, "model");
    auto m = std::make_unique<tu_model>();
    m->checkpoint = load_checkpoint(path);
    m->networks = networks_from_checkpoint(m->checkpoint);
    *model = m.release();
  });
}

void tu_model_free(tu_model* model) { delete model; }

tu_status tu_model_infer(tu_model* model, const tu_image* input, const tu_image* normal, tu_image** crop) {
  return guarded([&] {
    require(model, "model");
    require(input, "input");
    require(normal, "normal");
    require(crop, "crop");
    const int r = static_cast<int>(model->checkpoint.model.resolution);
    for (const Image* img : {&input->image, &normal->image})
      if (img->width != r || img->height != r)
        throw ShapeError("inference expects " + std::to_string(r) + "x" + std::to_string(r) + " images");
    const torch::Tensor out = model->networks.infer(image_to_tensor(input->image).unsqueeze(0),
                                                    decode_normals(image_to_tensor(normal->image)).unsqueeze(0));
    *crop = new tu_image{tensor_to_images(out).front()};
  });
}

tu_status tu_image_load_png(const char* path, tu_image** image) {
  return guarded([&] {
    require(path, "path");
    require(image, "image");
    *image = new tu_image{read_png(path, 3)};
  });
}

tu_status tu_image_save_png(const tu_image* image, const char* path) {
  return guarded([&] {
    require(image, "image");
    require(path, "path");
    write_png(image->image, path);
  });
}

tu_status tu_image_size(const tu_image* image, int* width, int* height) {
  return guarded([&] {
    require(image, "image");
    if (width) *width = image->image.width;
    if (height) *height = image->image.height;
  });
}

void tu_image_free(tu_image* image) { delete image; }

tu_status tu_assemble(const tu_image* crop, const char* layout, int map_size, tu_image** texture_map) {
  return guarded([&] {
    require(crop, "crop");
    require(layout, "layout");
    require(texture_map, "texture_map");
    const std::string spec = layout;
    const SewingPatternLayout l =
        spec == "tshirt" || spec == "pants" ? builtin_layout(garment_from_string(spec)) : load_layout(spec);
    *texture_map = new tu_image{assemble(crop->image, l, map_size).image};
  });
}

}  // extern "C"
