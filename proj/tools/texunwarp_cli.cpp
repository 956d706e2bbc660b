// texunwarp: command-line front end over the C API.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "texunwarp/texunwarp.h"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

class Failure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void check(tu_status s, const std::string& what) {
  if (s != TU_OK) throw Failure(what + ": " + tu_status_string(s) + ": " + tu_last_error());
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Failure("cannot open config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

template <class T>
void set_if(json& j, const json::json_pointer& ptr, const std::optional<T>& v) {
  if (v) j[ptr] = *v;
}

struct Image {
  tu_image* p = nullptr;
  ~Image() { tu_image_free(p); }
};

struct Model {
  tu_model* p = nullptr;
  ~Model() { tu_model_free(p); }
};

struct Options {
  std::string config_file;
  std::string out, dataset, ckpt, ckpt_input, ckpt_gt, input, normal, layout, side;
  std::optional<int> num_samples, resolution;
  std::optional<std::int64_t> steps;
  std::optional<std::uint64_t> seed;
  std::optional<double> strength;
  std::optional<std::string> garment;
  std::vector<std::uint64_t> seeds;
  bool assemble = false;
};

/// defaults < --config file < flags; returns the resolved configuration.
std::string resolve(const Options& o, json flags) {
  flags["paths"]["out"] = o.out;
  for (auto [key, value] : {std::pair<const char*, const std::string*>{"dataset", &o.dataset},
                            {"ckpt", &o.ckpt},
                            {"ckpt_input", &o.ckpt_input},
                            {"ckpt_gt", &o.ckpt_gt},
                            {"input", &o.input},
                            {"normal", &o.normal},
                            {"layout", &o.layout}})
    if (!value->empty()) flags["paths"][key] = *value;
  std::string file;
  if (!o.config_file.empty()) file = read_file(o.config_file);
  char* resolved = nullptr;
  const std::string flag_text = flags.dump();
  check(tu_resolve_config(file.empty() ? nullptr : file.c_str(), flag_text.c_str(), &resolved), "config");
  std::string out = resolved;
  tu_free_string(resolved);
  return out;
}

json train_flags(const Options& o) {
  json f = json::object();
  set_if(f, "/train/steps"_json_pointer, o.steps);
  set_if(f, "/train/seed"_json_pointer, o.seed);
  return f;
}

void progress(const char* message, void*) {
  std::fprintf(stderr, "%s\n", message);
}

void run_infer(const Options& o, const std::string& config) {
  const json cfg = json::parse(config);
  fs::create_directories(o.out);
  std::ofstream(fs::path(o.out) / "config.json") << cfg.dump(2) << "\n";
  Model model;
  Image input, normal, crop;
  check(tu_model_load(o.ckpt.c_str(), &model.p), "load checkpoint");
  check(tu_image_load_png(o.input.c_str(), &input.p), "load input");
  check(tu_image_load_png(o.normal.c_str(), &normal.p), "load normal map");
  check(tu_model_infer(model.p, input.p, normal.p, &crop.p), "infer");
  const std::string crop_path = (fs::path(o.out) / "crop.png").string();
  check(tu_image_save_png(crop.p, crop_path.c_str()), "write crop");
  std::cout << crop_path << "\n";
  if (o.assemble) {
    const std::string layout = o.layout.empty() ? cfg["datagen"]["garment"].get<std::string>() : o.layout;
    Image map;
    check(tu_assemble(crop.p, layout.c_str(), cfg["datagen"]["map_size"].get<int>(), &map.p), "assemble");
    const std::string map_path = (fs::path(o.out) / "texture_map.png").string();
    check(tu_image_save_png(map.p, map_path.c_str()), "write texture map");
    std::cout << map_path << "\n";
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Texture unwarping pipeline: dataset generation, training, inference and evaluation"};
  app.require_subcommand(1);
  Options o;
  app.add_option("--config", o.config_file, "JSON config file; flags override it")->check(CLI::ExistingFile);

  auto* gen = app.add_subcommand("generate", "Generate a synthetic dataset");
  gen->add_option("--out", o.out, "Dataset directory")->required();
  gen->add_option("--num-samples", o.num_samples, "Number of samples");
  gen->add_option("--garment", o.garment, "Garment type")->check(CLI::IsMember({"tshirt", "pants"}));
  gen->add_option("--strength", o.strength, "Maximum warp strength");
  gen->add_option("--resolution", o.resolution, "Input, normal and crop side in pixels");
  gen->add_option("--seed", o.seed, "Dataset seed");

  auto* pre = app.add_subcommand("pretrain", "Stage A: train one encoder-generator pair");
  pre->add_option("--dataset", o.dataset, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  pre->add_option("--side", o.side, "Autoencoder side")->required()->check(CLI::IsMember({"input", "gt"}));
  pre->add_option("--steps", o.steps, "Training steps");
  pre->add_option("--seed", o.seed, "Run seed");
  pre->add_option("--out", o.out, "Run directory")->required();

  auto* corr = app.add_subcommand("train-corrector", "Stage B: train the normal encoder and distortion corrector");
  corr->add_option("--dataset", o.dataset, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  corr->add_option("--ckpt-input", o.ckpt_input, "Input-side stage-A checkpoint")->required()->check(CLI::ExistingFile);
  corr->add_option("--ckpt-gt", o.ckpt_gt, "GT-side stage-A checkpoint")->required()->check(CLI::ExistingFile);
  corr->add_option("--steps", o.steps, "Training steps");
  corr->add_option("--seed", o.seed, "Run seed");
  corr->add_option("--out", o.out, "Run directory")->required();

  auto* inf = app.add_subcommand("infer", "Unwarp one garment image");
  inf->add_option("--ckpt", o.ckpt, "Checkpoint")->required()->check(CLI::ExistingFile);
  inf->add_option("--input", o.input, "Garment image PNG")->required()->check(CLI::ExistingFile);
  inf->add_option("--normal", o.normal, "Normal map PNG")->required()->check(CLI::ExistingFile);
  inf->add_option("--out", o.out, "Output directory")->required();
  inf->add_flag("--assemble", o.assemble, "Also build the full texture map");
  inf->add_option("--layout", o.layout, "Layout JSON or built-in garment name");

  auto* ev = app.add_subcommand("evaluate", "Score a checkpoint on the held-out split");
  ev->add_option("--ckpt", o.ckpt, "Checkpoint")->required()->check(CLI::ExistingFile);
  ev->add_option("--dataset", o.dataset, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  ev->add_option("--out", o.out, "Output directory")->required();

  auto* abl = app.add_subcommand("ablate", "Train and score the three ablation arms");
  abl->add_option("--dataset", o.dataset, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  abl->add_option("--seeds", o.seeds, "Seeds")->delimiter(',');
  abl->add_option("--steps", o.steps, "Steps per stage");
  abl->add_option("--out", o.out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return e.get_exit_code() != 0 ? e.get_exit_code() : 2;
  }

  try {
    if (*gen) {
      json f = json::object();
      set_if(f, "/num_samples"_json_pointer, o.num_samples);
      set_if(f, "/datagen/garment"_json_pointer, o.garment);
      set_if(f, "/datagen/strength_max"_json_pointer, o.strength);
      set_if(f, "/train/seed"_json_pointer, o.seed);
      if (o.resolution) {
        for (const char* p : {"/datagen/resolution", "/datagen/crop_size", "/model/resolution", "/model/crop_size"})
          f[json::json_pointer(p)] = *o.resolution;
        // keep content_grid * 2^gen_levels == crop_size
        const int grid = json::parse(resolve(o, json::object()))["model"]["content_grid"].get<int>();
        int levels = 0;
        while ((grid << levels) < *o.resolution) ++levels;
        f["model"]["gen_levels"] = levels;
      }
      const std::string cfg = resolve(o, f);
      int n = 0;
      check(tu_generate(cfg.c_str(), o.out.c_str(), &n), "generate");
      std::cout << n << " samples written to " << o.out << "\n";
    } else if (*pre) {
      const std::string cfg = resolve(o, train_flags(o));
      check(tu_pretrain(cfg.c_str(), o.dataset.c_str(), o.side.c_str(), o.out.c_str()), "pretrain");
      std::cout << "checkpoint written to " << o.out << "\n";
    } else if (*corr) {
      const std::string cfg = resolve(o, train_flags(o));
      check(tu_train_corrector(cfg.c_str(), o.dataset.c_str(), o.ckpt_input.c_str(), o.ckpt_gt.c_str(), o.out.c_str()),
            "train-corrector");
      std::cout << "checkpoint written to " << o.out << "\n";
    } else if (*inf) {
      run_infer(o, resolve(o, json::object()));
    } else if (*ev) {
      const std::string cfg = resolve(o, json::object());
      char* report = nullptr;
      check(tu_evaluate(cfg.c_str(), o.ckpt.c_str(), o.dataset.c_str(), o.out.c_str(), &report), "evaluate");
      const json r = json::parse(report);
      tu_free_string(report);
      std::cout << "ssim " << r["ssim"].get<double>() << " fid_lite " << r["fid_lite"].get<double>() << "\n";
    } else if (*abl) {
      json f = train_flags(o);
      if (!o.seeds.empty()) f["ablation_seeds"] = o.seeds;
      const std::string cfg = resolve(o, f);
      check(tu_ablate(cfg.c_str(), o.dataset.c_str(), o.out.c_str(), progress, nullptr), "ablate");
      std::cout << "ablation written to " << o.out << "\n";
    }
  } catch (const Failure& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
