#include <filesystem>
#include <fstream>
#include <string>

#include "doctest.h"
#include "json.hpp"
#include "test_support.hpp"

#include "texunwarp/texunwarp.h"

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

json tiny_layers() {
  return {{"model",
           {{"resolution", 16},
            {"crop_size", 16},
            {"content_grid", 4},
            {"normal_grid", 4},
            {"gen_levels", 2},
            {"content_channels", 4},
            {"style_dim", 8},
            {"width", 8},
            {"disc_patch", 4}}},
          {"datagen", {{"resolution", 16}, {"crop_size", 16}, {"map_size", 32}}},
          {"train", {{"steps", 3}, {"batch", 4}}},
          {"num_samples", 8}};
}

std::string resolved(const json& flags) {
  char* out = nullptr;
  const std::string text = flags.dump();
  REQUIRE(tu_resolve_config(nullptr, text.c_str(), &out) == TU_OK);
  std::string s = out;
  tu_free_string(out);
  return s;
}

}  // namespace

TEST_CASE("status strings and version") {
  CHECK(std::string(tu_status_string(TU_OK)) == "ok");
  CHECK(std::string(tu_status_string(TU_ERR_FREEZE)) == "frozen parameters changed");
  CHECK(std::string(tu_version()).size() > 0);
}

TEST_CASE("config resolution through the C API") {
  char* out = nullptr;
  REQUIRE(tu_resolve_config(R"({"num_samples": 12})", R"({"num_samples": 7})", &out) == TU_OK);
  CHECK(json::parse(out)["num_samples"] == 7);
  tu_free_string(out);
  CHECK(tu_resolve_config(R"({"bogus": 1})", nullptr, &out) == TU_ERR_PARAMETER);
  CHECK(std::string(tu_last_error()).find("bogus") != std::string::npos);
  CHECK(tu_resolve_config("{not json", nullptr, &out) == TU_ERR_PARAMETER);
  CHECK(tu_resolve_config(nullptr, nullptr, nullptr) == TU_ERR_PARAMETER);
}

TEST_CASE("null handles are rejected without crashing") {
  tu_image* img = nullptr;
  CHECK(tu_image_load_png(nullptr, &img) == TU_ERR_PARAMETER);
  CHECK(tu_image_load_png("/nonexistent/x.png", &img) == TU_ERR_IO);
  CHECK(tu_model_infer(nullptr, nullptr, nullptr, nullptr) == TU_ERR_PARAMETER);
  CHECK(tu_model_load("/nonexistent/ckpt.bin", nullptr) == TU_ERR_PARAMETER);
  tu_model* m = nullptr;
  CHECK(tu_model_load("/nonexistent/ckpt.bin", &m) == TU_ERR_IO);
  CHECK(m == nullptr);
  tu_model_free(nullptr);
  tu_image_free(nullptr);
}

TEST_CASE("pipeline through the C API") {
  texunwarp::test::TempDir dir("capi");
  const std::string cfg = resolved(tiny_layers());
  const std::string ds = (dir / "ds").string();
  int n = 0;
  REQUIRE(tu_generate(cfg.c_str(), ds.c_str(), &n) == TU_OK);
  CHECK(n == 8);
  CHECK(fs::exists(fs::path(ds) / "manifest.json"));
  CHECK(fs::exists(fs::path(ds) / "config.json"));

  const std::string a_in = (dir / "a_in").string(), a_gt = (dir / "a_gt").string();
  REQUIRE(tu_pretrain(cfg.c_str(), ds.c_str(), "input", a_in.c_str()) == TU_OK);
  REQUIRE(tu_pretrain(cfg.c_str(), ds.c_str(), "gt", a_gt.c_str()) == TU_OK);
  CHECK(tu_pretrain(cfg.c_str(), ds.c_str(), "sideways", a_gt.c_str()) == TU_ERR_PARAMETER);
  const std::string ck_in = a_in + "/ckpt_pretrain_input.bin", ck_gt = a_gt + "/ckpt_pretrain_gt.bin";

  const std::string b = (dir / "b").string();
  REQUIRE(tu_train_corrector(cfg.c_str(), ds.c_str(), ck_in.c_str(), ck_gt.c_str(), b.c_str()) == TU_OK);
  CHECK(tu_train_corrector(cfg.c_str(), ds.c_str(), ck_gt.c_str(), ck_in.c_str(), b.c_str()) == TU_ERR_STATE);
  const std::string ck_b = b + "/ckpt_corrector.bin";

  char* report = nullptr;
  const std::string ev = (dir / "eval").string();
  REQUIRE(tu_evaluate(cfg.c_str(), ck_b.c_str(), ds.c_str(), ev.c_str(), &report) == TU_OK);
  const json r = json::parse(report);
  tu_free_string(report);
  CHECK(r["sample_count"] == 2);
  CHECK(fs::exists(fs::path(ev) / "grid.png"));

  tu_model* model = nullptr;
  REQUIRE(tu_model_load(ck_b.c_str(), &model) == TU_OK);
  tu_image *input = nullptr, *normal = nullptr, *crop = nullptr, *map = nullptr;
  REQUIRE(tu_image_load_png((ds + "/samples/000000_input.png").c_str(), &input) == TU_OK);
  REQUIRE(tu_image_load_png((ds + "/samples/000000_normal.png").c_str(), &normal) == TU_OK);
  REQUIRE(tu_model_infer(model, input, normal, &crop) == TU_OK);
  int w = 0, h = 0;
  CHECK(tu_image_size(crop, &w, &h) == TU_OK);
  CHECK(w == 16);
  CHECK(h == 16);
  CHECK(tu_model_infer(model, crop, crop, &map) == TU_OK);  // crop side equals the input side here
  tu_image_free(map);
  map = nullptr;
  REQUIRE(tu_assemble(crop, "tshirt", 32, &map) == TU_OK);
  CHECK(tu_image_size(map, &w, &h) == TU_OK);
  CHECK(w == 32);
  CHECK(tu_assemble(crop, "/nonexistent/layout.json", 32, &map) == TU_ERR_IO);
  const std::string out_png = (dir / "map.png").string();
  CHECK(tu_image_save_png(map, out_png.c_str()) == TU_OK);
  CHECK(fs::exists(out_png));
  tu_image_free(map);
  tu_image_free(crop);
  tu_image_free(normal);
  tu_image_free(input);
  tu_model_free(model);

  // a 32 px model cannot read the 16 px dataset
  json mismatch = tiny_layers();
  mismatch["model"]["resolution"] = 32;
  mismatch["model"]["crop_size"] = 32;
  mismatch["model"]["gen_levels"] = 3;
  const std::string bad = resolved(mismatch);
  CHECK(tu_pretrain(bad.c_str(), ds.c_str(), "input", (dir / "x").string().c_str()) == TU_ERR_PARAMETER);
}
