#include "texunwarp/evaluation.hpp"

#include <cmath>
#include <cstdio>
#include <numeric>

#include "texunwarp/error.hpp"
#include "texunwarp/metrics.hpp"
#include "texunwarp/png_io.hpp"

namespace texunwarp {

using nlohmann::json;

void MetricReport::validate() const {
  if (!(ssim >= -1.0 && ssim <= 1.0)) throw NumericError("ssim outside [-1, 1]");
  if (!(fid_lite >= 0.0)) throw NumericError("fid_lite is negative or NaN");
  if (sample_count != static_cast<int64_t>(per_sample_ssim.size()))
    throw ParameterError("sample_count does not match per_sample_ssim");
}

void to_json(json& j, const MetricReport& r) {
  j = json{{"ssim", r.ssim},
           {"fid_lite", r.fid_lite},
           {"fid_regularized", r.fid_regularized},
           {"per_sample_ssim", r.per_sample_ssim},
           {"sample_count", r.sample_count},
           {"checkpoint_id", r.checkpoint_id},
           {"dataset_id", r.dataset_id}};
}

void from_json(const json& j, MetricReport& r) {
  r.ssim = j.at("ssim").get<double>();
  r.fid_lite = j.at("fid_lite").get<double>();
  r.fid_regularized = j.at("fid_regularized").get<bool>();
  r.per_sample_ssim = j.at("per_sample_ssim").get<std::vector<double>>();
  r.sample_count = j.at("sample_count").get<int64_t>();
  r.checkpoint_id = j.at("checkpoint_id").get<std::string>();
  r.dataset_id = j.at("dataset_id").get<std::string>();
}

MetricReport score_outputs(std::span<const Image> outputs, std::span<const Image> targets) {
  if (outputs.size() != targets.size()) throw SizeError("outputs and targets differ in count");
  if (outputs.size() < 2) throw SizeError("scoring needs at least two samples");
  MetricReport r;
  for (std::size_t i = 0; i < outputs.size(); ++i) r.per_sample_ssim.push_back(ssim(outputs[i], targets[i]));
  r.sample_count = static_cast<int64_t>(outputs.size());
  r.ssim = std::accumulate(r.per_sample_ssim.begin(), r.per_sample_ssim.end(), 0.0) / static_cast<double>(r.sample_count);
  const FidResult fid = fid_lite(outputs, targets);
  r.fid_lite = std::max(0.0, fid.value);
  r.fid_regularized = fid.regularized;
  return r;
}

std::vector<Image> infer_all(const Checkpoint& ckpt, const TrainingData& data) {
  Networks nets = networks_from_checkpoint(ckpt);
  if (data.input.size(2) != ckpt.model.resolution) throw ShapeError("dataset resolution does not match the checkpoint");
  constexpr int64_t kChunk = 32;
  std::vector<Image> out;
  for (int64_t b = 0; b < data.size(); b += kChunk) {
    const int64_t e = std::min(b + kChunk, data.size());
    for (auto& img : tensor_to_images(nets.infer(data.input.slice(0, b, e), data.normal.slice(0, b, e))))
      out.push_back(std::move(img));
  }
  return out;
}

MetricReport evaluate_model(const Checkpoint& ckpt, const TrainingData& test, const std::string& dataset_id) {
  const std::vector<Image> outputs = infer_all(ckpt, test);
  MetricReport r = score_outputs(outputs, tensor_to_images(test.gt));
  r.checkpoint_id = ckpt.digest();
  r.dataset_id = dataset_id;
  return r;
}

Image figure_grid(std::span<const Image> inputs, std::span<const Image> outputs, std::span<const Image> targets) {
  if (inputs.empty()) throw SizeError("figure grid needs at least one sample");
  if (inputs.size() != outputs.size() || inputs.size() != targets.size())
    throw SizeError("figure grid columns differ in length");
  const int tile = targets.front().width;
  Image grid(3 * tile, tile * static_cast<int>(inputs.size()), 3);
  auto blit = [&](const Image& src, int col, int row) {
    const Image t = src.width == tile && src.height == tile ? src : resize_bilinear(src, tile, tile);
    for (int y = 0; y < tile; ++y)
      for (int x = 0; x < tile; ++x) grid.set_rgb(col * tile + x, row * tile + y, t.rgb(x, y));
  };
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const int row = static_cast<int>(i);
    blit(inputs[i], 0, row);
    blit(outputs[i], 1, row);
    blit(targets[i], 2, row);
  }
  return grid;
}

void emit_figure_grid(std::span<const Image> inputs, std::span<const Image> outputs, std::span<const Image> targets,
                      const std::filesystem::path& path) {
  write_png(figure_grid(inputs, outputs, targets), path);
}

// ---------------------------------------------------------------------------

const std::vector<PublishedReferenceRow>& published_reference_rows() {
  static const std::vector<PublishedReferenceRow> rows{
      {"end_to_end", 0.17, 0.91, 394.98}, {"no_corrector", 0.29, 0.62, 136.86}, {"ours", 0.31, 0.61, 114.57}};
  return rows;
}

const AblationRow& AblationTable::row(std::string_view arm) const {
  for (const auto& r : rows)
    if (r.arm == arm) return r;
  throw ParameterError("ablation table has no arm " + std::string(arm));
}

bool AblationTable::ordering_holds() const {
  const auto& ours = row("ours");
  const auto& e2e = row("end_to_end");
  return ours.mean_ssim >= e2e.mean_ssim && ours.mean_fid_lite <= e2e.mean_fid_lite;
}

json AblationTable::to_json() const {
  json j{{"seeds", seeds}, {"rows", json::array()}, {"reference", json::array()}};
  for (const auto& r : rows)
    j["rows"].push_back({{"arm", r.arm},
                         {"ssim", r.ssim},
                         {"fid_lite", r.fid_lite},
                         {"mean_ssim", r.mean_ssim},
                         {"mean_fid_lite", r.mean_fid_lite}});
  for (const auto& p : published_reference_rows())
    j["reference"].push_back({{"arm", p.arm}, {"ssim", p.ssim}, {"lpips", p.lpips}, {"fid", p.fid}});
  j["ordering_holds"] = ordering_holds();
  return j;
}

std::string AblationTable::to_markdown() const {
  auto fmt = [](double v, const char* spec) {
    char buf[64];
    std::snprintf(buf, sizeof buf, spec, v);
    return std::string(buf);
  };
  std::string md = "# Ablation\n\nDesk-scale toy benchmark, seeds:";
  for (auto s : seeds) md += " " + std::to_string(s);
  md += "\n\n| arm | metric |";
  for (auto s : seeds) md += " seed " + std::to_string(s) + " |";
  md += " mean |\n|---|---|";
  for (std::size_t i = 0; i <= seeds.size(); ++i) md += "---|";
  md += "\n";
  for (const auto& r : rows) {
    md += "| " + r.arm + " | SSIM |";
    for (double v : r.ssim) md += " " + fmt(v, "%.4f") + " |";
    md += " " + fmt(r.mean_ssim, "%.4f") + " |\n| " + r.arm + " | fid_lite |";
    for (double v : r.fid_lite) md += " " + fmt(v, "%.4f") + " |";
    md += " " + fmt(r.mean_fid_lite, "%.4f") + " |\n";
  }
  md += "\nOrdering ours >= end_to_end (SSIM) and ours <= end_to_end (fid_lite): ";
  md += ordering_holds() ? "holds\n" : "does not hold\n";
  md += "\n## Published reference (full-scale data, Inception FID and LPIPS; not comparable)\n\n";
  md += "| arm | SSIM | LPIPS | FID |\n|---|---|---|---|\n";
  for (const auto& p : published_reference_rows())
    md += "| " + p.arm + " | " + fmt(p.ssim, "%.2f") + " | " + fmt(p.lpips, "%.2f") + " | " + fmt(p.fid, "%.2f") + " |\n";
  return md;
}

AblationResult run_ablation(const TrainingData& train, const TrainingData& test, const AblationConfig& cfg,
                            const ProgressFn& progress) {
  if (cfg.seeds.empty()) throw ParameterError("ablation needs at least one seed");
  if (cfg.pretrain_steps < 1 || cfg.corrector_steps < 1) throw ParameterError("ablation step budgets must be >= 1");
  auto say = [&progress](const std::string& s) {
    if (progress) progress(s);
  };
  const std::vector<Image> targets = tensor_to_images(test.gt);

  AblationResult result;
  result.table.seeds = cfg.seeds;
  AblationRow e2e{"end_to_end", {}, {}}, nocorr{"no_corrector", {}, {}}, ours{"ours", {}, {}};
  auto score = [&](AblationRow& row, const Checkpoint& ckpt) {
    const MetricReport m = score_outputs(infer_all(ckpt, test), targets);
    row.ssim.push_back(m.ssim);
    row.fid_lite.push_back(m.fid_lite);
  };

  for (auto seed : cfg.seeds) {
    AblationSeedRuns runs;
    runs.seed = seed;
    TrainConfig c = cfg.base;
    c.seed = seed;
    auto run_for = [&](Stage stage, int64_t steps) {
      c.stage = stage;
      c.steps = steps;
      say("seed " + std::to_string(seed) + ": " + std::string(to_string(stage)) + " (" + std::to_string(steps) +
          " steps)");
      return c;
    };
    TrainResult a_in = pretrain_autoencoder(train, run_for(Stage::pretrain_input, cfg.pretrain_steps));
    TrainResult a_gt = pretrain_autoencoder(train, run_for(Stage::pretrain_gt, cfg.pretrain_steps));
    const LatentCache cache = cache_latents(a_in.checkpoint, train);
    TrainResult b = train_corrector(a_in.checkpoint, a_gt.checkpoint, &cache, train,
                                    run_for(Stage::corrector, cfg.corrector_steps));
    score(ours, b.checkpoint);
    TrainResult nc = train_without_corrector(a_in.checkpoint, a_gt.checkpoint, train,
                                             run_for(Stage::no_corrector, cfg.corrector_steps));
    score(nocorr, nc.checkpoint);
    TrainResult e = train_end_to_end(train, run_for(Stage::end_to_end, 2 * cfg.pretrain_steps + cfg.corrector_steps));
    score(e2e, e.checkpoint);
    runs.pretrain_input = std::move(a_in.record);
    runs.pretrain_gt = std::move(a_gt.record);
    runs.corrector = std::move(b.record);
    runs.no_corrector = std::move(nc.record);
    runs.end_to_end = std::move(e.record);
    result.runs.push_back(std::move(runs));
  }
  for (AblationRow* r : {&e2e, &nocorr, &ours}) {
    const double n = static_cast<double>(r->ssim.size());
    r->mean_ssim = std::accumulate(r->ssim.begin(), r->ssim.end(), 0.0) / n;
    r->mean_fid_lite = std::accumulate(r->fid_lite.begin(), r->fid_lite.end(), 0.0) / n;
  }
  result.table.rows = {e2e, nocorr, ours};
  return result;
}

}  // namespace texunwarp
