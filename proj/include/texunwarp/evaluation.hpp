#pragma once

#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "texunwarp/checkpoint.hpp"
#include "texunwarp/image.hpp"
#include "texunwarp/training.hpp"

namespace texunwarp {

struct MetricReport {
  double ssim = 0.0;
  double fid_lite = 0.0;
  bool fid_regularized = false;
  std::vector<double> per_sample_ssim;
  int64_t sample_count = 0;
  std::string checkpoint_id;
  std::string dataset_id;

  void validate() const;
  bool operator==(const MetricReport&) const = default;
};

void to_json(nlohmann::json& j, const MetricReport& r);
void from_json(const nlohmann::json& j, MetricReport& r);

/// Mean pairwise SSIM and fid_lite between `outputs` and `targets`.
MetricReport score_outputs(std::span<const Image> outputs, std::span<const Image> targets);

/// Deterministic inference over every sample of `data`.
std::vector<Image> infer_all(const Checkpoint& ckpt, const TrainingData& data);

MetricReport evaluate_model(const Checkpoint& ckpt, const TrainingData& test, const std::string& dataset_id = {});

/// Rows: input | result | gt, one sample per row, each tile C x C.
Image figure_grid(std::span<const Image> inputs, std::span<const Image> outputs, std::span<const Image> targets);
void emit_figure_grid(std::span<const Image> inputs, std::span<const Image> outputs, std::span<const Image> targets,
                      const std::filesystem::path& path);

struct AblationRow {
  std::string arm;  ///< end_to_end, no_corrector or ours
  std::vector<double> ssim;
  std::vector<double> fid_lite;
  double mean_ssim = 0.0;
  double mean_fid_lite = 0.0;
};

struct PublishedReferenceRow {
  std::string arm;
  double ssim, lpips, fid;
};

/// Published full-scale numbers, recorded next to desk-scale results for context.
const std::vector<PublishedReferenceRow>& published_reference_rows();

struct AblationTable {
  std::vector<std::uint64_t> seeds;
  std::vector<AblationRow> rows;  ///< end_to_end, no_corrector, ours

  const AblationRow& row(std::string_view arm) const;
  /// ours >= end_to_end on mean SSIM and ours <= end_to_end on mean fid_lite.
  bool ordering_holds() const;
  nlohmann::json to_json() const;
  std::string to_markdown() const;
};

struct AblationSeedRuns {
  std::uint64_t seed = 0;
  RunRecord pretrain_input, pretrain_gt, corrector, end_to_end, no_corrector;
};

struct AblationResult {
  AblationTable table;
  std::vector<AblationSeedRuns> runs;
};

struct AblationConfig {
  TrainConfig base;              ///< batch, lr, losses and model
  int64_t pretrain_steps = 400;  ///< A
  int64_t corrector_steps = 400; ///< B; end-to-end gets 2A + B, no-corrector B
  std::vector<std::uint64_t> seeds{0, 1, 2};
};

using ProgressFn = std::function<void(const std::string&)>;

/// Trains and scores all three arms per seed under equal step budgets.
AblationResult run_ablation(const TrainingData& train, const TrainingData& test, const AblationConfig& cfg,
                            const ProgressFn& progress = {});

}  // namespace texunwarp
