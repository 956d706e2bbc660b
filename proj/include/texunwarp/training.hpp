#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "json.hpp"

#include "texunwarp/checkpoint.hpp"
#include "texunwarp/datagen.hpp"
#include "texunwarp/losses.hpp"
#include "texunwarp/model.hpp"

namespace texunwarp {

struct TrainConfig {
  Stage stage = Stage::pretrain_input;
  int64_t steps = 700;
  int64_t batch = 8;
  double lr = 1e-3;
  double beta1 = 0.0;
  double beta2 = 0.99;
  std::uint64_t seed = 0;
  /// Scale the KL terms by 1 / (elements per image) so they are per-element
  /// like the reconstruction term.
  bool per_element_kl = true;
  /// Scale b of the Laplace likelihood behind the L1 reconstruction term;
  /// recon / b + KL is minimized as recon + b * KL.
  double recon_scale = 0.1;
  LossConfig loss;
  ModelConfig model;

  void validate() const;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

/// Dataset as batched tensors. `normal` holds the decoded normals in [-1, 1].
struct TrainingData {
  std::vector<std::string> ids;
  torch::Tensor input;   ///< [N, 3, R, R]
  torch::Tensor normal;  ///< [N, 3, R, R]
  torch::Tensor gt;      ///< [N, 3, C, C]

  int64_t size() const { return static_cast<int64_t>(ids.size()); }
  TrainingData slice(int64_t begin, int64_t end) const;
  static TrainingData from_samples(std::span<const Sample> samples);
};

/// Train/test split: the last fifth of the samples (at least two, so set
/// metrics stay defined) is held out.
struct DataSplit {
  TrainingData train;
  TrainingData test;
};
DataSplit split_dataset(const TrainingData& data);

/// The network set of one stage. Unused members stay null.
struct Networks {
  Stage stage = Stage::pretrain_input;
  ModelConfig model;
  GarmentEncoder encoder{nullptr};
  NormalEncoder normal_encoder{nullptr};
  DistortionCorrector corrector{nullptr};
  TextureGenerator generator{nullptr};
  MultiScaleDiscriminator discriminator{nullptr};

  /// Fresh, randomly initialised networks for `stage` (uses the global torch RNG).
  static Networks create(Stage stage, const ModelConfig& model);

  /// Parameters of the present modules, prefixed "encoder.", "normal_encoder.",
  /// "corrector.", "generator." and "discriminator.".
  std::vector<std::pair<std::string, torch::Tensor>> named_parameters() const;
  std::vector<torch::Tensor> parameters(std::initializer_list<std::string_view> prefixes) const;

  bool has_corrector() const { return !corrector.is_empty(); }
  void train(bool on);

  /// Texture latents for a batch of input images and decoded normals. Input
  /// latents enter the corrector through their means.
  GarmentLatents translate(const torch::Tensor& input, const torch::Tensor& normal);
  GarmentLatents translate(const GarmentLatents& input_latents, const torch::Tensor& normal);

  /// Deterministic inference from posterior means; [B, 3, C, C] in [0, 1].
  torch::Tensor infer(const torch::Tensor& input, const torch::Tensor& normal);
};

Checkpoint to_checkpoint(const Networks& nets, const nlohmann::json& config,
                         std::initializer_list<std::string_view> frozen_prefixes = {},
                         const torch::Tensor& rng_state = {});
Networks networks_from_checkpoint(const Checkpoint& ckpt);

/// Single-image inference through any trained variant.
Image infer(const Checkpoint& ckpt, const Image& input_image, const Image& normal_map);

/// Input-side posterior parameters of every sample, keyed by the digest of
/// the encoder they came from.
struct LatentCache {
  std::string encoder_digest;
  std::vector<std::string> ids;
  GarmentLatents latents;  ///< batch dimension = samples

  GarmentLatents gather(const torch::Tensor& index) const;
  bool valid_for(const Checkpoint& input_ckpt) const;
};

LatentCache cache_latents(const Checkpoint& input_ckpt, const TrainingData& data);

struct RunRecord {
  nlohmann::json config;
  std::vector<LossReport> losses;
  double wall_seconds = 0.0;
  std::string checkpoint_path;

  nlohmann::json to_json() const;  ///< without the per-step losses
};

struct TrainResult {
  Checkpoint checkpoint;
  RunRecord record;
};

/// Stage A: encoder + generator + discriminator reconstructing the masked input
/// (side input) or the GT crop (side gt).
TrainResult pretrain_autoencoder(const TrainingData& data, const TrainConfig& cfg);

/// Stage B: new normal encoder and corrector against the frozen input encoder
/// and GT generator; the GT discriminator keeps training. Throws
/// FreezeViolation if a frozen tensor changes.
TrainResult train_corrector(const Checkpoint& ckpt_input, const Checkpoint& ckpt_gt, const LatentCache* cache,
                            const TrainingData& data, const TrainConfig& cfg);

/// Every network from scratch under the stage-B objective.
TrainResult train_end_to_end(const TrainingData& data, const TrainConfig& cfg);

/// Pretrained input encoder wired straight into the pretrained GT generator, all updated.
TrainResult train_without_corrector(const Checkpoint& ckpt_input, const Checkpoint& ckpt_gt,
                                    const TrainingData& data, const TrainConfig& cfg);

/// Writes config.json, losses.jsonl, ckpt_<stage>.bin and run_record.json.
void write_run(const std::filesystem::path& dir, TrainResult& result, const nlohmann::json& resolved_config);

/// Exponential moving average with smoothing 2 / (window + 1).
std::vector<double> ema(std::span<const double> values, int window = 50);

/// Caps intra-op threads from DEEPIRON_THREADS (default 1).
void configure_threads();

}  // namespace texunwarp
