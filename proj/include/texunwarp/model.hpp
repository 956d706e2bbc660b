#pragma once

#include <span>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "json.hpp"

#include "texunwarp/image.hpp"

namespace texunwarp {

/// Network dimensions. Latent tensors are channel-first: a content code of
/// grid N1 and depth D1 is stored as [B, D1, N1, N1].
struct ModelConfig {
  int64_t content_grid = 8;       ///< N1
  int64_t content_channels = 16;  ///< D1
  int64_t normal_grid = 8;        ///< N2
  int64_t style_dim = 64;         ///< D2, also the normal-code depth
  int64_t resolution = 64;        ///< R, input and normal image side
  int64_t crop_size = 64;         ///< C, generated texture side
  int64_t gen_levels = 3;         ///< upsampling levels, N1 * 2^levels == C
  int64_t disc_scales = 2;
  int64_t disc_patch = 8;         ///< patch stride of each discriminator scale
  double norm_epsilon = 1e-5;
  int64_t width = 32;             ///< base channel width

  void validate() const;
  int64_t disc_grid(int64_t scale) const { return (crop_size >> scale) / disc_patch; }
  bool operator==(const ModelConfig&) const = default;
};

void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);

enum class LatentKind { content, style, normal };

/// Diagonal Gaussian posterior parameters for one latent code.
struct GaussianLatent {
  torch::Tensor mu;
  torch::Tensor log_sigma;
  LatentKind kind = LatentKind::content;
};

struct GarmentLatents {
  GaussianLatent content;
  GaussianLatent style;
};

/// Per-scale patch logit grids, finest scale first.
using DiscOutput = std::vector<torch::Tensor>;

/// Shape of one sample's latent under `cfg` (no batch dimension).
std::vector<int64_t> latent_shape(LatentKind kind, const ModelConfig& cfg);
void check_latent(const GaussianLatent& latent, const ModelConfig& cfg);

/// z = mu + exp(log_sigma) * noise, with a hand-written backward.
torch::Tensor reparameterize(const torch::Tensor& mu, const torch::Tensor& log_sigma, const torch::Tensor& noise);
torch::Tensor reparameterize(const GaussianLatent& latent, const torch::Tensor& noise);

/// alpha * (m - mean(m)) / (std(m) + eps) + gamma per sample and channel, using
/// the population std over spatial positions. m is [B, C, H, W], alpha and
/// gamma are [B, C]. Hand-written backward; constant channels map to gamma.
torch::Tensor adain(const torch::Tensor& m, const torch::Tensor& alpha, const torch::Tensor& gamma, double eps);

/// Size matching of the fusing module: the style vector is broadcast over the
/// content grid, the normal code is bilinearly resized to it, and the three
/// are concatenated as [normal, style, content] along channels.
torch::Tensor match_and_concat(const torch::Tensor& z_normal, const torch::Tensor& z_style,
                               const torch::Tensor& z_content);

// ---------------------------------------------------------------------------

class GarmentEncoderImpl : public torch::nn::Module {
 public:
  explicit GarmentEncoderImpl(const ModelConfig& cfg);
  GarmentLatents forward(const torch::Tensor& image);

 private:
  ModelConfig cfg_;
  torch::nn::Sequential trunk_{nullptr};
  torch::nn::Conv2d content_head_{nullptr};
  torch::nn::Linear style_head_{nullptr};
};
TORCH_MODULE(GarmentEncoder);

/// Deterministic encoder of the normal map into [B, D2, N2, N2].
class NormalEncoderImpl : public torch::nn::Module {
 public:
  explicit NormalEncoderImpl(const ModelConfig& cfg);
  torch::Tensor forward(const torch::Tensor& normal);

 private:
  ModelConfig cfg_;
  torch::nn::Sequential trunk_{nullptr};
  torch::nn::Conv2d head_{nullptr};
};
TORCH_MODULE(NormalEncoder);

/// Translates input-image latents into texture latents given the normal code.
class DistortionCorrectorImpl : public torch::nn::Module {
 public:
  explicit DistortionCorrectorImpl(const ModelConfig& cfg);

  /// Two 3x3 convolutions over the size-matched concatenation -> [B, D2, N1, N1].
  torch::Tensor fuse(const torch::Tensor& z_normal, const torch::Tensor& z_style, const torch::Tensor& z_content);
  /// Conv head for the content posterior, pooled linear head for the style posterior.
  GarmentLatents correct(const torch::Tensor& fused);
  GarmentLatents forward(const torch::Tensor& z_normal, const torch::Tensor& z_style, const torch::Tensor& z_content);

  torch::nn::Conv2d fuse1{nullptr}, fuse2{nullptr}, content_head{nullptr};
  torch::nn::Linear style_head{nullptr};

 private:
  ModelConfig cfg_;
};
TORCH_MODULE(DistortionCorrector);

/// Progressive upsampling generator: conv -> AdaIN -> leaky ReLU at every
/// level, per-level affine maps from the style code, sigmoid RGB output.
class TextureGeneratorImpl : public torch::nn::Module {
 public:
  explicit TextureGeneratorImpl(const ModelConfig& cfg);
  torch::Tensor forward(const torch::Tensor& z_content, const torch::Tensor& z_style);

 private:
  ModelConfig cfg_;
  std::vector<int64_t> channels_;
  torch::nn::ModuleList convs_{nullptr};
  torch::nn::ModuleList styles_{nullptr};
  torch::nn::Conv2d to_rgb_{nullptr};
};
TORCH_MODULE(TextureGenerator);

class PatchDiscriminatorImpl : public torch::nn::Module {
 public:
  PatchDiscriminatorImpl(const ModelConfig& cfg);
  torch::Tensor forward(const torch::Tensor& image);

 private:
  torch::nn::Sequential net_{nullptr};
};
TORCH_MODULE(PatchDiscriminator);

/// One patch discriminator per scale; scale s sees the image average-pooled by 2^s.
class MultiScaleDiscriminatorImpl : public torch::nn::Module {
 public:
  explicit MultiScaleDiscriminatorImpl(const ModelConfig& cfg);
  DiscOutput forward(const torch::Tensor& image);

 private:
  ModelConfig cfg_;
  torch::nn::ModuleList scales_{nullptr};
};
TORCH_MODULE(MultiScaleDiscriminator);

// ---------------------------------------------------------------------------

/// [N, 3, H, W] float tensor from HWC images of equal shape.
torch::Tensor images_to_tensor(std::span<const Image> images);
torch::Tensor image_to_tensor(const Image& image);
std::vector<Image> tensor_to_images(const torch::Tensor& batch);

/// Normal maps are fed to the network decoded into [-1, 1].
torch::Tensor decode_normals(const torch::Tensor& encoded);

}  // namespace texunwarp
