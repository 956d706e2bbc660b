#pragma once

#include <map>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "json.hpp"

#include "texunwarp/model.hpp"

namespace texunwarp {

enum class ReconKind { l1, l2 };
enum class AdversarialKind { nonsaturating };

struct LossConfig {
  double beta = 1.0;             ///< KL weight
  ReconKind recon = ReconKind::l1;
  AdversarialKind adv = AdversarialKind::nonsaturating;
  double r1_weight = 1.0;
  double lambda_l1 = 10.0;       ///< weight of the pixel L1 term in the corrector objective
  double adv_weight = 1.0;       ///< weight of the generator's adversarial term in the corrector objective
  double pretrain_adv_weight = 3.0;  ///< same, in the stage-A autoencoder objective

  void validate() const;
};

void to_json(nlohmann::json& j, const LossConfig& c);
void from_json(const nlohmann::json& j, LossConfig& c);

/// Scalar snapshot of one objective evaluation. `total` is the weighted sum
/// of the components.
struct LossReport {
  double total = 0.0;
  std::map<std::string, double> components;
  std::map<std::string, double> weights;

  double weighted_sum() const;
  nlohmann::json to_json() const;
};

/// Differentiable objective with its named, weighted terms.
struct LossTerms {
  torch::Tensor total;
  std::vector<std::tuple<std::string, double, torch::Tensor>> terms;

  void add(std::string name, double weight, torch::Tensor value);
  /// Logged but excluded from `total` (weight 0).
  void note(std::string name, torch::Tensor value);
  LossReport report() const;
};

/// Sum over latent dimensions of 0.5 (mu^2 + sigma^2 - 1 - log sigma^2),
/// averaged over the batch. Hand-written backward; throws NumericError on
/// non-finite input.
torch::Tensor kl_divergence(const GaussianLatent& latent);

/// Mean |x_hat - x| or mean (x_hat - x)^2.
torch::Tensor recon_loss(const torch::Tensor& x_hat, const torch::Tensor& x, ReconKind kind);

/// Negative ELBO: recon + beta * kl_scale * (kl_content + kl_style). A
/// kl_scale of 1 is the plain sum; training passes 1 / (elements per image)
/// so both terms are per-element.
LossTerms vae_loss(const GarmentLatents& latents, const torch::Tensor& x_hat, const torch::Tensor& x,
                   const LossConfig& cfg, double kl_scale = 1.0);

struct AdversarialLosses {
  torch::Tensor generator;      ///< mean softplus(-fake)
  torch::Tensor discriminator;  ///< mean softplus(-real) + mean softplus(fake)
};

torch::Tensor generator_adversarial_loss(const DiscOutput& fake);
torch::Tensor discriminator_adversarial_loss(const DiscOutput& real, const DiscOutput& fake);
AdversarialLosses adversarial_losses(const DiscOutput& real, const DiscOutput& fake);

/// 0.5 * E ||d(sum of real logits)/d real||^2. `real_images` must require grad
/// and `real_logits` must be computed from it.
torch::Tensor r1_penalty(const DiscOutput& real_logits, const torch::Tensor& real_images);

/// vae_loss + adv_weight * adversarial generator term + lambda_l1 * mean|x_hat - x|.
LossTerms corrector_loss(const GarmentLatents& latents, const torch::Tensor& x_hat, const torch::Tensor& x,
                         const torch::Tensor& generator_adv, const LossConfig& cfg, double kl_scale = 1.0);

}  // namespace texunwarp
