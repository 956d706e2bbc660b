#include "texunwarp/losses.hpp"

#include <cmath>

#include "texunwarp/error.hpp"

namespace texunwarp {

using torch::autograd::AutogradContext;
using torch::autograd::variable_list;

namespace {

struct KlFn : torch::autograd::Function<KlFn> {
  static torch::Tensor forward(AutogradContext* ctx, const torch::Tensor& mu, const torch::Tensor& log_sigma) {
    const double batch = mu.dim() > 0 ? static_cast<double>(mu.size(0)) : 1.0;
    const torch::Tensor var = (2.0 * log_sigma).exp();
    ctx->save_for_backward({mu, var});
    ctx->saved_data["batch"] = batch;
    return 0.5 * (mu.square() + var - 1.0 - 2.0 * log_sigma).sum() / batch;
  }
  static variable_list backward(AutogradContext* ctx, variable_list grads) {
    const auto saved = ctx->get_saved_variables();
    const double batch = ctx->saved_data["batch"].toDouble();
    const torch::Tensor g = grads[0] / batch;
    // d/dmu = mu, d/dlog_sigma = sigma^2 - 1
    return {g * saved[0], g * (saved[1] - 1.0)};
  }
};

double scalar(const torch::Tensor& t) { return t.detach().to(torch::kFloat64).item<double>(); }

}  // namespace

void LossConfig::validate() const {
  for (double w : {beta, r1_weight, lambda_l1, adv_weight, pretrain_adv_weight})
    if (!(w >= 0.0) || !std::isfinite(w)) throw ParameterError("loss weights must be finite and >= 0");
}

void to_json(nlohmann::json& j, const LossConfig& c) {
  j = nlohmann::json{{"beta", c.beta},
                     {"recon", c.recon == ReconKind::l1 ? "l1" : "l2"},
                     {"adv", "nonsaturating"},
                     {"r1_weight", c.r1_weight},
                     {"lambda_l1", c.lambda_l1},
                     {"adv_weight", c.adv_weight},
                     {"pretrain_adv_weight", c.pretrain_adv_weight}};
}

void from_json(const nlohmann::json& j, LossConfig& c) {
  const LossConfig d;
  c.beta = j.value("beta", d.beta);
  const std::string recon = j.value("recon", std::string("l1"));
  if (recon != "l1" && recon != "l2") throw ParameterError("recon must be l1 or l2");
  c.recon = recon == "l1" ? ReconKind::l1 : ReconKind::l2;
  if (j.value("adv", std::string("nonsaturating")) != "nonsaturating")
    throw ParameterError("only the nonsaturating adversarial loss is supported");
  c.r1_weight = j.value("r1_weight", d.r1_weight);
  c.lambda_l1 = j.value("lambda_l1", d.lambda_l1);
  c.adv_weight = j.value("adv_weight", d.adv_weight);
  c.pretrain_adv_weight = j.value("pretrain_adv_weight", d.pretrain_adv_weight);
}

double LossReport::weighted_sum() const {
  double sum = 0.0;
  for (const auto& [name, value] : components) sum += weights.at(name) * value;
  return sum;
}

nlohmann::json LossReport::to_json() const {
  nlohmann::json j = components;
  j["total"] = total;
  return j;
}

void LossTerms::add(std::string name, double weight, torch::Tensor value) {
  total = total.defined() ? total + weight * value : weight * value;
  terms.emplace_back(std::move(name), weight, std::move(value));
}

void LossTerms::note(std::string name, torch::Tensor value) { terms.emplace_back(std::move(name), 0.0, std::move(value)); }

LossReport LossTerms::report() const {
  LossReport r;
  for (const auto& [name, weight, value] : terms) {
    r.components[name] = scalar(value);
    r.weights[name] = weight;
  }
  r.total = r.weighted_sum();
  return r;
}

torch::Tensor kl_divergence(const GaussianLatent& latent) {
  if (!latent.mu.sizes().equals(latent.log_sigma.sizes())) throw ShapeError("kl: mu and log_sigma differ in shape");
  if (!torch::isfinite(latent.mu).all().item<bool>() || !torch::isfinite(latent.log_sigma).all().item<bool>())
    throw NumericError("kl_divergence received non-finite latent parameters");
  return KlFn::apply(latent.mu, latent.log_sigma);
}

torch::Tensor recon_loss(const torch::Tensor& x_hat, const torch::Tensor& x, ReconKind kind) {
  if (!x_hat.sizes().equals(x.sizes())) throw ShapeError("reconstruction shapes differ");
  return kind == ReconKind::l1 ? (x_hat - x).abs().mean() : (x_hat - x).square().mean();
}

LossTerms vae_loss(const GarmentLatents& latents, const torch::Tensor& x_hat, const torch::Tensor& x,
                   const LossConfig& cfg, double kl_scale) {
  LossTerms t;
  t.add("recon", 1.0, recon_loss(x_hat, x, cfg.recon));
  t.add("kl_content", cfg.beta * kl_scale, kl_divergence(latents.content));
  t.add("kl_style", cfg.beta * kl_scale, kl_divergence(latents.style));
  return t;
}

namespace {
torch::Tensor mean_over_scales(const DiscOutput& out, const std::function<torch::Tensor(const torch::Tensor&)>& f) {
  if (out.empty()) throw ShapeError("discriminator output has no scales");
  torch::Tensor sum;
  for (const auto& logits : out) sum = sum.defined() ? sum + f(logits).mean() : f(logits).mean();
  return sum / static_cast<double>(out.size());
}

void check_scales(const DiscOutput& a, const DiscOutput& b) {
  if (a.size() != b.size()) throw ShapeError("real and fake discriminator outputs have different scale counts");
  for (std::size_t i = 0; i < a.size(); ++i)
    if (!a[i].sizes().slice(1).equals(b[i].sizes().slice(1)))
      throw ShapeError("real and fake patch grids differ at scale " + std::to_string(i));
}
}  // namespace

torch::Tensor generator_adversarial_loss(const DiscOutput& fake) {
  return mean_over_scales(fake, [](const torch::Tensor& l) { return torch::softplus(-l); });
}

torch::Tensor discriminator_adversarial_loss(const DiscOutput& real, const DiscOutput& fake) {
  check_scales(real, fake);
  return mean_over_scales(real, [](const torch::Tensor& l) { return torch::softplus(-l); }) +
         mean_over_scales(fake, [](const torch::Tensor& l) { return torch::softplus(l); });
}

AdversarialLosses adversarial_losses(const DiscOutput& real, const DiscOutput& fake) {
  return {generator_adversarial_loss(fake), discriminator_adversarial_loss(real, fake)};
}

torch::Tensor r1_penalty(const DiscOutput& real_logits, const torch::Tensor& real_images) {
  torch::Tensor sum;
  for (const auto& l : real_logits) sum = sum.defined() ? sum + l.sum() : l.sum();
  const auto grads = torch::autograd::grad({sum}, {real_images}, {}, /*retain_graph=*/true, /*create_graph=*/true);
  return 0.5 * grads[0].square().sum({1, 2, 3}).mean();
}

LossTerms corrector_loss(const GarmentLatents& latents, const torch::Tensor& x_hat, const torch::Tensor& x,
                         const torch::Tensor& generator_adv, const LossConfig& cfg, double kl_scale) {
  LossTerms t = vae_loss(latents, x_hat, x, cfg, kl_scale);
  t.add("adv_g", cfg.adv_weight, generator_adv);
  t.add("l1", cfg.lambda_l1, (x_hat - x).abs().mean());
  return t;
}

}  // namespace texunwarp
