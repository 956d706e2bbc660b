#include "texunwarp/model.hpp"

#include <bit>

#include "texunwarp/error.hpp"

namespace texunwarp {

namespace F = torch::nn::functional;
using torch::autograd::AutogradContext;
using torch::autograd::variable_list;

namespace {
constexpr double kSlope = 0.2;
constexpr double kLogSigmaMin = -10.0;
constexpr double kLogSigmaMax = 5.0;

bool power_of_two(int64_t v) { return v > 0 && std::has_single_bit(static_cast<uint64_t>(v)); }
int64_t log2_exact(int64_t v) { return static_cast<int64_t>(std::countr_zero(static_cast<uint64_t>(v))); }

std::string shape_str(const torch::Tensor& t) {
  std::string s = "[";
  for (int64_t i = 0; i < t.dim(); ++i) s += (i ? "," : "") + std::to_string(t.size(i));
  return s + "]";
}

void expect_image(const torch::Tensor& t, int64_t side, const char* what) {
  if (t.dim() != 4 || t.size(1) != 3 || t.size(2) != side || t.size(3) != side)
    throw ShapeError(std::string(what) + " expects [B,3," + std::to_string(side) + "," + std::to_string(side) +
                     "], got " + shape_str(t));
}

torch::Tensor lrelu(const torch::Tensor& x) { return torch::leaky_relu(x, kSlope); }

/// Stride-2 3x3 conv stack from `side` down to `grid`; returns the output width.
torch::nn::Sequential make_trunk(int64_t side, int64_t grid, int64_t width, int64_t& out_channels) {
  torch::nn::Sequential seq;
  int64_t ch = std::max<int64_t>(1, width / 2);
  seq->push_back(torch::nn::Conv2d(torch::nn::Conv2dOptions(3, ch, 3).padding(1)));
  seq->push_back(torch::nn::LeakyReLU(torch::nn::LeakyReLUOptions().negative_slope(kSlope)));
  for (int64_t s = side; s > grid; s /= 2) {
    const int64_t next = std::min(ch * 2, 2 * width);
    seq->push_back(torch::nn::Conv2d(torch::nn::Conv2dOptions(ch, next, 3).stride(2).padding(1)));
    seq->push_back(torch::nn::LeakyReLU(torch::nn::LeakyReLUOptions().negative_slope(kSlope)));
    ch = next;
  }
  out_channels = ch;
  return seq;
}

GaussianLatent split_gaussian(const torch::Tensor& t, LatentKind kind) {
  auto parts = t.chunk(2, 1);
  return {parts[0], parts[1].clamp(kLogSigmaMin, kLogSigmaMax), kind};
}

// --- hand-written autograd functions --------------------------------------

struct ReparameterizeFn : torch::autograd::Function<ReparameterizeFn> {
  static torch::Tensor forward(AutogradContext* ctx, const torch::Tensor& mu, const torch::Tensor& log_sigma,
                               const torch::Tensor& noise) {
    const torch::Tensor sigma = log_sigma.exp();
    ctx->save_for_backward({sigma, noise});
    return mu + sigma * noise;
  }
  static variable_list backward(AutogradContext* ctx, variable_list grads) {
    const auto saved = ctx->get_saved_variables();
    const torch::Tensor& g = grads[0];
    // dz/dmu = 1, dz/dlog_sigma = sigma * noise, dz/dnoise = sigma
    return {g, g * saved[0] * saved[1], g * saved[0]};
  }
};

struct AdainFn : torch::autograd::Function<AdainFn> {
  static torch::Tensor forward(AutogradContext* ctx, const torch::Tensor& m, const torch::Tensor& alpha,
                               const torch::Tensor& gamma, double eps) {
    const torch::Tensor centered = m - m.mean({2, 3}, true);
    const torch::Tensor sigma = centered.square().mean({2, 3}, true).sqrt();
    const torch::Tensor s = sigma + eps;
    const torch::Tensor normalized = centered / s;
    ctx->save_for_backward({normalized, sigma, s, alpha});
    return alpha.unsqueeze(-1).unsqueeze(-1) * normalized + gamma.unsqueeze(-1).unsqueeze(-1);
  }
  static variable_list backward(AutogradContext* ctx, variable_list grads) {
    const auto saved = ctx->get_saved_variables();
    const torch::Tensor& normalized = saved[0];
    const torch::Tensor& sigma = saved[1];
    const torch::Tensor& s = saved[2];
    const torch::Tensor& alpha = saved[3];
    const torch::Tensor& g = grads[0];
    const double n = static_cast<double>(normalized.size(2) * normalized.size(3));

    const torch::Tensor grad_gamma = g.sum({2, 3});
    const torch::Tensor grad_alpha = (g * normalized).sum({2, 3});
    const torch::Tensor gx = g * alpha.unsqueeze(-1).unsqueeze(-1);
    // d sigma / d m_j = centered_j / (n sigma); vanishes for constant channels
    const torch::Tensor projection = (gx * normalized).sum({2, 3}, true);
    const torch::Tensor coef =
        torch::where(sigma > 0, projection / (n * sigma.clamp_min(1e-30)), torch::zeros_like(sigma));
    const torch::Tensor grad_m = (gx - gx.mean({2, 3}, true)) / s - normalized * coef;
    return {grad_m, grad_alpha, grad_gamma, torch::Tensor()};
  }
};

}  // namespace

// ---------------------------------------------------------------------------

void ModelConfig::validate() const {
  for (int64_t g : {content_grid, normal_grid})
    if (!power_of_two(g) || resolution % g != 0 || g > resolution)
      throw ParameterError("latent grids must be powers of two dividing the resolution");
  if (!power_of_two(resolution)) throw ParameterError("resolution must be a power of two");
  if (content_channels < 1 || style_dim < 1) throw ParameterError("latent depths must be >= 1");
  if (gen_levels < 0 || (content_grid << gen_levels) != crop_size)
    throw ParameterError("content_grid * 2^gen_levels must equal crop_size");
  if (disc_scales < 1 || !power_of_two(disc_patch) || disc_patch < 2)
    throw ParameterError("discriminator needs >= 1 scale and a power-of-two patch >= 2");
  if ((crop_size >> (disc_scales - 1)) < disc_patch || (crop_size >> (disc_scales - 1)) % disc_patch != 0)
    throw ParameterError("coarsest discriminator scale is smaller than one patch");
  if (!(norm_epsilon > 0.0)) throw ParameterError("norm_epsilon must be > 0");
  if (width < 2) throw ParameterError("width must be >= 2");
}

void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = nlohmann::json{{"content_grid", c.content_grid}, {"content_channels", c.content_channels},
                     {"normal_grid", c.normal_grid},   {"style_dim", c.style_dim},
                     {"resolution", c.resolution},     {"crop_size", c.crop_size},
                     {"gen_levels", c.gen_levels},     {"disc_scales", c.disc_scales},
                     {"disc_patch", c.disc_patch},     {"norm_epsilon", c.norm_epsilon},
                     {"width", c.width}};
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
  const ModelConfig d;
  c.content_grid = j.value("content_grid", d.content_grid);
  c.content_channels = j.value("content_channels", d.content_channels);
  c.normal_grid = j.value("normal_grid", d.normal_grid);
  c.style_dim = j.value("style_dim", d.style_dim);
  c.resolution = j.value("resolution", d.resolution);
  c.crop_size = j.value("crop_size", d.crop_size);
  c.gen_levels = j.value("gen_levels", d.gen_levels);
  c.disc_scales = j.value("disc_scales", d.disc_scales);
  c.disc_patch = j.value("disc_patch", d.disc_patch);
  c.norm_epsilon = j.value("norm_epsilon", d.norm_epsilon);
  c.width = j.value("width", d.width);
}

std::vector<int64_t> latent_shape(LatentKind kind, const ModelConfig& cfg) {
  switch (kind) {
    case LatentKind::content: return {cfg.content_channels, cfg.content_grid, cfg.content_grid};
    case LatentKind::style: return {cfg.style_dim};
    case LatentKind::normal: return {cfg.style_dim, cfg.normal_grid, cfg.normal_grid};
  }
  return {};
}

void check_latent(const GaussianLatent& latent, const ModelConfig& cfg) {
  const auto want = latent_shape(latent.kind, cfg);
  for (const torch::Tensor* t : {&latent.mu, &latent.log_sigma}) {
    if (!t->defined() || t->dim() != static_cast<int64_t>(want.size()) + 1)
      throw ShapeError("latent has rank " + (t->defined() ? shape_str(*t) : std::string("<undefined>")));
    for (std::size_t i = 0; i < want.size(); ++i)
      if (t->size(static_cast<int64_t>(i) + 1) != want[i]) throw ShapeError("latent shape mismatch: " + shape_str(*t));
  }
}

torch::Tensor reparameterize(const torch::Tensor& mu, const torch::Tensor& log_sigma, const torch::Tensor& noise) {
  if (!mu.sizes().equals(log_sigma.sizes()) || !mu.sizes().equals(noise.sizes()))
    throw ShapeError("reparameterize needs mu, log_sigma and noise of one shape");
  return ReparameterizeFn::apply(mu, log_sigma, noise);
}

torch::Tensor reparameterize(const GaussianLatent& latent, const torch::Tensor& noise) {
  return reparameterize(latent.mu, latent.log_sigma, noise);
}

torch::Tensor adain(const torch::Tensor& m, const torch::Tensor& alpha, const torch::Tensor& gamma, double eps) {
  if (!(eps > 0.0)) throw ParameterError("adain eps must be > 0");
  if (m.dim() != 4) throw ShapeError("adain expects [B,C,H,W], got " + shape_str(m));
  const auto bc = std::vector<int64_t>{m.size(0), m.size(1)};
  if (!alpha.sizes().equals(bc) || !gamma.sizes().equals(bc))
    throw ShapeError("adain alpha/gamma must be [B,C]");
  return AdainFn::apply(m, alpha, gamma, eps);
}

torch::Tensor match_and_concat(const torch::Tensor& z_normal, const torch::Tensor& z_style,
                               const torch::Tensor& z_content) {
  if (z_content.dim() != 4 || z_normal.dim() != 4 || z_style.dim() != 2)
    throw ShapeError("fuse expects content [B,D1,N1,N1], normal [B,D2,N2,N2], style [B,D2]");
  const int64_t b = z_content.size(0), n1 = z_content.size(2);
  if (z_normal.size(0) != b || z_style.size(0) != b) throw ShapeError("fuse batch sizes differ");
  if (z_normal.size(1) != z_style.size(1)) throw ShapeError("normal and style depths differ");
  torch::Tensor normal = z_normal;
  if (z_normal.size(2) != n1 || z_normal.size(3) != n1)
    normal = F::interpolate(z_normal, F::InterpolateFuncOptions()
                                          .size(std::vector<int64_t>{n1, n1})
                                          .mode(torch::kBilinear)
                                          .align_corners(false));
  const torch::Tensor style = z_style.view({b, z_style.size(1), 1, 1}).expand({b, z_style.size(1), n1, n1});
  return torch::cat({normal, style, z_content}, 1);
}

// ---------------------------------------------------------------------------

GarmentEncoderImpl::GarmentEncoderImpl(const ModelConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  int64_t ch = 0;
  trunk_ = register_module("trunk", make_trunk(cfg.resolution, cfg.content_grid, cfg.width, ch));
  content_head_ = register_module(
      "content_head", torch::nn::Conv2d(torch::nn::Conv2dOptions(ch, 2 * cfg.content_channels, 3).padding(1)));
  style_head_ = register_module("style_head", torch::nn::Linear(2 * ch, 2 * cfg.style_dim));
}

GarmentLatents GarmentEncoderImpl::forward(const torch::Tensor& image) {
  expect_image(image, cfg_.resolution, "garment encoder");
  const torch::Tensor features = trunk_->forward(image);
  const torch::Tensor mean = features.mean({2, 3});
  const torch::Tensor spread = (features - features.mean({2, 3}, true)).square().mean({2, 3}).add(1e-8).sqrt();
  return {split_gaussian(content_head_->forward(features), LatentKind::content),
          split_gaussian(style_head_->forward(torch::cat({mean, spread}, 1)), LatentKind::style)};
}

NormalEncoderImpl::NormalEncoderImpl(const ModelConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  int64_t ch = 0;
  trunk_ = register_module("trunk", make_trunk(cfg.resolution, cfg.normal_grid, cfg.width, ch));
  head_ = register_module("head", torch::nn::Conv2d(torch::nn::Conv2dOptions(ch, cfg.style_dim, 1)));
}

torch::Tensor NormalEncoderImpl::forward(const torch::Tensor& normal) {
  expect_image(normal, cfg_.resolution, "normal encoder");
  return head_->forward(trunk_->forward(normal));
}

DistortionCorrectorImpl::DistortionCorrectorImpl(const ModelConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  const int64_t in = 2 * cfg.style_dim + cfg.content_channels;
  fuse1 = register_module("fuse1", torch::nn::Conv2d(torch::nn::Conv2dOptions(in, cfg.style_dim, 3).padding(1)));
  fuse2 = register_module("fuse2",
                          torch::nn::Conv2d(torch::nn::Conv2dOptions(cfg.style_dim, cfg.style_dim, 3).padding(1)));
  content_head = register_module(
      "content_head",
      torch::nn::Conv2d(torch::nn::Conv2dOptions(cfg.style_dim, 2 * cfg.content_channels, 3).padding(1)));
  style_head = register_module("style_head", torch::nn::Linear(cfg.style_dim, 2 * cfg.style_dim));
}

torch::Tensor DistortionCorrectorImpl::fuse(const torch::Tensor& z_normal, const torch::Tensor& z_style,
                                            const torch::Tensor& z_content) {
  const auto c = latent_shape(LatentKind::content, cfg_);
  if (z_content.dim() != 4 || z_content.size(1) != c[0] || z_content.size(2) != c[1] || z_content.size(3) != c[2])
    throw ShapeError("content code shape mismatch: " + shape_str(z_content));
  if (z_style.dim() != 2 || z_style.size(1) != cfg_.style_dim) throw ShapeError("style code shape mismatch");
  if (z_normal.dim() != 4 || z_normal.size(1) != cfg_.style_dim) throw ShapeError("normal code shape mismatch");
  return fuse2->forward(lrelu(fuse1->forward(match_and_concat(z_normal, z_style, z_content))));
}

GarmentLatents DistortionCorrectorImpl::correct(const torch::Tensor& fused) {
  if (fused.dim() != 4 || fused.size(1) != cfg_.style_dim || fused.size(2) != cfg_.content_grid ||
      fused.size(3) != cfg_.content_grid)
    throw ShapeError("fused tensor shape mismatch: " + shape_str(fused));
  return {split_gaussian(content_head->forward(fused), LatentKind::content),
          split_gaussian(style_head->forward(fused.mean({2, 3})), LatentKind::style)};
}

GarmentLatents DistortionCorrectorImpl::forward(const torch::Tensor& z_normal, const torch::Tensor& z_style,
                                                const torch::Tensor& z_content) {
  return correct(fuse(z_normal, z_style, z_content));
}

TextureGeneratorImpl::TextureGeneratorImpl(const ModelConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  convs_ = register_module("convs", torch::nn::ModuleList());
  styles_ = register_module("styles", torch::nn::ModuleList());
  int64_t in = cfg.content_channels;
  for (int64_t level = 0; level <= cfg.gen_levels; ++level) {
    const int64_t ch = std::max(cfg.width / 2, (2 * cfg.width) >> std::max<int64_t>(0, level - 1));
    channels_.push_back(ch);
    convs_->push_back(torch::nn::Conv2d(torch::nn::Conv2dOptions(in, ch, 3).padding(1)));
    styles_->push_back(torch::nn::Linear(cfg.style_dim, 2 * ch));
    in = ch;
  }
  to_rgb_ = register_module("to_rgb", torch::nn::Conv2d(torch::nn::Conv2dOptions(in, 3, 1)));
}

torch::Tensor TextureGeneratorImpl::forward(const torch::Tensor& z_content, const torch::Tensor& z_style) {
  const auto c = latent_shape(LatentKind::content, cfg_);
  if (z_content.dim() != 4 || z_content.size(1) != c[0] || z_content.size(2) != c[1] || z_content.size(3) != c[2])
    throw ShapeError("generator content code shape mismatch: " + shape_str(z_content));
  if (z_style.dim() != 2 || z_style.size(1) != cfg_.style_dim || z_style.size(0) != z_content.size(0))
    throw ShapeError("generator style code shape mismatch: " + shape_str(z_style));
  torch::Tensor x = z_content;
  for (std::size_t level = 0; level < channels_.size(); ++level) {
    if (level > 0) x = torch::upsample_nearest2d(x, {x.size(2) * 2, x.size(3) * 2});
    x = convs_[level]->as<torch::nn::Conv2d>()->forward(x);
    const auto st = styles_[level]->as<torch::nn::Linear>()->forward(z_style).chunk(2, 1);
    x = lrelu(adain(x, st[0] + 1.0, st[1], cfg_.norm_epsilon));
  }
  return torch::sigmoid(to_rgb_->forward(x));
}

PatchDiscriminatorImpl::PatchDiscriminatorImpl(const ModelConfig& cfg) {
  torch::nn::Sequential seq;
  int64_t in = 3, ch = std::max<int64_t>(1, cfg.width / 2);
  for (int64_t i = 0; i < log2_exact(cfg.disc_patch); ++i) {
    seq->push_back(torch::nn::Conv2d(torch::nn::Conv2dOptions(in, ch, 4).stride(2).padding(1)));
    seq->push_back(torch::nn::LeakyReLU(torch::nn::LeakyReLUOptions().negative_slope(kSlope)));
    in = ch;
    ch = std::min(ch * 2, 2 * cfg.width);
  }
  seq->push_back(torch::nn::Conv2d(torch::nn::Conv2dOptions(in, 1, 3).padding(1)));
  net_ = register_module("net", seq);
}

torch::Tensor PatchDiscriminatorImpl::forward(const torch::Tensor& image) { return net_->forward(image); }

MultiScaleDiscriminatorImpl::MultiScaleDiscriminatorImpl(const ModelConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  scales_ = register_module("scales", torch::nn::ModuleList());
  for (int64_t s = 0; s < cfg.disc_scales; ++s) scales_->push_back(PatchDiscriminator(cfg));
}

DiscOutput MultiScaleDiscriminatorImpl::forward(const torch::Tensor& image) {
  expect_image(image, cfg_.crop_size, "discriminator");
  DiscOutput out;
  torch::Tensor x = image;
  for (std::size_t s = 0; s < scales_->size(); ++s) {
    if (s > 0) x = torch::avg_pool2d(x, 2);
    out.push_back(scales_[s]->as<PatchDiscriminatorImpl>()->forward(x));
  }
  return out;
}

// ---------------------------------------------------------------------------

torch::Tensor image_to_tensor(const Image& image) {
  if (image.channels != 3) throw ShapeError("expected an RGB image");
  auto hwc = torch::from_blob(const_cast<float*>(image.data.data()), {image.height, image.width, 3}, torch::kFloat32);
  return hwc.permute({2, 0, 1}).clone();
}

torch::Tensor images_to_tensor(std::span<const Image> images) {
  if (images.empty()) throw SizeError("no images to batch");
  std::vector<torch::Tensor> items;
  items.reserve(images.size());
  for (const auto& img : images) {
    if (!img.same_shape(images.front())) throw ShapeError("batch images differ in shape");
    items.push_back(image_to_tensor(img));
  }
  return torch::stack(items);
}

std::vector<Image> tensor_to_images(const torch::Tensor& batch) {
  if (batch.dim() != 4 || batch.size(1) != 3) throw ShapeError("expected [N,3,H,W], got " + shape_str(batch));
  const torch::Tensor hwc = batch.detach().to(torch::kFloat32).permute({0, 2, 3, 1}).contiguous();
  std::vector<Image> out;
  for (int64_t i = 0; i < hwc.size(0); ++i) {
    Image img(static_cast<int>(hwc.size(2)), static_cast<int>(hwc.size(1)), 3);
    std::memcpy(img.data.data(), hwc[i].data_ptr<float>(), img.data.size() * sizeof(float));
    out.push_back(std::move(img));
  }
  return out;
}

torch::Tensor decode_normals(const torch::Tensor& encoded) { return encoded * 2.0 - 1.0; }

}  // namespace texunwarp
