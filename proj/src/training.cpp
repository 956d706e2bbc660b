#include "texunwarp/training.hpp"

#include <ATen/CPUGeneratorImpl.h>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>

#include "texunwarp/error.hpp"

namespace texunwarp {

namespace fs = std::filesystem;
using nlohmann::json;

void TrainConfig::validate() const {
  if (steps < 1) throw ParameterError("steps must be >= 1");
  if (batch < 1) throw ParameterError("batch must be >= 1");
  if (!(lr > 0.0) || !std::isfinite(lr)) throw ParameterError("lr must be > 0");
  if (!(recon_scale > 0.0) || !std::isfinite(recon_scale)) throw ParameterError("recon_scale must be > 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
    throw ParameterError("adam betas must lie in [0, 1)");
  loss.validate();
  model.validate();
  if (model.resolution != model.crop_size)
    throw ParameterError("training needs resolution == crop_size: every encoder also sees generator-sized images");
}

void to_json(json& j, const TrainConfig& c) {
  j = json{{"stage", to_string(c.stage)}, {"steps", c.steps},   {"batch", c.batch},
           {"lr", c.lr},                   {"beta1", c.beta1},   {"beta2", c.beta2},
           {"seed", c.seed},               {"per_element_kl", c.per_element_kl},
           {"recon_scale", c.recon_scale},
           {"loss", c.loss},               {"model", c.model}};
}

void from_json(const json& j, TrainConfig& c) {
  const TrainConfig d;
  c.stage = stage_from_string(j.value("stage", std::string(to_string(d.stage))));
  c.steps = j.value("steps", d.steps);
  c.batch = j.value("batch", d.batch);
  c.lr = j.value("lr", d.lr);
  c.beta1 = j.value("beta1", d.beta1);
  c.beta2 = j.value("beta2", d.beta2);
  c.seed = j.value("seed", d.seed);
  c.per_element_kl = j.value("per_element_kl", d.per_element_kl);
  c.recon_scale = j.value("recon_scale", d.recon_scale);
  c.loss = j.value("loss", d.loss);
  c.model = j.value("model", d.model);
}

// ---------------------------------------------------------------------------

TrainingData TrainingData::slice(int64_t begin, int64_t end) const {
  if (begin < 0 || end > size() || begin >= end) throw SizeError("empty or out-of-range data slice");
  TrainingData out;
  out.ids.assign(ids.begin() + begin, ids.begin() + end);
  out.input = input.slice(0, begin, end);
  out.normal = normal.slice(0, begin, end);
  out.gt = gt.slice(0, begin, end);
  return out;
}

TrainingData TrainingData::from_samples(std::span<const Sample> samples) {
  if (samples.empty()) throw SizeError("dataset is empty");
  TrainingData d;
  std::vector<Image> inputs, normals, gts;
  for (const auto& s : samples) {
    d.ids.push_back(s.id);
    inputs.push_back(s.input_image);
    normals.push_back(s.normal_map);
    gts.push_back(s.gt_crop);
  }
  d.input = images_to_tensor(inputs);
  d.normal = decode_normals(images_to_tensor(normals));
  d.gt = images_to_tensor(gts);
  return d;
}

DataSplit split_dataset(const TrainingData& data) {
  if (data.size() < 3) throw SizeError("need at least three samples to split");
  const int64_t test = std::max<int64_t>(2, data.size() / 5);
  return {data.slice(0, data.size() - test), data.slice(data.size() - test, data.size())};
}

// ---------------------------------------------------------------------------

Networks Networks::create(Stage stage, const ModelConfig& model) {
  model.validate();
  Networks n;
  n.stage = stage;
  n.model = model;
  const bool corrector = stage == Stage::corrector || stage == Stage::end_to_end;
  n.encoder = GarmentEncoder(model);
  if (corrector) {
    n.normal_encoder = NormalEncoder(model);
    n.corrector = DistortionCorrector(model);
  }
  n.generator = TextureGenerator(model);
  n.discriminator = MultiScaleDiscriminator(model);
  // oneDNN convolutions skip layout reorders when weights and activations are channels-last
  for (auto& [name, p] : n.named_parameters())
    if (p.dim() == 4) p.set_data(p.contiguous(torch::MemoryFormat::ChannelsLast));
  return n;
}

std::vector<std::pair<std::string, torch::Tensor>> Networks::named_parameters() const {
  std::vector<std::pair<std::string, torch::Tensor>> out;
  auto add = [&out](const std::string& prefix, const auto& holder) {
    if (holder.is_empty()) return;
    for (const auto& item : holder->named_parameters(true)) out.emplace_back(prefix + item.key(), item.value());
  };
  add("encoder.", encoder);
  add("normal_encoder.", normal_encoder);
  add("corrector.", corrector);
  add("generator.", generator);
  add("discriminator.", discriminator);
  return out;
}

std::vector<torch::Tensor> Networks::parameters(std::initializer_list<std::string_view> prefixes) const {
  std::vector<torch::Tensor> out;
  for (const auto& [name, p] : named_parameters())
    for (auto prefix : prefixes)
      if (std::string_view(name).starts_with(prefix)) out.push_back(p);
  return out;
}

void Networks::train(bool on) {
  auto set = [on](auto& holder) {
    if (!holder.is_empty()) holder->train(on);
  };
  set(encoder);
  set(normal_encoder);
  set(corrector);
  set(generator);
  set(discriminator);
}

GarmentLatents Networks::translate(const torch::Tensor& input, const torch::Tensor& normal) {
  GarmentLatents latents = encoder->forward(input);
  return has_corrector() ? translate(latents, normal) : latents;
}

GarmentLatents Networks::translate(const GarmentLatents& input_latents, const torch::Tensor& normal) {
  if (!has_corrector()) throw StateError("network set has no distortion corrector");
  return corrector->forward(normal_encoder->forward(normal), input_latents.style.mu, input_latents.content.mu);
}

torch::Tensor Networks::infer(const torch::Tensor& input, const torch::Tensor& normal) {
  torch::NoGradGuard no_grad;
  const GarmentLatents latents = translate(input, normal);
  return generator->forward(latents.content.mu, latents.style.mu);
}

namespace {

torch::Tensor rows(const torch::Tensor& images, const torch::Tensor& index) {
  return images.index_select(0, index).contiguous(torch::MemoryFormat::ChannelsLast);
}

void load_module(torch::nn::Module& module, const Checkpoint& ckpt, const std::string& prefix) {
  torch::NoGradGuard no_grad;
  for (auto& item : module.named_parameters(true)) {
    const TensorEntry* e = ckpt.find(prefix + item.key());
    if (!e) throw StateError("checkpoint lacks " + prefix + item.key());
    if (!e->value.sizes().equals(item.value().sizes())) throw StateError("shape mismatch for " + prefix + item.key());
    item.value().copy_(e->value);
  }
}

}  // namespace

Checkpoint to_checkpoint(const Networks& nets, const json& config,
                         std::initializer_list<std::string_view> frozen_prefixes, const torch::Tensor& rng_state) {
  Checkpoint ckpt;
  ckpt.stage = nets.stage;
  ckpt.model = nets.model;
  ckpt.config = config;
  for (const auto& [name, p] : nets.named_parameters()) {
    bool frozen = false;
    for (auto prefix : frozen_prefixes) frozen = frozen || std::string_view(name).starts_with(prefix);
    ckpt.parameters.push_back({name, p.detach().clone(), frozen});
  }
  if (rng_state.defined()) ckpt.rng_state = rng_state.clone();
  return ckpt;
}

Networks networks_from_checkpoint(const Checkpoint& ckpt) {
  Networks n = Networks::create(ckpt.stage, ckpt.model);
  if (n.has_corrector() != ckpt.has_prefix("corrector."))
    throw StateError("checkpoint contents do not match stage " + std::string(to_string(ckpt.stage)));
  load_module(*n.encoder, ckpt, "encoder.");
  if (n.has_corrector()) {
    load_module(*n.normal_encoder, ckpt, "normal_encoder.");
    load_module(*n.corrector, ckpt, "corrector.");
  }
  load_module(*n.generator, ckpt, "generator.");
  load_module(*n.discriminator, ckpt, "discriminator.");
  n.train(false);
  return n;
}

Image infer(const Checkpoint& ckpt, const Image& input_image, const Image& normal_map) {
  const int r = static_cast<int>(ckpt.model.resolution);
  for (const Image* img : {&input_image, &normal_map})
    if (img->width != r || img->height != r || img->channels != 3)
      throw ShapeError("inference expects " + std::to_string(r) + "x" + std::to_string(r) + " RGB images");
  Networks nets = networks_from_checkpoint(ckpt);
  const torch::Tensor out = nets.infer(image_to_tensor(input_image).unsqueeze(0),
                                       decode_normals(image_to_tensor(normal_map)).unsqueeze(0));
  return tensor_to_images(out).front();
}

// ---------------------------------------------------------------------------

GarmentLatents LatentCache::gather(const torch::Tensor& index) const {
  auto pick = [&index](const GaussianLatent& l) {
    return GaussianLatent{l.mu.index_select(0, index), l.log_sigma.index_select(0, index), l.kind};
  };
  return {pick(latents.content), pick(latents.style)};
}

bool LatentCache::valid_for(const Checkpoint& input_ckpt) const {
  return encoder_digest == input_ckpt.digest("encoder.");
}

LatentCache cache_latents(const Checkpoint& input_ckpt, const TrainingData& data) {
  if (input_ckpt.stage != Stage::pretrain_input) throw StateError("latent cache needs an input-side stage-A checkpoint");
  if (data.input.size(2) != input_ckpt.model.resolution)
    throw ShapeError("dataset resolution does not match the checkpoint");
  Networks nets = networks_from_checkpoint(input_ckpt);
  torch::NoGradGuard no_grad;
  constexpr int64_t kChunk = 32;
  std::vector<torch::Tensor> cm, cs, sm, ss;
  for (int64_t b = 0; b < data.size(); b += kChunk) {
    const GarmentLatents l = nets.encoder->forward(
        data.input.slice(0, b, std::min(b + kChunk, data.size())).contiguous(torch::MemoryFormat::ChannelsLast));
    cm.push_back(l.content.mu);
    cs.push_back(l.content.log_sigma);
    sm.push_back(l.style.mu);
    ss.push_back(l.style.log_sigma);
  }
  LatentCache cache;
  cache.encoder_digest = input_ckpt.digest("encoder.");
  cache.ids = data.ids;
  cache.latents = {{torch::cat(cm), torch::cat(cs), LatentKind::content},
                   {torch::cat(sm), torch::cat(ss), LatentKind::style}};
  return cache;
}

// ---------------------------------------------------------------------------

json RunRecord::to_json() const {
  json j{{"config", config},
         {"steps", losses.size()},
         {"wall_seconds", wall_seconds},
         {"checkpoint_path", checkpoint_path}};
  if (!losses.empty()) j["final_loss"] = losses.back().to_json();
  return j;
}

namespace {

struct StepOutput {
  GarmentLatents latents;  ///< posterior whose KL enters the objective
  torch::Tensor x_hat;
  torch::Tensor target;
};

enum class Objective { autoencoder, corrector };

torch::Tensor sample_latent(const GaussianLatent& l, at::Generator& gen) {
  return reparameterize(l, torch::randn(l.mu.sizes(), gen, l.mu.options()));
}

torch::Tensor decode(Networks& nets, const GarmentLatents& latents, at::Generator& gen) {
  return nets.generator->forward(sample_latent(latents.content, gen), sample_latent(latents.style, gen));
}

void set_requires_grad(const std::vector<torch::Tensor>& params, bool on) {
  for (auto p : params) p.set_requires_grad(on);
}

/// Alternating discriminator / generator updates. `forward` maps a batch
/// index tensor to the generator-side pass.
template <class Forward>
std::vector<LossReport> run_loop(Networks& nets, const std::vector<torch::Tensor>& g_params, const TrainingData& data,
                                 const TrainConfig& cfg, Objective objective, at::Generator& gen, Forward&& forward) {
  if (data.size() < 1) throw SizeError("dataset is empty");
  if (g_params.empty()) throw StateError("nothing to train");
  const auto d_params = nets.parameters({"discriminator."});
  auto adam = [&cfg](const std::vector<torch::Tensor>& params) {
    return torch::optim::Adam(params, torch::optim::AdamOptions(cfg.lr).betas({cfg.beta1, cfg.beta2}));
  };
  torch::optim::Adam g_opt = adam(g_params);
  torch::optim::Adam d_opt = adam(d_params);
  const double kl_scale =
      cfg.recon_scale *
      (cfg.per_element_kl ? 1.0 / static_cast<double>(3 * cfg.model.crop_size * cfg.model.crop_size) : 1.0);

  nets.train(true);
  std::vector<LossReport> reports;
  reports.reserve(static_cast<std::size_t>(cfg.steps));
  for (int64_t step = 0; step < cfg.steps; ++step) {
    const torch::Tensor index = torch::randint(data.size(), {cfg.batch}, gen, torch::kLong);
    StepOutput out = forward(index);

    d_opt.zero_grad();
    const torch::Tensor real = out.target.detach().requires_grad_(true);
    const DiscOutput real_logits = nets.discriminator->forward(real);
    const DiscOutput fake_logits = nets.discriminator->forward(out.x_hat.detach());
    const torch::Tensor d_adv = discriminator_adversarial_loss(real_logits, fake_logits);
    const torch::Tensor r1 = r1_penalty(real_logits, real);
    (d_adv + cfg.loss.r1_weight * r1).backward();
    d_opt.step();

    g_opt.zero_grad();
    set_requires_grad(d_params, false);
    const torch::Tensor g_adv = generator_adversarial_loss(nets.discriminator->forward(out.x_hat));
    LossTerms terms;
    if (objective == Objective::autoencoder) {
      terms = vae_loss(out.latents, out.x_hat, out.target, cfg.loss, kl_scale);
      terms.add("adv_g", cfg.loss.pretrain_adv_weight, g_adv);
    } else {
      terms = corrector_loss(out.latents, out.x_hat, out.target, g_adv, cfg.loss, kl_scale);
    }
    terms.note("adv_d", d_adv);
    terms.note("r1", r1);
    if (!torch::isfinite(terms.total).item<bool>() || !torch::isfinite(d_adv).item<bool>())
      throw NumericError("non-finite loss at step " + std::to_string(step) + " (" +
                         std::string(to_string(cfg.stage)) + ")");
    terms.total.backward();
    g_opt.step();
    set_requires_grad(d_params, true);
    reports.push_back(terms.report());
  }
  nets.train(false);
  return reports;
}

at::Generator make_generator(std::uint64_t seed) {
  torch::manual_seed(seed);
  return at::make_generator<at::CPUGeneratorImpl>(seed);
}

void check_data(const TrainingData& data, const ModelConfig& model) {
  if (data.size() < 1) throw SizeError("dataset is empty");
  if (data.input.size(2) != model.resolution || data.gt.size(2) != model.crop_size)
    throw ShapeError("dataset image sizes do not match the model configuration");
}

TrainResult finish(Networks& nets, const TrainConfig& cfg, std::vector<LossReport> reports, at::Generator& gen,
                   std::chrono::steady_clock::time_point start,
                   std::initializer_list<std::string_view> frozen_prefixes = {}) {
  TrainResult r;
  r.checkpoint = to_checkpoint(nets, cfg, frozen_prefixes, gen.get_state());
  r.record.config = cfg;
  r.record.losses = std::move(reports);
  r.record.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

void require_stage(const Checkpoint& ckpt, Stage stage) {
  if (ckpt.stage != stage)
    throw StateError("expected a " + std::string(to_string(stage)) + " checkpoint, got " +
                     std::string(to_string(ckpt.stage)));
}

std::string frozen_digest(const Networks& nets) {
  std::vector<std::pair<std::string, torch::Tensor>> frozen;
  for (const auto& [name, p] : nets.named_parameters())
    if (name.starts_with("encoder.") || name.starts_with("generator.")) frozen.emplace_back(name, p);
  return tensors_digest(frozen);
}

}  // namespace

TrainResult pretrain_autoencoder(const TrainingData& data, const TrainConfig& cfg_in) {
  TrainConfig cfg = cfg_in;
  if (cfg.stage != Stage::pretrain_input && cfg.stage != Stage::pretrain_gt)
    throw ParameterError("pretrain_autoencoder needs stage pretrain_input or pretrain_gt");
  cfg.validate();
  check_data(data, cfg.model);
  const auto start = std::chrono::steady_clock::now();
  at::Generator gen = make_generator(cfg.seed);
  Networks nets = Networks::create(cfg.stage, cfg.model);
  const torch::Tensor& source = cfg.stage == Stage::pretrain_input ? data.input : data.gt;
  auto reports = run_loop(nets, nets.parameters({"encoder.", "generator."}), data, cfg, Objective::autoencoder, gen,
                          [&](const torch::Tensor& index) {
                            const torch::Tensor x = rows(source, index);
                            GarmentLatents latents = nets.encoder->forward(x);
                            torch::Tensor x_hat = decode(nets, latents, gen);
                            return StepOutput{std::move(latents), std::move(x_hat), x};
                          });
  return finish(nets, cfg, std::move(reports), gen, start);
}

TrainResult train_corrector(const Checkpoint& ckpt_input, const Checkpoint& ckpt_gt, const LatentCache* cache,
                            const TrainingData& data, const TrainConfig& cfg_in) {
  require_stage(ckpt_input, Stage::pretrain_input);
  require_stage(ckpt_gt, Stage::pretrain_gt);
  if (!(ckpt_input.model == ckpt_gt.model)) throw StateError("stage-A checkpoints disagree on model dimensions");
  TrainConfig cfg = cfg_in;
  cfg.stage = Stage::corrector;
  cfg.model = ckpt_input.model;
  cfg.validate();
  check_data(data, cfg.model);
  if (cache) {
    if (!cache->valid_for(ckpt_input)) throw CacheError("latent cache was built from a different input encoder");
    if (cache->ids != data.ids) throw CacheError("latent cache does not cover this dataset");
  }
  const auto start = std::chrono::steady_clock::now();
  at::Generator gen = make_generator(cfg.seed);
  Networks nets = Networks::create(Stage::corrector, cfg.model);
  load_module(*nets.encoder, ckpt_input, "encoder.");
  load_module(*nets.generator, ckpt_gt, "generator.");
  load_module(*nets.discriminator, ckpt_gt, "discriminator.");
  set_requires_grad(nets.parameters({"encoder.", "generator."}), false);
  const std::string before = frozen_digest(nets);

  auto reports = run_loop(nets, nets.parameters({"normal_encoder.", "corrector."}), data, cfg, Objective::corrector, gen,
                          [&](const torch::Tensor& index) {
                            GarmentLatents input_latents;
                            if (cache) {
                              input_latents = cache->gather(index);
                            } else {
                              torch::NoGradGuard no_grad;
                              input_latents = nets.encoder->forward(rows(data.input, index));
                            }
                            GarmentLatents latents = nets.translate(input_latents, rows(data.normal, index));
                            torch::Tensor x_hat = decode(nets, latents, gen);
                            return StepOutput{std::move(latents), std::move(x_hat), rows(data.gt, index)};
                          });

  if (frozen_digest(nets) != before) throw FreezeViolation("frozen encoder/generator parameters changed in stage B");
  TrainResult r = finish(nets, cfg, std::move(reports), gen, start, {"encoder.", "generator."});
  if (r.checkpoint.digest("encoder.") != ckpt_input.digest("encoder.") ||
      r.checkpoint.digest("generator.") != ckpt_gt.digest("generator."))
    throw FreezeViolation("stage-B checkpoint differs from the stage-A weights it froze");
  return r;
}

TrainResult train_end_to_end(const TrainingData& data, const TrainConfig& cfg_in) {
  TrainConfig cfg = cfg_in;
  cfg.stage = Stage::end_to_end;
  cfg.validate();
  check_data(data, cfg.model);
  const auto start = std::chrono::steady_clock::now();
  at::Generator gen = make_generator(cfg.seed);
  Networks nets = Networks::create(Stage::end_to_end, cfg.model);
  auto reports =
      run_loop(nets, nets.parameters({"encoder.", "normal_encoder.", "corrector.", "generator."}), data, cfg,
               Objective::corrector, gen, [&](const torch::Tensor& index) {
                 GarmentLatents latents = nets.translate(rows(data.input, index), rows(data.normal, index));
                 torch::Tensor x_hat = decode(nets, latents, gen);
                 return StepOutput{std::move(latents), std::move(x_hat), rows(data.gt, index)};
               });
  return finish(nets, cfg, std::move(reports), gen, start);
}

TrainResult train_without_corrector(const Checkpoint& ckpt_input, const Checkpoint& ckpt_gt, const TrainingData& data,
                                    const TrainConfig& cfg_in) {
  require_stage(ckpt_input, Stage::pretrain_input);
  require_stage(ckpt_gt, Stage::pretrain_gt);
  if (!(ckpt_input.model == ckpt_gt.model)) throw StateError("stage-A checkpoints disagree on model dimensions");
  TrainConfig cfg = cfg_in;
  cfg.stage = Stage::no_corrector;
  cfg.model = ckpt_input.model;
  cfg.validate();
  check_data(data, cfg.model);
  const auto start = std::chrono::steady_clock::now();
  at::Generator gen = make_generator(cfg.seed);
  Networks nets = Networks::create(Stage::no_corrector, cfg.model);
  load_module(*nets.encoder, ckpt_input, "encoder.");
  load_module(*nets.generator, ckpt_gt, "generator.");
  load_module(*nets.discriminator, ckpt_gt, "discriminator.");
  auto reports = run_loop(nets, nets.parameters({"encoder.", "generator."}), data, cfg, Objective::corrector, gen,
                          [&](const torch::Tensor& index) {
                            GarmentLatents latents = nets.encoder->forward(rows(data.input, index));
                            torch::Tensor x_hat = decode(nets, latents, gen);
                            return StepOutput{std::move(latents), std::move(x_hat), rows(data.gt, index)};
                          });
  return finish(nets, cfg, std::move(reports), gen, start);
}

// ---------------------------------------------------------------------------

void write_run(const fs::path& dir, TrainResult& result, const json& resolved_config) {
  fs::create_directories(dir);
  auto write_text = [&dir](const std::string& name, const std::string& text) {
    std::ofstream out(dir / name, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + (dir / name).string());
    out << text;
  };
  write_text("config.json", resolved_config.dump(2) + "\n");
  std::string lines;
  for (std::size_t i = 0; i < result.record.losses.size(); ++i) {
    json j = result.record.losses[i].to_json();
    j["step"] = i;
    lines += j.dump() + "\n";
  }
  write_text("losses.jsonl", lines);
  result.record.checkpoint_path = "ckpt_" + std::string(to_string(result.checkpoint.stage)) + ".bin";
  save_checkpoint(result.checkpoint, dir / result.record.checkpoint_path);
  write_text("run_record.json", result.record.to_json().dump(2) + "\n");
}

std::vector<double> ema(std::span<const double> values, int window) {
  if (window < 1) throw ParameterError("ema window must be >= 1");
  const double a = 2.0 / (window + 1.0);
  std::vector<double> out;
  out.reserve(values.size());
  for (double v : values) out.push_back(out.empty() ? v : a * v + (1.0 - a) * out.back());
  return out;
}

void configure_threads() {
  int n = 1;
  if (const char* env = std::getenv("DEEPIRON_THREADS")) n = std::max(1, std::atoi(env));
  torch::set_num_threads(n);
}

}  // namespace texunwarp
