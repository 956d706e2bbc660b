#include <cmath>

#include "doctest.h"
#include "gradcheck.hpp"

#include "texunwarp/error.hpp"
#include "texunwarp/model.hpp"

using namespace texunwarp;

namespace {

torch::Tensor t2x2(std::initializer_list<float> v) { return torch::tensor(std::vector<float>(v)).view({1, 1, 2, 2}); }

ModelConfig config_with_grids(int64_t n1, int64_t n2) {
  ModelConfig c;
  c.content_grid = n1;
  c.normal_grid = n2;
  c.gen_levels = static_cast<int64_t>(std::log2(64 / n1));
  return c;
}

}  // namespace

TEST_CASE("adain hand-evaluated cases") {
  const torch::Tensor m = t2x2({1, 3, 1, 3});
  SUBCASE("unit scale, zero bias") {
    const torch::Tensor out = adain(m, torch::ones({1, 1}), torch::zeros({1, 1}), 1e-8);
    CHECK((torch::allclose(out, t2x2({-1, 1, -1, 1}), 1e-6, 1e-6)));
  }
  SUBCASE("alpha 2, gamma 5") {
    const torch::Tensor out = adain(m, torch::full({1, 1}, 2.0f), torch::full({1, 1}, 5.0f), 1e-8);
    CHECK((torch::allclose(out, t2x2({3, 7, 3, 7}), 1e-6, 1e-6)));
  }
  SUBCASE("constant channel maps to gamma") {
    const torch::Tensor out = adain(torch::full({1, 1, 2, 2}, 4.0f), torch::full({1, 1}, 9.0f),
                                    torch::full({1, 1}, -1.5f), 1e-5);
    CHECK(torch::all(out == -1.5f).item<bool>());
  }
  CHECK_THROWS_AS(adain(m, torch::ones({1, 1}), torch::zeros({1, 1}), 0.0), ParameterError);
  CHECK_THROWS_AS(adain(m, torch::ones({1, 2}), torch::zeros({1, 1}), 1e-5), ShapeError);
}

TEST_CASE("adain output statistics and mean-shift invariance") {
  torch::manual_seed(3);
  for (int trial = 0; trial < 20; ++trial) {
    const torch::Tensor m = torch::randn({2, 3, 5, 5}, torch::kFloat64) * 3.0;
    const torch::Tensor alpha = torch::rand({2, 3}, torch::kFloat64) * 2.0 + 0.1;
    const torch::Tensor gamma = torch::randn({2, 3}, torch::kFloat64);
    const double eps = 1e-5;
    const torch::Tensor out = adain(m, alpha, gamma, eps);
    const torch::Tensor sigma = m.std({2, 3}, /*unbiased=*/false);
    CHECK((torch::allclose(out.mean({2, 3}), gamma, 0.0, 1e-4)));
    CHECK((torch::allclose(out.std({2, 3}, false), alpha * sigma / (sigma + eps), 0.0, 1e-4)));
    const torch::Tensor shifted = adain(m + 17.25, alpha, gamma, eps);
    CHECK(torch::allclose(shifted, out, 0.0, 1e-5));
  }
}

TEST_CASE("reparameterize closed forms") {
  const torch::Tensor mu = torch::randn({4, 3});
  const torch::Tensor ls = torch::randn({4, 3});
  CHECK((torch::equal(reparameterize(mu, ls, torch::zeros({4, 3})), mu)));
  const torch::Tensor n = torch::randn({4, 3});
  CHECK((torch::allclose(reparameterize(torch::zeros({4, 3}), torch::zeros({4, 3}), n), n)));
  const torch::Tensor z = reparameterize(torch::ones({1}, torch::kFloat64), torch::full({1}, std::log(2.0), torch::kFloat64),
                                         torch::full({1}, 0.5, torch::kFloat64));
  CHECK(z.item<double>() == doctest::Approx(2.0).epsilon(1e-12));
  CHECK_THROWS_AS(reparameterize(mu, ls, torch::zeros({4, 2})), ShapeError);
}

TEST_CASE("adain and reparameterize gradients match central differences") {
  torch::manual_seed(11);
  for (int point = 0; point < 20; ++point) {
    const auto opt = torch::kFloat64;
    const torch::Tensor w = torch::randn({2, 3, 4, 4}, opt);
    const double e_adain = test::gradcheck(
        [&](const std::vector<torch::Tensor>& in) { return (adain(in[0], in[1], in[2], 1e-5) * w).sum(); },
        {torch::randn({2, 3, 4, 4}, opt), torch::randn({2, 3}, opt), torch::randn({2, 3}, opt)});
    CHECK(e_adain < 1e-3);

    const torch::Tensor v = torch::randn({3, 5}, opt);
    const double e_rep = test::gradcheck(
        [&](const std::vector<torch::Tensor>& in) { return (reparameterize(in[0], in[1], in[2]) * v).sum(); },
        {torch::randn({3, 5}, opt), torch::randn({3, 5}, opt) * 0.5, torch::randn({3, 5}, opt)});
    CHECK(e_rep < 1e-3);
  }
}

TEST_CASE("default shapes across the network") {
  torch::manual_seed(0);
  const ModelConfig c;
  GarmentEncoder enc(c);
  NormalEncoder nenc(c);
  DistortionCorrector corr(c);
  TextureGenerator gen(c);
  MultiScaleDiscriminator disc(c);
  const torch::Tensor img = torch::rand({2, 3, 64, 64});

  const GarmentLatents l = enc->forward(img);
  CHECK((l.content.mu.sizes().vec() == std::vector<int64_t>{2, 16, 8, 8}));
  CHECK((l.content.log_sigma.sizes().vec() == std::vector<int64_t>{2, 16, 8, 8}));
  CHECK((l.style.mu.sizes().vec() == std::vector<int64_t>{2, 64}));
  CHECK_NOTHROW(check_latent(l.content, c));
  CHECK_NOTHROW(check_latent(l.style, c));

  const torch::Tensor zn = nenc->forward(img * 2 - 1);
  CHECK((zn.sizes().vec() == std::vector<int64_t>{2, 64, 8, 8}));
  CHECK(match_and_concat(zn, l.style.mu, l.content.mu).size(1) == 144);
  const torch::Tensor f = corr->fuse(zn, l.style.mu, l.content.mu);
  CHECK((f.sizes().vec() == std::vector<int64_t>{2, 64, 8, 8}));
  const GarmentLatents corrected = corr->correct(f);
  CHECK_NOTHROW(check_latent(corrected.content, c));
  CHECK_NOTHROW(check_latent(corrected.style, c));

  const torch::Tensor x = gen->forward(corrected.content.mu, corrected.style.mu);
  CHECK((x.sizes().vec() == std::vector<int64_t>{2, 3, 64, 64}));
  CHECK(x.min().item<float>() >= 0.0f);
  CHECK(x.max().item<float>() <= 1.0f);

  const DiscOutput d = disc->forward(x);
  REQUIRE(d.size() == 2);
  CHECK((d[0].sizes().vec() == std::vector<int64_t>{2, 1, 8, 8}));
  CHECK((d[1].sizes().vec() == std::vector<int64_t>{2, 1, 4, 4}));

  CHECK_THROWS_AS(enc->forward(torch::rand({1, 3, 32, 32})), ShapeError);
  CHECK_THROWS_AS(gen->forward(torch::rand({1, 8, 8, 8}), torch::rand({1, 64})), ShapeError);
}

TEST_CASE("shape contracts for grids 4, 8 and 16") {
  for (int64_t n1 : {4, 8, 16})
    for (int64_t n2 : {4, 8, 16}) {
      const ModelConfig c = config_with_grids(n1, n2);
      REQUIRE_NOTHROW(c.validate());
      torch::manual_seed(1);
      GarmentEncoder enc(c);
      NormalEncoder nenc(c);
      DistortionCorrector corr(c);
      TextureGenerator gen(c);
      const torch::Tensor img = torch::rand({1, 3, 64, 64});
      const GarmentLatents l = enc->forward(img);
      CHECK((l.content.mu.sizes().vec() == std::vector<int64_t>{1, 16, n1, n1}));
      const torch::Tensor zn = nenc->forward(img);
      CHECK((zn.sizes().vec() == std::vector<int64_t>{1, 64, n2, n2}));
      const GarmentLatents out = corr->forward(zn, l.style.mu, l.content.mu);
      CHECK((out.content.mu.sizes().vec() == std::vector<int64_t>{1, 16, n1, n1}));
      CHECK((gen->forward(out.content.mu, out.style.mu).sizes().vec() == std::vector<int64_t>{1, 3, 64, 64}));
    }
}

TEST_CASE("forward passes are deterministic and per-sample") {
  torch::manual_seed(2);
  const ModelConfig c;
  GarmentEncoder enc(c);
  NormalEncoder nenc(c);
  DistortionCorrector corr(c);
  const torch::Tensor img = torch::rand({3, 3, 64, 64});
  const GarmentLatents a = enc->forward(img), b = enc->forward(img);
  CHECK(torch::equal(a.content.mu, b.content.mu));
  CHECK(torch::equal(a.style.log_sigma, b.style.log_sigma));
  const torch::Tensor zn = nenc->forward(img);
  CHECK(torch::equal(zn, nenc->forward(img)));

  const torch::Tensor perm = torch::tensor({2, 0, 1}, torch::kLong);
  const torch::Tensor f = corr->fuse(zn, a.style.mu, a.content.mu);
  const torch::Tensor fp = corr->fuse(zn.index_select(0, perm), a.style.mu.index_select(0, perm),
                                      a.content.mu.index_select(0, perm));
  CHECK(torch::allclose(fp, f.index_select(0, perm), 1e-6, 1e-6));
}

TEST_CASE("fuse with a zeroed first layer reduces to bias propagation") {
  torch::manual_seed(4);
  const ModelConfig c;
  DistortionCorrector corr(c);
  torch::NoGradGuard guard;
  corr->fuse1->weight.zero_();
  const torch::Tensor b1 = corr->fuse1->bias.clone();
  const torch::Tensor w2 = corr->fuse2->weight.clone();  // [64, 64, 3, 3]
  const torch::Tensor b2 = corr->fuse2->bias.clone();
  const torch::Tensor h = torch::leaky_relu(b1, 0.2);

  const torch::Tensor f = corr->fuse(torch::full({1, 64, 8, 8}, 0.3f), torch::full({1, 64}, -0.7f),
                                     torch::full({1, 16, 8, 8}, 1.1f));
  // hand evaluation of the second 3x3 conv over a constant field with zero padding
  for (int y : {0, 3, 7})
    for (int x : {0, 4, 7}) {
      torch::Tensor expect = b2.clone();
      for (int ky = 0; ky < 3; ++ky)
        for (int kx = 0; kx < 3; ++kx) {
          const int sy = y + ky - 1, sx = x + kx - 1;
          if (sy < 0 || sy > 7 || sx < 0 || sx > 7) continue;
          expect += torch::mv(w2.index({torch::indexing::Slice(), torch::indexing::Slice(), ky, kx}), h);
        }
      CHECK((torch::allclose(f.index({0, torch::indexing::Slice(), y, x}), expect, 1e-5, 1e-5)));
    }
  // interior positions see the full kernel and agree with each other
  CHECK((torch::allclose(f.index({0, torch::indexing::Slice(), 2, 2}), f.index({0, torch::indexing::Slice(), 5, 4}))));
}

TEST_CASE("heads stay finite for large inputs") {
  torch::manual_seed(5);
  const ModelConfig c;
  DistortionCorrector corr(c);
  MultiScaleDiscriminator disc(c);
  for (float v : {-10.0f, 10.0f}) {
    const GarmentLatents out = corr->correct(torch::full({1, 64, 8, 8}, v));
    CHECK(torch::isfinite(out.content.mu).all().item<bool>());
    CHECK(torch::isfinite(out.style.log_sigma).all().item<bool>());
  }
  const torch::Tensor mixed = torch::randint(0, 2, {1, 64, 8, 8}).to(torch::kFloat32) * 20.0 - 10.0;
  CHECK(torch::isfinite(corr->correct(mixed).content.log_sigma).all().item<bool>());
  for (float v : {0.0f, 1.0f})
    for (const auto& grid : disc->forward(torch::full({1, 3, 64, 64}, v)))
      CHECK(torch::isfinite(grid).all().item<bool>());
}

TEST_CASE("model config validation") {
  ModelConfig c;
  c.content_grid = 6;
  CHECK_THROWS_AS(c.validate(), ParameterError);
  c = ModelConfig{};
  c.gen_levels = 2;
  CHECK_THROWS_AS(c.validate(), ParameterError);
  c = ModelConfig{};
  c.norm_epsilon = 0.0;
  CHECK_THROWS_AS(c.validate(), ParameterError);
  c = ModelConfig{};
  const nlohmann::json j = c;
  CHECK(j.get<ModelConfig>() == c);
}

TEST_CASE("image tensor conversion round trips") {
  Image img(5, 4);
  for (std::size_t i = 0; i < img.data.size(); ++i) img.data[i] = static_cast<float>(i) / img.data.size();
  const torch::Tensor t = image_to_tensor(img);
  CHECK((t.sizes().vec() == std::vector<int64_t>{3, 4, 5}));
  CHECK(t[1][2][3].item<float>() == img.at(3, 2, 1));
  const Image back = tensor_to_images(t.unsqueeze(0)).front();
  CHECK(back == img);
  CHECK((torch::allclose(decode_normals(torch::full({1}, 0.5f)), torch::zeros({1}))));
}
