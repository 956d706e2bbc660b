#include <cmath>
#include <random>

#include "doctest.h"
#include "test_support.hpp"

#include "texunwarp/datagen.hpp"
#include "texunwarp/error.hpp"

using namespace texunwarp;

namespace {

PatternFamily black_white(PatternKind kind, double period) {
  PatternFamily f;
  f.kind = kind;
  f.period = period;
  f.color_a = {0.0f, 0.0f, 0.0f};
  f.color_b = {1.0f, 1.0f, 1.0f};
  return f;
}

// 4x4 single-channel marker with value x + 4y.
Image marker4() {
  Image m(4, 4, 1);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) m.at(x, y) = static_cast<float>(x + 4 * y);
  return m;
}

double norm3(const std::array<double, 3>& n) { return std::sqrt(n[0] * n[0] + n[1] * n[1] + n[2] * n[2]); }

DatagenConfig small_config() {
  DatagenConfig c;
  c.resolution = 32;
  c.crop_size = 32;
  c.map_size = 64;
  return c;
}

}  // namespace

TEST_CASE("stripes with period 4 alternate four black and four white columns") {
  const Image img = gen_procedural_texture(black_white(PatternKind::stripes, 4), 8, 0);
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x) CHECK(img.at(x, y, 0) == (x < 4 ? 0.0f : 1.0f));
}

TEST_CASE("checker with period 2 is a 2x2 block checkerboard") {
  const Image img = gen_procedural_texture(black_white(PatternKind::checker, 2), 4, 0);
  const float expect[4][4] = {{0, 0, 1, 1}, {0, 0, 1, 1}, {1, 1, 0, 0}, {1, 1, 0, 0}};
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) CHECK(img.at(x, y, 1) == expect[y][x]);
}

TEST_CASE("procedural textures are deterministic and stay in [0, 1]") {
  for (PatternKind k : {PatternKind::stripes, PatternKind::diagonal_stripes, PatternKind::checker, PatternKind::dots,
                        PatternKind::floral_blobs}) {
    PatternFamily f = black_white(k, 6);
    f.color_a = {0.2f, 0.7f, 0.1f};
    const Image a = gen_procedural_texture(f, 48, 7);
    CHECK(a == gen_procedural_texture(f, 48, 7));
    for (float v : a.data) CHECK((v >= 0.0f && v <= 1.0f));
  }
}

TEST_CASE("invalid pattern parameters are rejected") {
  PatternFamily f = black_white(PatternKind::stripes, 1.5);
  CHECK_THROWS_AS(gen_procedural_texture(f, 16, 0), ParameterError);
  f.period = 4;
  f.angle_deg = 180.0;
  CHECK_THROWS_AS(gen_procedural_texture(f, 16, 0), ParameterError);
  f.angle_deg = 0.0;
  f.color_b = {1.2f, 0.0f, 0.0f};
  CHECK_THROWS_AS(gen_procedural_texture(f, 16, 0), ParameterError);
}

TEST_CASE("rotate_crop at 0 degrees returns the source subwindow") {
  std::mt19937_64 rng(4);
  const Image src = test::random_image(rng, 10, 10);
  const Image out = rotate_crop(src, 0.0, 2, 3, 5);
  for (int y = 0; y < 5; ++y)
    for (int x = 0; x < 5; ++x) CHECK(out.rgb(x, y) == src.rgb(x + 2, y + 3));
}

TEST_CASE("rotate_crop by 90 degrees matches a hand-rotated marker") {
  // Rotation by +90 deg in image coordinates (y down): the top row of the
  // result is the left column of the source read bottom-up.
  const float expect[4][4] = {{12, 8, 4, 0}, {13, 9, 5, 1}, {14, 10, 6, 2}, {15, 11, 7, 3}};
  const Image out = rotate_crop(marker4(), 90.0, 0, 0, 4);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) CHECK(out.at(x, y) == expect[y][x]);
}

TEST_CASE("augment_texture is deterministic and checks its input size") {
  std::mt19937_64 rng(5);
  const Image src = test::random_image(rng, 64, 64);
  const Image a = augment_texture(src, 11, 32);
  CHECK(a.width == 32);
  CHECK(a.height == 32);
  CHECK(a == augment_texture(src, 11, 32));
  CHECK_THROWS_AS(augment_texture(src, 11, 33), SizeError);
}

TEST_CASE("crop_to_pattern copies in-region pixels and zeroes the rest") {
  std::mt19937_64 rng(6);
  SUBCASE("full-frame rectangle is the identity") {
    SewingPatternLayout l;
    l.regions = {{"torso_front", {{0, 0}, {1, 0}, {1, 1}, {0, 1}}}};
    const Image src = test::random_image(rng, 12, 9);
    CHECK(crop_to_pattern(src, l).image == src);
  }
  SUBCASE("triangle on constant red") {
    SewingPatternLayout l;
    const Polygon tri{{0.1, 0.1}, {0.9, 0.2}, {0.3, 0.85}};
    l.regions = {{"torso_front", tri}};
    Image red(40, 30, 3, 0.0f);
    for (int y = 0; y < 30; ++y)
      for (int x = 0; x < 40; ++x) red.set_rgb(x, y, {1.0f, 0.0f, 0.0f});
    const Image out = crop_to_pattern(red, l).image;
    for (int y = 0; y < 30; ++y)
      for (int x = 0; x < 40; ++x) {
        const bool inside = point_in_polygon(tri, (x + 0.5) / 40.0, (y + 0.5) / 30.0);
        CHECK(out.rgb(x, y) == (inside ? Rgb{1.0f, 0.0f, 0.0f} : Rgb{0.0f, 0.0f, 0.0f}));
      }
  }
  SUBCASE("in-region pixels of the built-in layouts are untouched") {
    const Image src = test::random_image(rng, 48, 48);
    for (Garment g : {Garment::tshirt, Garment::pants}) {
      const SewingPatternLayout l = builtin_layout(g);
      const Mask inside = l.rasterize(48, 48);
      const Image out = crop_to_pattern(src, l).image;
      for (int y = 0; y < 48; ++y)
        for (int x = 0; x < 48; ++x)
          CHECK(out.rgb(x, y) == (inside.at(x, y) ? src.rgb(x, y) : Rgb{0.0f, 0.0f, 0.0f}));
    }
  }
}

TEST_CASE("zero strength gives a zero field with no occlusion") {
  const WarpField f = make_warp_field(0.0, 24, 9);
  CHECK(f.max_displacement() == 0.0f);
  CHECK(f.occlusion.count() == 0);
  for (float h : f.height) CHECK(h == 0.0f);
  CHECK_THROWS_AS(make_warp_field(-0.1, 24, 9), ParameterError);
}

TEST_CASE("warp fields are deterministic, bounded and at most half occluded") {
  const WarpField a = make_warp_field(1.3, 32, 77);
  const WarpField b = make_warp_field(1.3, 32, 77);
  CHECK(a.dx == b.dx);
  CHECK(a.dy == b.dy);
  CHECK(a.height == b.height);
  CHECK(a.occlusion == b.occlusion);

  for (double s : {0.25, 1.0, 2.5}) {
    const double bound = displacement_bound(s);
    double worst = 0.0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      const WarpField f = make_warp_field(s, 32, seed);
      for (std::size_t i = 0; i < f.dx.size(); ++i) {
        REQUIRE(std::isfinite(f.dx[i]));
        REQUIRE(std::isfinite(f.dy[i]));
        worst = std::max(worst, std::hypot(static_cast<double>(f.dx[i]), static_cast<double>(f.dy[i])));
      }
      CHECK(f.occlusion.fraction() <= 0.5);
    }
    CHECK(worst <= bound);
    CHECK(worst > 0.0);
  }
}

TEST_CASE("warp displacement is the gradient of the height field") {
  const WarpField f = make_warp_field(1.0, 48, 3);
  const int n = f.resolution;
  double worst = 0.0;
  for (int y = 2; y < n - 2; ++y)
    for (int x = 2; x < n - 2; ++x) {
      auto h = [&](int xx, int yy) { return static_cast<double>(f.height[static_cast<std::size_t>(yy) * n + xx]); };
      const double gx = 0.5 * (h(x + 1, y) - h(x - 1, y));
      const std::size_t i = static_cast<std::size_t>(y) * n + x;
      worst = std::max(worst, std::abs(gx - f.dx[i]));
    }
  // central differences of smooth terms with wavelength >= n/4 px
  CHECK(worst < 0.1);
}

TEST_CASE("apply_warp identity, shift and occlusion") {
  std::mt19937_64 rng(8);
  const Image img = test::random_image(rng, 16, 16);
  SUBCASE("zero field is bit-exact identity") { CHECK(apply_warp(img, WarpField::zero(16)) == img); }
  SUBCASE("constant (2, 0) displacement shifts a marker by two pixels") {
    WarpField f = WarpField::zero(16);
    std::fill(f.dx.begin(), f.dx.end(), 2.0f);
    const Image out = apply_warp(img, f);
    for (int y = 0; y < 16; ++y)
      for (int x = 0; x < 16; ++x) CHECK(out.rgb(x, y) == img.rgb(std::min(x + 2, 15), y));
  }
  SUBCASE("full occlusion paints the occluder color") {
    WarpField f = WarpField::zero(16);
    f.occluder_color = {0.25f, 0.5f, 0.75f};
    for (int y = 0; y < 16; ++y)
      for (int x = 0; x < 16; ++x) f.occlusion.set(x, y, true);
    const Image out = apply_warp(img, f);
    for (int y = 0; y < 16; ++y)
      for (int x = 0; x < 16; ++x) CHECK(out.rgb(x, y) == f.occluder_color);
  }
  SUBCASE("resolution mismatch") { CHECK_THROWS_AS(apply_warp(img, WarpField::zero(8)), ShapeError); }
}

TEST_CASE("derive_normal_map on closed-form height fields") {
  SUBCASE("flat") {
    const Image n = derive_normal_map(WarpField::zero(8));
    for (int y = 0; y < 8; ++y)
      for (int x = 0; x < 8; ++x) CHECK(n.rgb(x, y) == Rgb{0.5f, 0.5f, 1.0f});
  }
  SUBCASE("height = x") {
    WarpField f = WarpField::zero(8);
    for (int y = 0; y < 8; ++y)
      for (int x = 0; x < 8; ++x) f.height[static_cast<std::size_t>(y) * 8 + x] = static_cast<float>(x);
    const Image n = derive_normal_map(f);
    const double r = 1.0 / std::sqrt(2.0);
    for (int y = 0; y < 8; ++y)
      for (int x = 0; x < 8; ++x) {
        const auto d = decode_normal(n, x, y);
        CHECK(d[0] == doctest::Approx(-r).epsilon(1e-6));
        CHECK(d[1] == doctest::Approx(0.0).epsilon(1e-6));
        CHECK(d[2] == doctest::Approx(r).epsilon(1e-6));
      }
  }
  SUBCASE("random fields decode to unit vectors, also after 8-bit snapping") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const WarpField f = make_warp_field(2.0, 32, seed);
      const Image n = derive_normal_map(f);
      const Image q = snap_normal_map_8bit(n);
      for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 32; ++x) {
          CHECK(std::abs(norm3(decode_normal(n, x, y)) - 1.0) <= 1e-6);
          CHECK(std::abs(norm3(decode_normal(q, x, y)) - 1.0) <= 1e-3);
          CHECK(max_abs_diff(quantize8(q), q) == 0.0f);
        }
    }
  }
  SUBCASE("encode/decode round trip within 1/255") {
    const Image e = quantize8(encode_normal(0.6f, -0.48f, 0.64f));
    const auto d = decode_normal(e, 0, 0);
    CHECK(std::abs(d[0] - 0.6) <= 2.0 / 255.0);
    CHECK(std::abs(d[1] + 0.48) <= 2.0 / 255.0);
    CHECK(std::abs(d[2] - 0.64) <= 2.0 / 255.0);
  }
}

TEST_CASE("generate_sample at zero strength places the gt crop unwarped") {
  DatagenConfig c = small_config();
  c.strength_max = 0.0;
  const Sample s = generate_sample(c, 21);
  CHECK(s.meta.strength == 0.0);
  Mask sil;
  const Image placed = place_on_silhouette(s.gt_crop, c.garment, c.resolution, &sil);
  CHECK(s.garment_mask == sil);
  for (int y = 0; y < c.resolution; ++y)
    for (int x = 0; x < c.resolution; ++x)
      if (s.garment_mask.at(x, y)) CHECK(s.input_image.rgb(x, y) == placed.rgb(x, y));
}

TEST_CASE("generate_sample is deterministic and respects its invariants") {
  const DatagenConfig c = small_config();
  // stored normal maps hold 8-bit codes, so the flat background is the snapped (0, 0, 1)
  const Rgb flat = snap_normal_map_8bit(encode_normal(0.0f, 0.0f, 1.0f)).rgb(0, 0);
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const Sample a = generate_sample(c, seed);
    const Sample b = generate_sample(c, seed);
    CHECK(samples_match(a, b, 0.0f));
    CHECK(a.meta.region == "torso_front");
    CHECK(a.gt_crop.width == c.crop_size);
    for (int y = 0; y < c.resolution; ++y)
      for (int x = 0; x < c.resolution; ++x) {
        if (!a.garment_mask.at(x, y)) {
          CHECK(a.input_image.rgb(x, y) == Rgb{0.0f, 0.0f, 0.0f});
          CHECK(a.normal_map.rgb(x, y) == flat);
        }
      }
  }
}

TEST_CASE("gt_crop is cut from the texture before any warp") {
  // The crop depends on the texture seeds only, so changing the warp range
  // leaves it unchanged.
  DatagenConfig calm = small_config();
  calm.strength_min = calm.strength_max = 0.0;
  DatagenConfig rough = calm;
  rough.strength_min = rough.strength_max = 2.0;
  rough.zero_strength_fraction = 0.0;
  calm.zero_strength_fraction = 0.0;
  const Sample a = generate_sample(calm, 5);
  const Sample b = generate_sample(rough, 5);
  CHECK(a.gt_crop == b.gt_crop);
  CHECK(a.input_image != b.input_image);
}

TEST_CASE("generate_samples is independent of the worker count") {
  const DatagenConfig c = small_config();
  const auto one = generate_samples(c, 6, 42, 1);
  const auto three = generate_samples(c, 6, 42, 3);
  REQUIRE(one.size() == 6);
  for (std::size_t i = 0; i < one.size(); ++i) CHECK(samples_match(one[i], three[i], 0.0f));
  CHECK(one[2].id == "000002");
}

TEST_CASE("dataset write/read round trip and validation") {
  const DatagenConfig c = small_config();
  const auto samples = generate_samples(c, 64, 9);
  test::TempDir dir("dataset");
  const DatasetManifest m = write_dataset(samples, c, 9, dir.path());
  CHECK(m.num_samples == 64);
  CHECK_NOTHROW(validate_dataset(dir.path()));
  const Dataset back = read_dataset(dir.path());
  REQUIRE(back.samples.size() == samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) CHECK(samples_match(back.samples[i], samples[i], 0.5f / 255.0f + 1e-6f));

  SUBCASE("missing file") {
    std::filesystem::remove(dir / m.samples[3].gt);
    CHECK_THROWS_AS(read_dataset(dir.path()), ManifestError);
  }
  SUBCASE("count mismatch") {
    auto j = nlohmann::json::parse(test::read_bytes(dir / "manifest.json"));
    j["num_samples"] = 63;
    std::ofstream(dir / "manifest.json") << j.dump();
    CHECK_THROWS_AS(read_dataset(dir.path()), ManifestError);
  }
  SUBCASE("version mismatch") {
    auto j = nlohmann::json::parse(test::read_bytes(dir / "manifest.json"));
    j["version"] = "2.0.0";
    std::ofstream(dir / "manifest.json") << j.dump();
    CHECK_THROWS_AS(read_dataset(dir.path()), ManifestError);
  }
}
