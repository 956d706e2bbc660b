#include "texunwarp/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <thread>

#include "texunwarp/error.hpp"
#include "texunwarp/png_io.hpp"

namespace texunwarp {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {
constexpr double kPi = std::numbers::pi;

float luma(const Rgb& c) { return 0.299f * c[0] + 0.587f * c[1] + 0.114f * c[2]; }

// Values within 1e-9 of an integer are snapped so exact rotations stay exact.
double snap(double v) {
  const double r = std::round(v);
  return std::abs(v - r) < 1e-9 ? r : v;
}
}  // namespace

// ---------------------------------------------------------------------------
// Procedural textures

std::string_view to_string(PatternKind k) {
  switch (k) {
    case PatternKind::stripes: return "stripes";
    case PatternKind::diagonal_stripes: return "diagonal_stripes";
    case PatternKind::checker: return "checker";
    case PatternKind::dots: return "dots";
    case PatternKind::floral_blobs: return "floral_blobs";
  }
  return "stripes";
}

PatternKind pattern_kind_from_string(std::string_view s) {
  for (auto k : {PatternKind::stripes, PatternKind::diagonal_stripes, PatternKind::checker,
                 PatternKind::dots, PatternKind::floral_blobs})
    if (to_string(k) == s) return k;
  throw ParameterError("unknown pattern family '" + std::string(s) + "'");
}

void PatternFamily::validate() const {
  if (!(period >= 2.0) || !std::isfinite(period)) throw ParameterError("pattern period must be >= 2 px");
  if (!(angle_deg >= 0.0 && angle_deg < 180.0)) throw ParameterError("pattern angle must be in [0, 180)");
  for (const Rgb* c : {&color_a, &color_b})
    for (float v : *c)
      if (!(v >= 0.0f && v <= 1.0f)) throw ParameterError("pattern colors must be in [0, 1]");
}

void to_json(json& j, const PatternFamily& f) {
  j = json{{"kind", to_string(f.kind)},
           {"period", f.period},
           {"angle_deg", f.angle_deg},
           {"color_a", f.color_a},
           {"color_b", f.color_b}};
}

void from_json(const json& j, PatternFamily& f) {
  f.kind = pattern_kind_from_string(j.at("kind").get<std::string>());
  f.period = j.at("period").get<double>();
  f.angle_deg = j.value("angle_deg", 0.0);
  f.color_a = j.at("color_a").get<Rgb>();
  f.color_b = j.at("color_b").get<Rgb>();
}

PatternFamily random_family(Rng& rng) {
  PatternFamily f;
  f.kind = static_cast<PatternKind>(uniform_int(rng, 0, 4));
  f.period = uniform_int(rng, 4, 12);
  f.angle_deg = uniform(rng, 15.0, 165.0);
  auto color = [&] {
    return Rgb{static_cast<float>(uniform(rng, 0.0, 1.0)), static_cast<float>(uniform(rng, 0.0, 1.0)),
               static_cast<float>(uniform(rng, 0.0, 1.0))};
  };
  f.color_a = color();
  f.color_b = color();
  for (int tries = 0; tries < 64 && std::abs(luma(f.color_a) - luma(f.color_b)) < 0.3f; ++tries)
    f.color_b = color();
  if (std::abs(luma(f.color_a) - luma(f.color_b)) < 0.3f) {
    f.color_a = {0.05f, 0.05f, 0.05f};
    f.color_b = {0.95f, 0.95f, 0.95f};
  }
  return f;
}

Image gen_procedural_texture(const PatternFamily& family, int size, std::uint64_t seed) {
  family.validate();
  if (size < 1) throw SizeError("texture size must be positive");
  Image img(size, size);
  const double p = family.period;
  auto pick = [&](bool a) { return a ? family.color_a : family.color_b; };

  switch (family.kind) {
    case PatternKind::stripes:
      for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) img.set_rgb(x, y, pick(static_cast<long>(std::floor(x / p)) % 2 == 0));
      break;
    case PatternKind::diagonal_stripes: {
      const double t = family.angle_deg * kPi / 180.0;
      const double c = std::cos(t), s = std::sin(t);
      for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
          const long band = static_cast<long>(std::floor((x * c + y * s) / p));
          img.set_rgb(x, y, pick(((band % 2) + 2) % 2 == 0));
        }
      break;
    }
    case PatternKind::checker:
      for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
          const long k = static_cast<long>(std::floor(x / p)) + static_cast<long>(std::floor(y / p));
          img.set_rgb(x, y, pick(k % 2 == 0));
        }
      break;
    case PatternKind::dots: {
      Rng rng(seed);
      const double ox = uniform(rng, 0.0, p), oy = uniform(rng, 0.0, p);
      const double r = 0.3 * p;
      for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
          const double u = std::fmod(x + ox, p) - 0.5 * p;
          const double v = std::fmod(y + oy, p) - 0.5 * p;
          img.set_rgb(x, y, pick(u * u + v * v <= r * r));
        }
      break;
    }
    case PatternKind::floral_blobs: {
      Rng rng(seed);
      for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) img.set_rgb(x, y, family.color_b);
      Rgb center;
      for (int c = 0; c < 3; ++c) center[c] = 0.5f * (family.color_a[c] + family.color_b[c]);
      const int flowers = std::max(1, static_cast<int>(size * size / (p * p * 6.0)));
      for (int f = 0; f < flowers; ++f) {
        const double cx = uniform(rng, 0.0, size), cy = uniform(rng, 0.0, size);
        const double petal = p * uniform(rng, 0.5, 1.0);
        const double turn = uniform(rng, 0.0, 2.0 * kPi);
        std::vector<std::array<double, 3>> discs;  // x, y, radius
        for (int k = 0; k < 5; ++k) {
          const double a = turn + 2.0 * kPi * k / 5.0;
          discs.push_back({cx + petal * std::cos(a), cy + petal * std::sin(a), 0.6 * petal});
        }
        const int x0 = std::max(0, static_cast<int>(cx - 2 * petal)), x1 = std::min(size, static_cast<int>(cx + 2 * petal) + 1);
        const int y0 = std::max(0, static_cast<int>(cy - 2 * petal)), y1 = std::min(size, static_cast<int>(cy + 2 * petal) + 1);
        for (int y = y0; y < y1; ++y)
          for (int x = x0; x < x1; ++x) {
            const double dcx = x - cx, dcy = y - cy;
            if (dcx * dcx + dcy * dcy <= 0.16 * petal * petal) {
              img.set_rgb(x, y, center);
              continue;
            }
            for (const auto& d : discs) {
              const double ux = x - d[0], uy = y - d[1];
              if (ux * ux + uy * uy <= d[2] * d[2]) {
                img.set_rgb(x, y, family.color_a);
                break;
              }
            }
          }
      }
      break;
    }
  }
  return img;
}

Image rotate_crop(const Image& image, double angle_deg, double x0, double y0, int crop) {
  if (crop < 1) throw SizeError("crop must be positive");
  const double t = angle_deg * kPi / 180.0;
  const double c = std::cos(t), s = std::sin(t);
  const double cx = (image.width - 1) / 2.0, cy = (image.height - 1) / 2.0;
  Image out(crop, crop, image.channels);
  for (int v = 0; v < crop; ++v)
    for (int u = 0; u < crop; ++u) {
      const double px = x0 + u - cx, py = y0 + v - cy;
      // inverse rotation maps an output location back into the source
      const double sx = snap(c * px + s * py + cx);
      const double sy = snap(-s * px + c * py + cy);
      for (int ch = 0; ch < image.channels; ++ch) out.at(u, v, ch) = sample_bilinear(image, sx, sy, ch);
    }
  return out;
}

Image augment_texture(const Image& image, std::uint64_t seed, int crop) {
  if (crop < 1) throw SizeError("crop must be positive");
  if (image.width < 2 * crop || image.height < 2 * crop)
    throw SizeError("augment_texture needs an image at least twice the crop size");
  Rng rng(seed);
  const double angle = uniform(rng, 0.0, 360.0);
  const int side = std::min(image.width, image.height);
  // keep every window corner inside the inscribed circle for any rotation
  const int margin =
      std::max(0, static_cast<int>(std::floor((side / 2.0 - 1.0) / std::numbers::sqrt2 - crop / 2.0)));
  const int dx = uniform_int(rng, -margin, margin);
  const int dy = uniform_int(rng, -margin, margin);
  const double x0 = (image.width - crop) / 2 + dx;
  const double y0 = (image.height - crop) / 2 + dy;
  return rotate_crop(image, angle, x0, y0, crop);
}

TextureMap crop_to_pattern(const Image& texture, const SewingPatternLayout& layout) {
  const Mask inside = layout.rasterize(texture.width, texture.height);
  TextureMap map{Image(texture.width, texture.height, texture.channels, 0.0f), layout};
  for (int y = 0; y < texture.height; ++y)
    for (int x = 0; x < texture.width; ++x)
      if (inside.at(x, y))
        for (int c = 0; c < texture.channels; ++c) map.image.at(x, y, c) = texture.at(x, y, c);
  return map;
}

// ---------------------------------------------------------------------------
// Warp simulation

WarpField WarpField::zero(int resolution) {
  if (resolution < 1) throw SizeError("warp resolution must be positive");
  WarpField f;
  f.resolution = resolution;
  const std::size_t n = static_cast<std::size_t>(resolution) * resolution;
  f.dx.assign(n, 0.0f);
  f.dy.assign(n, 0.0f);
  f.height.assign(n, 0.0f);
  f.occlusion = Mask(resolution, resolution);
  return f;
}

float WarpField::max_displacement() const {
  float m = 0.0f;
  for (std::size_t i = 0; i < dx.size(); ++i) m = std::max(m, std::hypot(dx[i], dy[i]));
  return m;
}

double displacement_bound(double strength, const WarpOptions& opts) {
  return strength * (opts.num_bases + opts.num_bumps);
}

WarpField make_warp_field(double strength, int resolution, std::uint64_t seed, const WarpOptions& opts) {
  if (!(strength >= 0.0) || !std::isfinite(strength)) throw ParameterError("warp strength must be >= 0");
  WarpField f = WarpField::zero(resolution);
  f.occluder_color = opts.occluder_color;
  if (strength == 0.0) return f;

  const int n = resolution;
  Rng rng(seed);
  for (int k = 0; k < opts.num_bases; ++k) {
    const double theta = uniform(rng, 0.0, 2.0 * kPi);
    const double omega = 2.0 * kPi / uniform(rng, n / 4.0, static_cast<double>(n));
    const double amp = strength * uniform(rng, 0.5, 1.0);
    const double phase = uniform(rng, 0.0, 2.0 * kPi);
    const double wx = omega * std::cos(theta), wy = omega * std::sin(theta);
    for (int y = 0; y < n; ++y)
      for (int x = 0; x < n; ++x) {
        const double arg = wx * x + wy * y + phase;
        const std::size_t i = static_cast<std::size_t>(y) * n + x;
        f.height[i] += static_cast<float>(amp / omega * std::sin(arg));
        f.dx[i] += static_cast<float>(amp * std::cos(theta) * std::cos(arg));
        f.dy[i] += static_cast<float>(amp * std::sin(theta) * std::cos(arg));
      }
  }
  for (int b = 0; b < opts.num_bumps; ++b) {
    const double cx = uniform(rng, 0.0, n), cy = uniform(rng, 0.0, n);
    const double sigma = uniform(rng, n / 10.0, n / 4.0);
    const double amp = strength * uniform(rng, -1.0, 1.0);
    for (int y = 0; y < n; ++y)
      for (int x = 0; x < n; ++x) {
        const double ux = x - cx, uy = y - cy;
        const double e = std::exp(-(ux * ux + uy * uy) / (2.0 * sigma * sigma));
        const std::size_t i = static_cast<std::size_t>(y) * n + x;
        f.height[i] += static_cast<float>(amp * sigma * e);
        f.dx[i] += static_cast<float>(-amp * ux / sigma * e);
        f.dy[i] += static_cast<float>(-amp * uy / sigma * e);
      }
  }

  if (opts.max_occluders > 0) {
    const int count = uniform_int(rng, 1, opts.max_occluders);
    for (int o = 0; o < count; ++o) {
      const double cx = uniform(rng, 0.1, 0.9) * n, cy = uniform(rng, 0.2, 0.9) * n;
      const double rx = uniform(rng, 0.06, 0.16) * n, ry = uniform(rng, 0.06, 0.16) * n;
      const int vertices = uniform_int(rng, 5, 8);
      std::vector<double> angles(vertices);
      for (double& a : angles) a = uniform(rng, 0.0, 2.0 * kPi);
      std::sort(angles.begin(), angles.end());
      Polygon poly;  // points on an ellipse in angular order form a convex polygon
      for (double a : angles) poly.push_back({(cx + rx * std::cos(a)) / n, (cy + ry * std::sin(a)) / n});
      Mask next = f.occlusion;
      for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x)
          if (point_in_polygon(poly, (x + 0.5) / n, (y + 0.5) / n)) next.set(x, y, true);
      if (next.fraction() <= 0.5) f.occlusion = std::move(next);
    }
  }
  return f;
}

namespace {
Image warp_only(const Image& image, const WarpField& warp) {
  if (image.width != warp.resolution || image.height != warp.resolution)
    throw ShapeError("image and warp field resolutions differ");
  Image out(image.width, image.height, image.channels);
  for (int y = 0; y < image.height; ++y)
    for (int x = 0; x < image.width; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * image.width + x;
      const double sx = x + static_cast<double>(warp.dx[i]);
      const double sy = y + static_cast<double>(warp.dy[i]);
      for (int c = 0; c < image.channels; ++c) out.at(x, y, c) = sample_bilinear(image, sx, sy, c);
    }
  return out;
}
}  // namespace

Image apply_warp(const Image& image, const WarpField& warp) {
  Image out = warp_only(image, warp);
  for (int y = 0; y < out.height; ++y)
    for (int x = 0; x < out.width; ++x)
      if (warp.occlusion.at(x, y))
        for (int c = 0; c < out.channels; ++c) out.at(x, y, c) = warp.occluder_color[c % 3];
  return out;
}

Image derive_normal_map(const WarpField& warp) {
  const int n = warp.resolution;
  for (float h : warp.height)
    if (!std::isfinite(h)) throw NumericError("height field is not finite");
  auto h = [&](int x, int y) { return static_cast<double>(warp.height[static_cast<std::size_t>(y) * n + x]); };
  // central differences inside, one-sided on the border
  auto diff = [n](auto&& at, int i) -> double {
    if (n == 1) return 0.0;
    if (i == 0) return at(1) - at(0);
    if (i == n - 1) return at(n - 1) - at(n - 2);
    return 0.5 * (at(i + 1) - at(i - 1));
  };
  Image out(n, n);
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) {
      const double gx = diff([&](int i) { return h(i, y); }, x);
      const double gy = diff([&](int i) { return h(x, i); }, y);
      const double len = std::sqrt(gx * gx + gy * gy + 1.0);
      out.set_rgb(x, y,
                  {static_cast<float>((-gx / len + 1.0) / 2.0), static_cast<float>((-gy / len + 1.0) / 2.0),
                   static_cast<float>((1.0 / len + 1.0) / 2.0)});
    }
  return out;
}

Image encode_normal(float nx, float ny, float nz) {
  Image out(1, 1);
  out.set_rgb(0, 0, {(nx + 1.0f) / 2.0f, (ny + 1.0f) / 2.0f, (nz + 1.0f) / 2.0f});
  return out;
}

std::array<double, 3> decode_normal(const Image& normal_map, int x, int y) {
  return {2.0 * normal_map.at(x, y, 0) - 1.0, 2.0 * normal_map.at(x, y, 1) - 1.0,
          2.0 * normal_map.at(x, y, 2) - 1.0};
}

Image snap_normal_map_8bit(const Image& normal_map) {
  constexpr double kTol = 9e-4;
  auto dec = [](int code) { return 2.0 * code / 255.0 - 1.0; };
  Image out(normal_map.width, normal_map.height, 3);
  for (int y = 0; y < normal_map.height; ++y)
    for (int x = 0; x < normal_map.width; ++x) {
      auto n = decode_normal(normal_map, x, y);
      const double len = std::sqrt(n[0] * n[0] + n[1] * n[1] + n[2] * n[2]);
      if (len > 0.0)
        for (double& v : n) v /= len;
      int ideal[3];
      for (int c = 0; c < 3; ++c) ideal[c] = static_cast<int>(std::lround((n[c] + 1.0) / 2.0 * 255.0));

      int best[3] = {ideal[0], ideal[1], ideal[2]};
      double best_cost = 1e300, best_norm_err = 1e300;
      bool feasible = false;
      // near-flat normals need the wider x/y reach: between the z = 255 and
      // z = 254 code rings there is no unit-length code close by
      for (int kz = -3; kz <= 3; ++kz)
        for (int ky = -8; ky <= 8; ++ky)
          for (int kx = -8; kx <= 8; ++kx) {
            const int code[3] = {std::clamp(ideal[0] + kx, 0, 255), std::clamp(ideal[1] + ky, 0, 255),
                                 std::clamp(ideal[2] + kz, 0, 255)};
            const double d[3] = {dec(code[0]), dec(code[1]), dec(code[2])};
            const double norm = std::sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2]);
            const double err = std::abs(norm - 1.0);
            const double misalign = 1.0 - (d[0] * n[0] + d[1] * n[1] + d[2] * n[2]) / norm;
            if (err <= kTol) {
              if (!feasible || misalign < best_cost) {
                feasible = true;
                best_cost = misalign;
                std::copy(code, code + 3, best);
              }
            } else if (!feasible && err < best_norm_err) {
              best_norm_err = err;
              std::copy(code, code + 3, best);
            }
          }
      for (int c = 0; c < 3; ++c) out.at(x, y, c) = static_cast<float>(best[c]) / 255.0f;
    }
  return out;
}

// ---------------------------------------------------------------------------
// Samples

void DatagenConfig::validate() const {
  if (resolution < 16 || crop_size < 16 || map_size < 16) throw ParameterError("resolutions must be >= 16 px");
  if (!(strength_min >= 0.0 && strength_max >= strength_min))
    throw ParameterError("strength range must satisfy 0 <= min <= max");
  if (!(zero_strength_fraction >= 0.0 && zero_strength_fraction <= 1.0))
    throw ParameterError("zero_strength_fraction must be in [0, 1]");
  if (warp.num_bases < 0 || warp.num_bumps < 0 || warp.max_occluders < 0)
    throw ParameterError("warp term counts must be >= 0");
  if (family) family->validate();
}

Polygon garment_silhouette(Garment garment) {
  if (garment == Garment::tshirt)
    return {{0.22, 0.10}, {0.40, 0.06}, {0.60, 0.06}, {0.78, 0.10},
            {0.84, 0.30}, {0.80, 0.94}, {0.20, 0.94}, {0.16, 0.30}};
  return {{0.22, 0.06}, {0.78, 0.06}, {0.84, 0.94}, {0.56, 0.94}, {0.50, 0.42}, {0.44, 0.94}, {0.16, 0.94}};
}

Image place_on_silhouette(const Image& crop, Garment garment, int resolution, Mask* silhouette) {
  const Polygon poly = garment_silhouette(garment);
  const PixelRect rect = pixel_rect(bounding_box(poly), resolution, resolution);
  Image out(resolution, resolution, crop.channels, 0.0f);
  Mask mask(resolution, resolution);
  const double sx = static_cast<double>(crop.width) / rect.width();
  const double sy = static_cast<double>(crop.height) / rect.height();
  for (int y = rect.y0; y < rect.y1; ++y)
    for (int x = rect.x0; x < rect.x1; ++x) {
      if (!point_in_polygon(poly, (x + 0.5) / resolution, (y + 0.5) / resolution)) continue;
      mask.set(x, y, true);
      const double u = (x - rect.x0 + 0.5) * sx - 0.5;
      const double v = (y - rect.y0 + 0.5) * sy - 0.5;
      for (int c = 0; c < crop.channels; ++c) out.at(x, y, c) = sample_bilinear(crop, u, v, c);
    }
  if (silhouette) *silhouette = std::move(mask);
  return out;
}

Sample generate_sample(const DatagenConfig& cfg, std::uint64_t seed, std::string id) {
  cfg.validate();
  const SewingPatternLayout layout = builtin_layout(cfg.garment);
  Rng rng(seed);
  Sample s;
  s.id = std::move(id);
  s.meta.family = cfg.family ? *cfg.family : random_family(rng);
  s.meta.texture_seed = rng();
  const std::uint64_t aug_seed = rng();
  s.meta.warp_seed = rng();
  const double u = uniform(rng, 0.0, 1.0);
  s.meta.strength = u < cfg.zero_strength_fraction ? 0.0 : uniform(rng, cfg.strength_min, cfg.strength_max);
  s.meta.region = std::string(layout.canonical_region());

  const Image texture = gen_procedural_texture(s.meta.family, 2 * cfg.map_size, s.meta.texture_seed);
  const Image full = augment_texture(texture, aug_seed, cfg.map_size);
  const PixelRect rect = pixel_rect(bounding_box(layout.region(s.meta.region).polygon), cfg.map_size, cfg.map_size);
  s.gt_crop = resample_rect(full, rect.x0, rect.y0, rect.width(), rect.height(), cfg.crop_size, cfg.crop_size);

  Mask silhouette;
  const Image placed = place_on_silhouette(s.gt_crop, cfg.garment, cfg.resolution, &silhouette);
  const WarpField warp = make_warp_field(s.meta.strength, cfg.resolution, s.meta.warp_seed, cfg.warp);
  const Image warped = apply_warp(placed, warp);

  Image coverage(cfg.resolution, cfg.resolution, 1);
  for (std::size_t i = 0; i < silhouette.data.size(); ++i) coverage.data[i] = silhouette.data[i];
  WarpField no_occlusion = warp;
  no_occlusion.occlusion = Mask(cfg.resolution, cfg.resolution);
  const Image moved = apply_warp(coverage, no_occlusion);

  s.garment_mask = Mask(cfg.resolution, cfg.resolution);
  s.input_image = Image(cfg.resolution, cfg.resolution, 3, 0.0f);
  Image normal = derive_normal_map(warp);
  for (int y = 0; y < cfg.resolution; ++y)
    for (int x = 0; x < cfg.resolution; ++x) {
      const bool garment = moved.at(x, y) > 0.5f && !warp.occlusion.at(x, y);
      s.garment_mask.set(x, y, garment);
      if (garment)
        s.input_image.set_rgb(x, y, warped.rgb(x, y));
      else
        normal.set_rgb(x, y, {0.5f, 0.5f, 1.0f});
    }
  s.normal_map = snap_normal_map_8bit(normal);
  return s;
}

std::vector<Sample> generate_samples(const DatagenConfig& cfg, int count, std::uint64_t seed, int threads) {
  if (count < 1) throw ParameterError("sample count must be >= 1");
  cfg.validate();
  std::vector<Sample> out(static_cast<std::size_t>(count));
  auto work = [&](int begin, int end) {
    for (int i = begin; i < end; ++i) {
      char id[16];
      std::snprintf(id, sizeof(id), "%06d", i);
      out[static_cast<std::size_t>(i)] = generate_sample(cfg, mix_seed(seed, static_cast<std::uint64_t>(i)), id);
    }
  };
  threads = std::clamp(threads, 1, count);
  if (threads == 1) {
    work(0, count);
    return out;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(threads));
  for (int t = 0; t < threads; ++t) {
    const int begin = count * t / threads, end = count * (t + 1) / threads;
    pool.emplace_back([&, t, begin, end] {
      try {
        work(begin, end);
      } catch (...) {
        errors[static_cast<std::size_t>(t)] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

bool samples_match(const Sample& a, const Sample& b, float tol) {
  auto close = [tol](const Image& x, const Image& y) { return x.same_shape(y) && max_abs_diff(x, y) <= tol; };
  return a.id == b.id && a.meta == b.meta && a.garment_mask == b.garment_mask && close(a.input_image, b.input_image) &&
         close(a.normal_map, b.normal_map) && close(a.gt_crop, b.gt_crop);
}

// ---------------------------------------------------------------------------
// Dataset files

void to_json(json& j, const DatasetManifest& m) {
  j = json{{"version", m.version},     {"garment", to_string(m.garment)}, {"resolution", m.resolution},
           {"crop_size", m.crop_size}, {"seed", m.seed},                  {"num_samples", m.num_samples}};
  j["samples"] = json::array();
  for (const auto& r : m.samples)
    j["samples"].push_back({{"id", r.id},
                            {"family", r.meta.family},
                            {"region", r.meta.region},
                            {"texture_seed", r.meta.texture_seed},
                            {"warp_seed", r.meta.warp_seed},
                            {"strength", r.meta.strength},
                            {"input", r.input},
                            {"normal", r.normal},
                            {"mask", r.mask},
                            {"gt", r.gt}});
}

void from_json(const json& j, DatasetManifest& m) {
  m.version = j.at("version").get<std::string>();
  m.garment = garment_from_string(j.at("garment").get<std::string>());
  m.resolution = j.at("resolution").get<int>();
  m.crop_size = j.at("crop_size").get<int>();
  m.seed = j.at("seed").get<std::uint64_t>();
  m.num_samples = j.at("num_samples").get<int>();
  m.samples.clear();
  for (const auto& r : j.at("samples")) {
    SampleRecord rec;
    rec.id = r.at("id").get<std::string>();
    rec.meta.family = r.at("family").get<PatternFamily>();
    rec.meta.region = r.at("region").get<std::string>();
    rec.meta.texture_seed = r.at("texture_seed").get<std::uint64_t>();
    rec.meta.warp_seed = r.at("warp_seed").get<std::uint64_t>();
    rec.meta.strength = r.at("strength").get<double>();
    rec.input = r.at("input").get<std::string>();
    rec.normal = r.at("normal").get<std::string>();
    rec.mask = r.at("mask").get<std::string>();
    rec.gt = r.at("gt").get<std::string>();
    m.samples.push_back(std::move(rec));
  }
}

DatasetManifest write_dataset(const std::vector<Sample>& samples, const DatagenConfig& cfg, std::uint64_t seed,
                              const fs::path& out_dir) {
  if (samples.empty()) throw ParameterError("refusing to write an empty dataset");
  fs::create_directories(out_dir / "samples");
  DatasetManifest m;
  m.garment = cfg.garment;
  m.resolution = cfg.resolution;
  m.crop_size = cfg.crop_size;
  m.seed = seed;
  m.num_samples = static_cast<int>(samples.size());
  for (const auto& s : samples) {
    SampleRecord r{s.id, s.meta, "samples/" + s.id + "_input.png", "samples/" + s.id + "_normal.png",
                   "samples/" + s.id + "_mask.png", "samples/" + s.id + "_gt.png"};
    write_png(s.input_image, out_dir / r.input);
    write_png(s.normal_map, out_dir / r.normal);
    write_mask_png(s.garment_mask, out_dir / r.mask);
    write_png(s.gt_crop, out_dir / r.gt);
    m.samples.push_back(std::move(r));
  }
  std::ofstream out(out_dir / "manifest.json");
  if (!out) throw IoError("cannot write manifest in " + out_dir.string());
  out << json(m).dump(2) << "\n";
  return m;
}

namespace {
DatasetManifest read_manifest(const fs::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw ManifestError("missing manifest.json in " + dir.string());
  try {
    DatasetManifest m = json::parse(in).get<DatasetManifest>();
    if (m.version.substr(0, m.version.find('.')) != "1")
      throw ManifestError("unsupported dataset version " + m.version);
    if (m.num_samples != static_cast<int>(m.samples.size()))
      throw ManifestError("manifest declares " + std::to_string(m.num_samples) + " samples but lists " +
                          std::to_string(m.samples.size()));
    for (const auto& r : m.samples)
      for (const auto* p : {&r.input, &r.normal, &r.mask, &r.gt})
        if (!fs::exists(dir / *p)) throw ManifestError("missing sample file " + *p);
    return m;
  } catch (const json::exception& e) {
    throw ManifestError(std::string("malformed manifest: ") + e.what());
  }
}
}  // namespace

Dataset read_dataset(const fs::path& dir) {
  Dataset d;
  d.manifest = read_manifest(dir);
  const auto& m = d.manifest;
  for (const auto& r : m.samples) {
    Sample s;
    s.id = r.id;
    s.meta = r.meta;
    s.input_image = read_png(dir / r.input, 3);
    s.normal_map = read_png(dir / r.normal, 3);
    s.garment_mask = read_mask_png(dir / r.mask);
    s.gt_crop = read_png(dir / r.gt, 3);
    if (s.input_image.width != m.resolution || s.input_image.height != m.resolution ||
        s.normal_map.width != m.resolution || s.normal_map.height != m.resolution ||
        s.garment_mask.width != m.resolution || s.garment_mask.height != m.resolution)
      throw ManifestError("sample " + r.id + " does not match the declared resolution");
    if (s.gt_crop.width != m.crop_size || s.gt_crop.height != m.crop_size)
      throw ManifestError("sample " + r.id + " does not match the declared crop size");
    d.samples.push_back(std::move(s));
  }
  return d;
}

void validate_dataset(const fs::path& dir) {
  const Dataset d = read_dataset(dir);
  for (const auto& s : d.samples) {
    for (int y = 0; y < s.normal_map.height; ++y)
      for (int x = 0; x < s.normal_map.width; ++x) {
        const auto n = decode_normal(s.normal_map, x, y);
        if (std::abs(std::sqrt(n[0] * n[0] + n[1] * n[1] + n[2] * n[2]) - 1.0) > 1e-3)
          throw ManifestError("sample " + s.id + " has a non-unit normal");
      }
    for (float v : s.input_image.data)
      if (!(v >= 0.0f && v <= 1.0f)) throw ManifestError("sample " + s.id + " input out of range");
    for (int y = 0; y < s.input_image.height; ++y)
      for (int x = 0; x < s.input_image.width; ++x)
        if (!s.garment_mask.at(x, y) && s.input_image.rgb(x, y) != Rgb{0.0f, 0.0f, 0.0f})
          throw ManifestError("sample " + s.id + " has garment pixels outside its mask");
  }
}

}  // namespace texunwarp
