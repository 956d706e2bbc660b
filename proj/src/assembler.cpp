#include "texunwarp/assembler.hpp"

#include <algorithm>
#include <cmath>

#include "texunwarp/error.hpp"

namespace texunwarp {

PartialMap place_crop(const Image& crop, const SewingPatternLayout& layout, std::string_view region_name,
                      int map_size) {
  if (map_size < 1) throw SizeError("map size must be positive");
  const Region& region = layout.region(region_name);
  const PixelRect rect = pixel_rect(bounding_box(region.polygon), map_size, map_size);
  PartialMap pm{Image(map_size, map_size, crop.channels, 0.0f), Mask(map_size, map_size)};
  if (rect.width() <= 0 || rect.height() <= 0) return pm;
  const double sx = static_cast<double>(crop.width) / rect.width();
  const double sy = static_cast<double>(crop.height) / rect.height();
  for (int y = rect.y0; y < rect.y1; ++y)
    for (int x = rect.x0; x < rect.x1; ++x) {
      if (!point_in_polygon(region.polygon, (x + 0.5) / map_size, (y + 0.5) / map_size)) continue;
      const double u = (x - rect.x0 + 0.5) * sx - 0.5;
      const double v = (y - rect.y0 + 0.5) * sy - 0.5;
      for (int c = 0; c < crop.channels; ++c) pm.image.at(x, y, c) = sample_bilinear(crop, u, v, c);
      pm.known.set(x, y, true);
    }
  return pm;
}

PartialMap symmetry_fill(const PartialMap& pm, const SewingPatternLayout& layout) {
  PartialMap out = pm;
  const int w = pm.image.width, h = pm.image.height;
  for (const auto& pair : layout.symmetry_pairs) {
    const Mask source = layout.rasterize(w, h, pair.source);
    const Mask target = layout.rasterize(w, h, pair.target);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        if (!target.at(x, y) || pm.known.at(x, y) || out.known.at(x, y)) continue;
        // reflect the pixel center about the axis: x' + 0.5 = 2 a w - (x + 0.5)
        const int mx = static_cast<int>(std::lround(2.0 * pair.axis * w - x - 1.0));
        if (mx < 0 || mx >= w || !source.at(mx, y) || !pm.known.at(mx, y)) continue;
        for (int c = 0; c < pm.image.channels; ++c) out.image.at(x, y, c) = pm.image.at(mx, y, c);
        out.known.set(x, y, true);
      }
  }
  return out;
}

TextureMap inpaint_fill(const PartialMap& pm, const SewingPatternLayout& layout, const InpaintOptions& opts) {
  const int w = pm.image.width, h = pm.image.height, ch = pm.image.channels;
  if (pm.known.count() == 0) throw ParameterError("inpaint_fill needs at least one known pixel");
  const Mask regions = layout.rasterize(w, h);
  std::vector<std::size_t> holes;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if (regions.at(x, y) && !pm.known.at(x, y)) holes.push_back(static_cast<std::size_t>(y) * w + x);

  TextureMap out{pm.image, layout};
  if (holes.empty()) return out;

  std::vector<double> mean(static_cast<std::size_t>(ch), 0.0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if (pm.known.at(x, y))
        for (int c = 0; c < ch; ++c) mean[static_cast<std::size_t>(c)] += pm.image.at(x, y, c);
  for (double& m : mean) m /= static_cast<double>(pm.known.count());

  std::vector<std::uint8_t> active(static_cast<std::size_t>(w) * h, 0);
  for (std::size_t i = 0; i < active.size(); ++i) active[i] = pm.known.data[i];
  for (std::size_t i : holes) {
    active[i] = 1;
    for (int c = 0; c < ch; ++c) out.image.data[i * ch + c] = static_cast<float>(mean[static_cast<std::size_t>(c)]);
  }

  std::vector<float> next = out.image.data;
  const int dxs[4] = {1, -1, 0, 0}, dys[4] = {0, 0, 1, -1};
  for (int it = 0; it < opts.max_iterations; ++it) {
    double change = 0.0;
    for (std::size_t i : holes) {
      const int x = static_cast<int>(i % w), y = static_cast<int>(i / w);
      for (int c = 0; c < ch; ++c) {
        double sum = 0.0;
        int n = 0;
        for (int k = 0; k < 4; ++k) {
          const int nx = x + dxs[k], ny = y + dys[k];
          if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
          const std::size_t j = static_cast<std::size_t>(ny) * w + nx;
          if (!active[j]) continue;
          sum += out.image.data[j * ch + c];
          ++n;
        }
        if (n == 0) continue;
        const float v = static_cast<float>(sum / n);
        change = std::max(change, static_cast<double>(std::abs(v - out.image.data[i * ch + c])));
        next[i * ch + c] = v;
      }
    }
    for (std::size_t i : holes)
      for (int c = 0; c < ch; ++c) out.image.data[i * ch + c] = next[i * ch + c];
    if (change < opts.tolerance) break;
  }
  return out;
}

TextureMap assemble(const Image& crop, const SewingPatternLayout& layout, int map_size, const InpaintOptions& opts) {
  const PartialMap placed = place_crop(crop, layout, layout.canonical_region(), map_size);
  return inpaint_fill(symmetry_fill(placed, layout), layout, opts);
}

}  // namespace texunwarp
