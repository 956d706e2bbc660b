#include "texunwarp/image.hpp"

#include <algorithm>
#include <cmath>

#include "texunwarp/error.hpp"

namespace texunwarp {

Image::Image(int w, int h, int c, float fill)
    : width(w), height(h), channels(c), data(static_cast<std::size_t>(w) * h * c, fill) {
  if (w < 0 || h < 0 || c <= 0) throw SizeError("invalid image dimensions");
}

void Image::set_rgb(int x, int y, const Rgb& v) {
  for (int c = 0; c < 3; ++c) at(x, y, c) = v[c];
}

Rgb Image::rgb(int x, int y) const { return {at(x, y, 0), at(x, y, 1), at(x, y, 2)}; }

Mask::Mask(int w, int h, bool fill)
    : width(w), height(h), data(static_cast<std::size_t>(w) * h, fill ? 1 : 0) {}

std::size_t Mask::count() const {
  return static_cast<std::size_t>(std::count(data.begin(), data.end(), std::uint8_t{1}));
}

double Mask::fraction() const {
  return data.empty() ? 0.0 : static_cast<double>(count()) / static_cast<double>(data.size());
}

float sample_bilinear(const Image& img, double x, double y, int c) {
  x = std::clamp(x, 0.0, static_cast<double>(img.width - 1));
  y = std::clamp(y, 0.0, static_cast<double>(img.height - 1));
  const int x0 = static_cast<int>(std::floor(x));
  const int y0 = static_cast<int>(std::floor(y));
  const double fx = x - x0;
  const double fy = y - y0;
  if (fx == 0.0 && fy == 0.0) return img.at(x0, y0, c);
  const int x1 = std::min(x0 + 1, img.width - 1);
  const int y1 = std::min(y0 + 1, img.height - 1);
  const double top = (1.0 - fx) * img.at(x0, y0, c) + fx * img.at(x1, y0, c);
  const double bottom = (1.0 - fx) * img.at(x0, y1, c) + fx * img.at(x1, y1, c);
  return static_cast<float>((1.0 - fy) * top + fy * bottom);
}

Image resample_rect(const Image& src, double x0, double y0, double w, double h, int out_w,
                    int out_h) {
  if (out_w <= 0 || out_h <= 0 || w <= 0.0 || h <= 0.0) throw SizeError("empty resample target");
  Image out(out_w, out_h, src.channels);
  const double sx = w / out_w;
  const double sy = h / out_h;
  for (int y = 0; y < out_h; ++y) {
    const double v = y0 + (y + 0.5) * sy - 0.5;
    for (int x = 0; x < out_w; ++x) {
      const double u = x0 + (x + 0.5) * sx - 0.5;
      for (int c = 0; c < src.channels; ++c) out.at(x, y, c) = sample_bilinear(src, u, v, c);
    }
  }
  return out;
}

Image resize_bilinear(const Image& src, int out_w, int out_h) {
  return resample_rect(src, 0.0, 0.0, src.width, src.height, out_w, out_h);
}

Image to_gray(const Image& src) {
  if (src.channels == 1) return src;
  Image out(src.width, src.height, 1);
  for (int y = 0; y < src.height; ++y)
    for (int x = 0; x < src.width; ++x)
      out.at(x, y) = 0.299f * src.at(x, y, 0) + 0.587f * src.at(x, y, 1) + 0.114f * src.at(x, y, 2);
  return out;
}

Image quantize8(const Image& src) {
  Image out = src;
  for (float& v : out.data) v = std::round(std::clamp(v, 0.0f, 1.0f) * 255.0f) / 255.0f;
  return out;
}

float max_abs_diff(const Image& a, const Image& b) {
  if (!a.same_shape(b)) throw ShapeError("image shapes differ");
  float m = 0.0f;
  for (std::size_t i = 0; i < a.data.size(); ++i) m = std::max(m, std::abs(a.data[i] - b.data[i]));
  return m;
}

}  // namespace texunwarp
