#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

namespace texunwarp {

using Rgb = std::array<float, 3>;

/// Interleaved (HWC) float raster. RGB images are kept in [0,1].
struct Image {
  int width = 0;
  int height = 0;
  int channels = 3;
  std::vector<float> data;

  Image() = default;
  Image(int w, int h, int c = 3, float fill = 0.0f);

  float& at(int x, int y, int c = 0) { return data[index(x, y, c)]; }
  float at(int x, int y, int c = 0) const { return data[index(x, y, c)]; }
  std::size_t index(int x, int y, int c = 0) const {
    return (static_cast<std::size_t>(y) * width + x) * channels + c;
  }
  std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }
  bool same_shape(const Image& o) const {
    return width == o.width && height == o.height && channels == o.channels;
  }
  void set_rgb(int x, int y, const Rgb& v);
  Rgb rgb(int x, int y) const;

  bool operator==(const Image&) const = default;
};

/// Boolean per-pixel raster.
struct Mask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;

  Mask() = default;
  Mask(int w, int h, bool fill = false);

  bool at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x] != 0; }
  void set(int x, int y, bool v) { data[static_cast<std::size_t>(y) * width + x] = v ? 1 : 0; }
  std::size_t count() const;
  double fraction() const;

  bool operator==(const Mask&) const = default;
};

/// Bilinear read at continuous pixel coordinates (pixel centers on integers),
/// clamped to the edge. Integer-aligned reads return the stored value exactly.
float sample_bilinear(const Image& img, double x, double y, int c);

/// Resamples the continuous rectangle [x0, x0+w) x [y0, y0+h) of `src`
/// (pixel-edge coordinates) onto an out_w x out_h raster.
Image resample_rect(const Image& src, double x0, double y0, double w, double h, int out_w,
                    int out_h);

Image resize_bilinear(const Image& src, int out_w, int out_h);

/// Rec. 601 luma for RGB, passthrough for single channel.
Image to_gray(const Image& src);

/// Rounds to the 8-bit grid, the same quantization a PNG round trip applies.
Image quantize8(const Image& src);

float max_abs_diff(const Image& a, const Image& b);

}  // namespace texunwarp
