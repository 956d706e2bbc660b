#include "texunwarp/png_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <vector>

#include "texunwarp/error.hpp"

namespace texunwarp {
namespace {

void write_raw(const std::filesystem::path& path, int w, int h, int channels,
               const std::vector<png_byte>& bytes) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(w);
  image.height = static_cast<png_uint_32>(h);
  image.format = channels == 1 ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&image, path.c_str(), 0, bytes.data(), 0, nullptr))
    throw IoError("cannot write " + path.string() + ": " + image.message);
}

std::vector<png_byte> read_raw(const std::filesystem::path& path, int channels, int& w, int& h) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str()))
    throw IoError("cannot read " + path.string() + ": " + image.message);
  image.format = channels == 1 ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  std::vector<png_byte> bytes(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, bytes.data(), 0, nullptr))
    throw IoError("cannot decode " + path.string() + ": " + image.message);
  w = static_cast<int>(image.width);
  h = static_cast<int>(image.height);
  return bytes;
}

}  // namespace

void write_png(const Image& img, const std::filesystem::path& path) {
  if (img.channels != 1 && img.channels != 3) throw ShapeError("png supports 1 or 3 channels");
  std::vector<png_byte> bytes(img.data.size());
  for (std::size_t i = 0; i < bytes.size(); ++i)
    bytes[i] = static_cast<png_byte>(std::lround(std::clamp(img.data[i], 0.0f, 1.0f) * 255.0f));
  write_raw(path, img.width, img.height, img.channels, bytes);
}

Image read_png(const std::filesystem::path& path, int channels) {
  int w = 0, h = 0;
  const auto bytes = read_raw(path, channels, w, h);
  Image img(w, h, channels);
  for (std::size_t i = 0; i < bytes.size(); ++i) img.data[i] = bytes[i] / 255.0f;
  return img;
}

void write_mask_png(const Mask& mask, const std::filesystem::path& path) {
  std::vector<png_byte> bytes(mask.data.size());
  for (std::size_t i = 0; i < bytes.size(); ++i) bytes[i] = mask.data[i] ? 255 : 0;
  write_raw(path, mask.width, mask.height, 1, bytes);
}

Mask read_mask_png(const std::filesystem::path& path) {
  int w = 0, h = 0;
  const auto bytes = read_raw(path, 1, w, h);
  Mask m(w, h);
  for (std::size_t i = 0; i < bytes.size(); ++i) m.data[i] = bytes[i] >= 128 ? 1 : 0;
  return m;
}

}  // namespace texunwarp
