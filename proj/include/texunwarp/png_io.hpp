#pragma once

#include <filesystem>

#include "texunwarp/image.hpp"

namespace texunwarp {

/// 8-bit lossless PNG. RGB images are written as RGB, single-channel as gray.
void write_png(const Image& img, const std::filesystem::path& path);
Image read_png(const std::filesystem::path& path, int channels = 3);

/// Masks are stored as gray PNGs holding 0 or 255.
void write_mask_png(const Mask& mask, const std::filesystem::path& path);
Mask read_mask_png(const std::filesystem::path& path);

}  // namespace texunwarp
