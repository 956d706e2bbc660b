#pragma once

#include <string_view>

#include "texunwarp/datagen.hpp"
#include "texunwarp/image.hpp"
#include "texunwarp/layout.hpp"

namespace texunwarp {

/// A texture map under construction. Unknown pixels hold the background value 0.
struct PartialMap {
  Image image;
  Mask known;
};

/// Resamples `crop` into the bounding box of `region_name` and keeps the
/// pixels inside the region polygon.
PartialMap place_crop(const Image& crop, const SewingPatternLayout& layout, std::string_view region_name,
                      int map_size);

/// Mirrors known source pixels into unknown target pixels for every symmetry
/// pair. Known pixels are never touched, so the operation is idempotent.
PartialMap symmetry_fill(const PartialMap& pm, const SewingPatternLayout& layout);

struct InpaintOptions {
  int max_iterations = 500;
  double tolerance = 1e-4;  ///< stop once the largest per-sweep change drops below this
};

/// Jacobi diffusion of known colors into the unknown pixels of the layout's
/// regions. Fails when nothing is known.
TextureMap inpaint_fill(const PartialMap& pm, const SewingPatternLayout& layout, const InpaintOptions& opts = {});

/// place_crop -> symmetry_fill -> inpaint_fill on the canonical region.
TextureMap assemble(const Image& crop, const SewingPatternLayout& layout, int map_size,
                    const InpaintOptions& opts = {});

}  // namespace texunwarp
