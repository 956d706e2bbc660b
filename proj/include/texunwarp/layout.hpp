#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "texunwarp/image.hpp"

namespace texunwarp {

enum class Garment { tshirt, pants };

std::string_view to_string(Garment g);
Garment garment_from_string(std::string_view s);

struct Point {
  double x = 0.0;
  double y = 0.0;
};

using Polygon = std::vector<Point>;

/// Even-odd crossing test in normalized coordinates.
bool point_in_polygon(const Polygon& poly, double x, double y);
bool polygon_self_intersects(const Polygon& poly);

struct BoundingBox {
  double min_x, min_y, max_x, max_y;
};
BoundingBox bounding_box(const Polygon& poly);

/// Integer pixel span [x0, x1) x [y0, y1) whose centers fall in a box.
struct PixelRect {
  int x0, y0, x1, y1;
  int width() const { return x1 - x0; }
  int height() const { return y1 - y0; }
};
PixelRect pixel_rect(const BoundingBox& box, int map_w, int map_h);

struct Region {
  std::string name;
  Polygon polygon;
};

/// Mirror `source` about the vertical line x = axis into `target`.
struct SymmetryPair {
  std::string source;
  std::string target;
  double axis = 0.5;
};

/// Named UV panels of a garment texture map in normalized [0,1]^2 coordinates.
struct SewingPatternLayout {
  Garment garment = Garment::tshirt;
  std::vector<Region> regions;
  std::vector<SymmetryPair> symmetry_pairs;

  const Region& region(std::string_view name) const;
  bool has_region(std::string_view name) const;

  /// Region whose texture the unwarper predicts: torso front or pants front.
  std::string_view canonical_region() const;

  /// Pixels whose centers fall inside the named region, or inside any region
  /// when `name` is empty.
  Mask rasterize(int map_w, int map_h, std::string_view name = {}) const;

  /// Throws ParameterError when any structural invariant is broken.
  void validate() const;
};

SewingPatternLayout builtin_layout(Garment garment);

void to_json(nlohmann::json& j, const SewingPatternLayout& layout);
void from_json(const nlohmann::json& j, SewingPatternLayout& layout);

SewingPatternLayout load_layout(const std::filesystem::path& path);
void save_layout(const SewingPatternLayout& layout, const std::filesystem::path& path);

}  // namespace texunwarp
