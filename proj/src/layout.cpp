#include "texunwarp/layout.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

#include "texunwarp/error.hpp"

namespace texunwarp {

std::string_view to_string(Garment g) { return g == Garment::tshirt ? "tshirt" : "pants"; }

Garment garment_from_string(std::string_view s) {
  if (s == "tshirt") return Garment::tshirt;
  if (s == "pants") return Garment::pants;
  throw ParameterError("unknown garment '" + std::string(s) + "'");
}

bool point_in_polygon(const Polygon& poly, double x, double y) {
  bool inside = false;
  const std::size_t n = poly.size();
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const Point& a = poly[i];
    const Point& b = poly[j];
    if ((a.y > y) != (b.y > y) && x < (b.x - a.x) * (y - a.y) / (b.y - a.y) + a.x) inside = !inside;
  }
  return inside;
}

namespace {

double cross(const Point& o, const Point& a, const Point& b) {
  return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

bool segments_cross(const Point& p1, const Point& p2, const Point& q1, const Point& q2) {
  const double d1 = cross(q1, q2, p1);
  const double d2 = cross(q1, q2, p2);
  const double d3 = cross(p1, p2, q1);
  const double d4 = cross(p1, p2, q2);
  return ((d1 > 0) != (d2 > 0)) && ((d3 > 0) != (d4 > 0)) && d1 != 0 && d2 != 0 && d3 != 0 &&
         d4 != 0;
}

}  // namespace

bool polygon_self_intersects(const Polygon& poly) {
  const std::size_t n = poly.size();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = i + 1; k < n; ++k) {
      if (k == i + 1 || (i == 0 && k == n - 1)) continue;  // adjacent edges share a vertex
      if (segments_cross(poly[i], poly[(i + 1) % n], poly[k], poly[(k + 1) % n])) return true;
    }
  }
  return false;
}

BoundingBox bounding_box(const Polygon& poly) {
  BoundingBox b{1e300, 1e300, -1e300, -1e300};
  for (const auto& p : poly) {
    b.min_x = std::min(b.min_x, p.x);
    b.min_y = std::min(b.min_y, p.y);
    b.max_x = std::max(b.max_x, p.x);
    b.max_y = std::max(b.max_y, p.y);
  }
  return b;
}

PixelRect pixel_rect(const BoundingBox& box, int map_w, int map_h) {
  PixelRect r;
  r.x0 = std::max(0, static_cast<int>(std::ceil(box.min_x * map_w - 0.5)));
  r.y0 = std::max(0, static_cast<int>(std::ceil(box.min_y * map_h - 0.5)));
  r.x1 = std::min(map_w, static_cast<int>(std::floor(box.max_x * map_w - 0.5)) + 1);
  r.y1 = std::min(map_h, static_cast<int>(std::floor(box.max_y * map_h - 0.5)) + 1);
  return r;
}

const Region& SewingPatternLayout::region(std::string_view name) const {
  for (const auto& r : regions)
    if (r.name == name) return r;
  throw ParameterError("layout has no region '" + std::string(name) + "'");
}

bool SewingPatternLayout::has_region(std::string_view name) const {
  return std::any_of(regions.begin(), regions.end(), [&](const Region& r) { return r.name == name; });
}

std::string_view SewingPatternLayout::canonical_region() const {
  return garment == Garment::tshirt ? "torso_front" : "front";
}

Mask SewingPatternLayout::rasterize(int map_w, int map_h, std::string_view name) const {
  Mask m(map_w, map_h);
  for (const auto& r : regions) {
    if (!name.empty() && r.name != name) continue;
    const PixelRect rect = pixel_rect(bounding_box(r.polygon), map_w, map_h);
    for (int y = rect.y0; y < rect.y1; ++y)
      for (int x = rect.x0; x < rect.x1; ++x)
        if (point_in_polygon(r.polygon, (x + 0.5) / map_w, (y + 0.5) / map_h)) m.set(x, y, true);
  }
  return m;
}

void SewingPatternLayout::validate() const {
  std::map<std::string, int> names;
  for (const auto& r : regions) {
    if (r.polygon.size() < 3) throw ParameterError("region '" + r.name + "' has < 3 vertices");
    for (const auto& p : r.polygon)
      if (!(p.x >= 0.0 && p.x <= 1.0 && p.y >= 0.0 && p.y <= 1.0))
        throw ParameterError("region '" + r.name + "' leaves the unit square");
    if (polygon_self_intersects(r.polygon))
      throw ParameterError("region '" + r.name + "' is self-intersecting");
    if (++names[r.name] > 1) throw ParameterError("duplicate region '" + r.name + "'");
  }
  if (!has_region(canonical_region()))
    throw ParameterError("layout lacks canonical region '" + std::string(canonical_region()) + "'");

  constexpr int kProbe = 256;
  std::vector<int> owner(kProbe * kProbe, 0);
  for (const auto& r : regions) {
    const Mask m = rasterize(kProbe, kProbe, r.name);
    for (std::size_t i = 0; i < m.data.size(); ++i)
      if (m.data[i] && owner[i]++ > 0) throw ParameterError("regions overlap at '" + r.name + "'");
  }

  std::map<std::string, int> targets;
  for (const auto& s : symmetry_pairs) {
    if (!has_region(s.source) || !has_region(s.target))
      throw ParameterError("symmetry pair references an unknown region");
    if (s.source == s.target) throw ParameterError("symmetry pair maps a region onto itself");
    if (!(s.axis > 0.0 && s.axis < 1.0)) throw ParameterError("symmetry axis outside (0,1)");
    if (++targets[s.target] > 1)
      throw ParameterError("symmetry target '" + s.target + "' has more than one source");
  }
}

SewingPatternLayout builtin_layout(Garment garment) {
  SewingPatternLayout l;
  l.garment = garment;
  if (garment == Garment::tshirt) {
    l.regions = {
        {"torso_front",
         {{0.05, 0.10}, {0.17, 0.10}, {0.25, 0.20}, {0.33, 0.10}, {0.45, 0.10}, {0.45, 0.95},
          {0.05, 0.95}}},
        {"torso_back", {{0.55, 0.10}, {0.95, 0.10}, {0.95, 0.95}, {0.55, 0.95}}},
    };
    l.symmetry_pairs = {{"torso_front", "torso_back", 0.5}};
  } else {
    l.regions = {
        {"front",
         {{0.05, 0.05}, {0.45, 0.05}, {0.45, 0.95}, {0.29, 0.95}, {0.25, 0.45}, {0.21, 0.95},
          {0.05, 0.95}}},
        {"back",
         {{0.55, 0.02}, {0.95, 0.02}, {0.95, 0.95}, {0.79, 0.95}, {0.75, 0.50}, {0.71, 0.95},
          {0.55, 0.95}}},
    };
    l.symmetry_pairs = {{"front", "back", 0.5}};
  }
  return l;
}

void to_json(nlohmann::json& j, const SewingPatternLayout& layout) {
  j = nlohmann::json::object();
  j["garment"] = to_string(layout.garment);
  j["regions"] = nlohmann::json::array();
  for (const auto& r : layout.regions) {
    nlohmann::json poly = nlohmann::json::array();
    for (const auto& p : r.polygon) poly.push_back({p.x, p.y});
    j["regions"].push_back({{"name", r.name}, {"polygon", poly}});
  }
  j["symmetry_pairs"] = nlohmann::json::array();
  for (const auto& s : layout.symmetry_pairs)
    j["symmetry_pairs"].push_back({{"src", s.source}, {"dst", s.target}, {"axis", s.axis}});
}

void from_json(const nlohmann::json& j, SewingPatternLayout& layout) {
  try {
    layout.garment = garment_from_string(j.at("garment").get<std::string>());
    layout.regions.clear();
    for (const auto& r : j.at("regions")) {
      Region region{r.at("name").get<std::string>(), {}};
      for (const auto& p : r.at("polygon"))
        region.polygon.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
      layout.regions.push_back(std::move(region));
    }
    layout.symmetry_pairs.clear();
    if (j.contains("symmetry_pairs"))
      for (const auto& s : j.at("symmetry_pairs"))
        layout.symmetry_pairs.push_back(
            {s.at("src").get<std::string>(), s.at("dst").get<std::string>(), s.at("axis").get<double>()});
  } catch (const nlohmann::json::exception& e) {
    throw ParameterError(std::string("malformed layout: ") + e.what());
  }
}

SewingPatternLayout load_layout(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open layout " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParameterError("layout " + path.string() + " is not valid JSON: " + e.what());
  }
  SewingPatternLayout layout = j.get<SewingPatternLayout>();
  layout.validate();
  return layout;
}

void save_layout(const SewingPatternLayout& layout, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write layout " + path.string());
  out << nlohmann::json(layout).dump(2) << "\n";
}

}  // namespace texunwarp
