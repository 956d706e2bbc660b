#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "texunwarp/image.hpp"
#include "texunwarp/layout.hpp"
#include "texunwarp/rng.hpp"

namespace texunwarp {

// ---------------------------------------------------------------------------
// Procedural textures

enum class PatternKind { stripes, diagonal_stripes, checker, dots, floral_blobs };

std::string_view to_string(PatternKind k);
PatternKind pattern_kind_from_string(std::string_view s);

struct PatternFamily {
  PatternKind kind = PatternKind::stripes;
  double period = 8.0;     ///< band width / lattice spacing in px, >= 2
  double angle_deg = 45.0; ///< used by diagonal_stripes, in [0, 180)
  Rgb color_a{0.0f, 0.0f, 0.0f};
  Rgb color_b{1.0f, 1.0f, 1.0f};

  void validate() const;
  bool operator==(const PatternFamily&) const = default;
};

void to_json(nlohmann::json& j, const PatternFamily& f);
void from_json(const nlohmann::json& j, PatternFamily& f);

/// Random family with a guaranteed luma contrast between the two colors.
PatternFamily random_family(Rng& rng);

Image gen_procedural_texture(const PatternFamily& family, int size, std::uint64_t seed);

/// Rotates `image` by `angle_deg` about its center, then cuts the crop x crop
/// window whose top-left corner sits at (x0, y0) in the rotated frame.
Image rotate_crop(const Image& image, double angle_deg, double x0, double y0, int crop);

/// Random rotation + random window; needs an image at least twice the crop.
Image augment_texture(const Image& image, std::uint64_t seed, int crop);

/// Copies in-region pixels untouched, zeroes the rest.
struct TextureMap {
  Image image;
  SewingPatternLayout layout;
};
TextureMap crop_to_pattern(const Image& texture, const SewingPatternLayout& layout);

// ---------------------------------------------------------------------------
// Warp simulation

struct WarpOptions {
  int num_bases = 4;      ///< sinusoidal displacement terms
  int num_bumps = 2;      ///< gaussian bump terms
  int max_occluders = 3;  ///< convex occluders, at least one when strength > 0
  Rgb occluder_color{0.0f, 0.0f, 0.0f};
};

/// Displacement is the gradient of `height`, so the normal map and the warp
/// describe the same surface.
struct WarpField {
  int resolution = 0;
  std::vector<float> dx, dy;  ///< px, row-major
  std::vector<float> height;  ///< px, row-major
  Mask occlusion;
  Rgb occluder_color{0.0f, 0.0f, 0.0f};

  static WarpField zero(int resolution);
  float max_displacement() const;
};

/// Upper bound on |displacement| for a field built with `opts` at `strength`.
double displacement_bound(double strength, const WarpOptions& opts = {});

WarpField make_warp_field(double strength, int resolution, std::uint64_t seed,
                          const WarpOptions& opts = {});

/// Backward bilinear warp, edge-clamped; occluded pixels get the occluder color.
Image apply_warp(const Image& image, const WarpField& warp);

/// (n + 1) / 2 encoding of normalize(-dh/dx, -dh/dy, 1).
Image derive_normal_map(const WarpField& warp);

Image encode_normal(float nx, float ny, float nz);  ///< 1x1 helper for tests
std::array<double, 3> decode_normal(const Image& normal_map, int x, int y);

/// Snaps an encoded normal map onto the 8-bit grid, picking for each pixel the
/// nearby code whose decoded vector stays unit-length within 1e-3.
Image snap_normal_map_8bit(const Image& normal_map);

// ---------------------------------------------------------------------------
// Samples and datasets

struct DatagenConfig {
  Garment garment = Garment::tshirt;
  int resolution = 64;  ///< input/normal image side
  int crop_size = 64;   ///< gt crop side
  int map_size = 128;   ///< full texture map side
  double strength_min = 0.0;
  double strength_max = 1.5;
  double zero_strength_fraction = 0.125;
  WarpOptions warp;
  std::optional<PatternFamily> family;  ///< fixed family, random when empty

  void validate() const;
};

struct SampleMeta {
  PatternFamily family;
  std::string region;
  std::uint64_t texture_seed = 0;
  std::uint64_t warp_seed = 0;
  double strength = 0.0;
  bool operator==(const SampleMeta&) const = default;
};

struct Sample {
  std::string id;
  Image input_image;  ///< R x R, zero outside the garment mask
  Image normal_map;   ///< R x R, flat outside the garment mask
  Mask garment_mask;  ///< R x R
  Image gt_crop;      ///< C x C, cut from the pre-warp texture
  SampleMeta meta;
};

/// Body silhouette polygon in normalized image coordinates.
Polygon garment_silhouette(Garment garment);

/// Lays `crop` over the silhouette bounding box; pixels outside are zero.
Image place_on_silhouette(const Image& crop, Garment garment, int resolution, Mask* silhouette);

Sample generate_sample(const DatagenConfig& cfg, std::uint64_t seed, std::string id = "000000");

/// Sample i uses seed mix_seed(seed, i); workers split the index range.
std::vector<Sample> generate_samples(const DatagenConfig& cfg, int count, std::uint64_t seed,
                                     int threads = 1);

/// Equality up to `tol` on every raster and exact equality on metadata.
bool samples_match(const Sample& a, const Sample& b, float tol);

inline constexpr const char* kDatasetVersion = "1.0.0";

struct SampleRecord {
  std::string id;
  SampleMeta meta;
  std::string input, normal, mask, gt;  ///< paths relative to the dataset dir
};

struct DatasetManifest {
  std::string version = kDatasetVersion;
  Garment garment = Garment::tshirt;
  int resolution = 0;
  int crop_size = 0;
  std::uint64_t seed = 0;
  int num_samples = 0;
  std::vector<SampleRecord> samples;
};

void to_json(nlohmann::json& j, const DatasetManifest& m);
void from_json(const nlohmann::json& j, DatasetManifest& m);

struct Dataset {
  DatasetManifest manifest;
  std::vector<Sample> samples;
};

DatasetManifest write_dataset(const std::vector<Sample>& samples, const DatagenConfig& cfg,
                              std::uint64_t seed, const std::filesystem::path& out_dir);
Dataset read_dataset(const std::filesystem::path& dir);

/// Full structural check of a dataset directory; throws ManifestError.
void validate_dataset(const std::filesystem::path& dir);

}  // namespace texunwarp
