#pragma once

#include <optional>
#include <span>
#include <vector>

#include "resim/camera.hpp"
#include "resim/image.hpp"
#include "resim/splat.hpp"

namespace resim {

struct RasterConfig {
  double near_plane = 0.01;          // meters; gaussians at or behind are culled
  double blur = 0.3;                 // px^2 anti-aliasing floor added to cov2d
  double alpha_clip = 0.99;          // per-contribution opacity ceiling
  double alpha_skip = 1.0 / 255.0;   // contributions below this are dropped
  double transmittance_min = 1e-6;   // stop compositing once T falls below
  int tile_size = 16;
  double radius_sigma = 3.0;         // gaussian-to-tile binning extent
};

enum class Modality { kRgb, kNormals, kMask };

struct Projection {
  Vec2 mean2d;          // pixels
  double cov2d[3];      // (a, b, c) of [[a, b], [b, c]], includes blur
  double depth;         // camera-space z, meters
};

// EWA perspective projection of one gaussian; nullopt when behind near plane.
std::optional<Projection> project_gaussian(const WorldGaussian& g, const Camera& cam,
                                           const RasterConfig& cfg = {});

// Per-pixel compositing records retained for the backward pass. Contributions
// are grouped by tile, then by pixel in tile-row-major order; pos indexes into
// the tile's depth-sorted bin list.
struct TileRecords {
  std::vector<int32_t> pos;
  std::vector<double> alpha_raw;     // pre-clip opacity o * G
  std::vector<int32_t> pixel_count;  // one entry per pixel of the tile
};

struct RenderRecords {
  std::vector<TileRecords> tiles;
  std::vector<std::vector<int32_t>> tile_bins;  // gaussian indices, depth-sorted
  int tiles_x = 0, tiles_y = 0;
  int gaussian_count = 0;
  bool valid = false;
};

struct RenderOutput {
  Image color;   // H x W x 3
  Image alpha;   // H x W x 1, accumulated opacity
  Modality modality = Modality::kRgb;
  Vec3 background;
  int skipped_singular = 0;
  RenderRecords records;
};

RenderOutput render(std::span<const WorldGaussian> gaussians, const Camera& cam,
                    Modality modality, Vec3 background, const RasterConfig& cfg = {});

struct CameraGrad {
  Vec3 rotation;     // right-increment axis-angle tangent of world_to_camera
  Vec3 translation;
};

struct RasterGrads {
  std::vector<GaussianCotangent> gaussians;
  CameraGrad camera;
  int skipped_singular = 0;
};

// Exact VJP of render. The forward output must carry records for identical
// inputs; a missing or mismatched record set raises StateError.
RasterGrads render_vjp(std::span<const WorldGaussian> gaussians, const Camera& cam,
                       Modality modality, Vec3 background, const RasterConfig& cfg,
                       const Image& cotangent, const RenderOutput& forward);

// Batched variant: renders several modalities from one projection / sort /
// binning pass. The alpha chain is shared, so records are stored once.
struct RenderBundle {
  std::vector<Image> colors;                // parallel to the modality list
  Image alpha;
  std::vector<Modality> modalities;
  std::vector<Vec3> backgrounds;
  int skipped_singular = 0;
  RenderRecords records;
};

RenderBundle render_bundle(std::span<const WorldGaussian> gaussians, const Camera& cam,
                           std::span<const Modality> modalities,
                           std::span<const Vec3> backgrounds, const RasterConfig& cfg = {});

// cotangents[i] may be null for modalities that received no loss.
RasterGrads render_bundle_vjp(std::span<const WorldGaussian> gaussians, const Camera& cam,
                              std::span<const Modality> modalities,
                              std::span<const Vec3> backgrounds, const RasterConfig& cfg,
                              std::span<const Image* const> cotangents,
                              const RenderBundle& forward);

}  // namespace resim
