#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "resim/image.hpp"
#include "resim/kinematics.hpp"
#include "resim/losses.hpp"
#include "resim/mesh.hpp"
#include "resim/raster.hpp"
#include "resim/splat.hpp"

namespace resim {

// A renderable object: mesh + bound surfels.
struct SceneAsset {
  TriangleMesh mesh;
  SurfelSet surfels;
};

struct DatasetFrame {
  std::string camera_id;
  int step = 0;
  std::string rgb_path, mask_path, normal_path;  // relative to the dataset root
  std::optional<std::vector<double>> joints;     // reported (possibly noisy)
  std::optional<Image> rgb, mask, normal;        // in-memory payload
};

struct DatasetGroundTruth {
  std::vector<std::vector<double>> joints;  // true joints per step
};

struct Dataset {
  int version = 1;
  std::vector<Camera> cameras;
  std::vector<DatasetFrame> frames;
  std::vector<int> train_ids, test_ids;
  std::optional<TriangleMesh> gt_mesh;
  std::optional<DatasetGroundTruth> gt;
  std::string root;
};

int camera_index(const Dataset& ds, const std::string& id);
Observation make_observation(const Dataset& ds, int frame_idx);

struct GenConfig {
  int n_views = 50;
  int width = 128, height = 128;
  uint64_t seed = 0;
  double camera_rot_noise_deg = 0.0;  // exact-angle, random-axis per camera
  double focal_scale = 1.5;           // fx = fy = focal_scale * width
  double distance_scale = 2.5;        // camera distance / scene extent
  double train_fraction = 0.8;
  bool with_normals = true;
};

// Hemisphere cameras around the asset, rendered with the engine's own
// rasterizer; images stay in memory until save_dataset.
Dataset generate_dataset(const SceneAsset& gt, const GenConfig& cfg,
                         const RasterConfig& raster = {});

Dataset load_dataset(const std::string& dir);
void save_dataset(const Dataset& ds, const std::string& dir);

// mesh.ply with baked per-vertex colors + splat.ply in the interchange layout.
void export_asset(const TriangleMesh& mesh, const SurfelSet& surfels, const std::string& dir);

struct BakeStats {
  int fallback_vertices = 0;
};
std::vector<Vec3> bake_vertex_colors(const TriangleMesh& mesh, const SurfelSet& surfels,
                                     BakeStats* stats = nullptr);

// Procedural ground-truth assets for closed-loop experiments.
SceneAsset make_ellipsoid_asset(Vec3 semi_axes, uint64_t seed, int sh_degree = 2,
                                double gaussians_per_face = 12.0, int subdivisions = 3);
SceneAsset make_bumpy_sphere_asset(double radius, double bump_amplitude, uint64_t seed,
                                   int sh_degree = 2, double gaussians_per_face = 12.0,
                                   int subdivisions = 3);

// Robot with per-body visual assets (empty mesh = invisible body).
struct RobotScene {
  KinematicChain chain;
  std::vector<SceneAsset> body_assets;
};

RobotScene make_robot_scene(const KinematicChain& chain, uint64_t seed,
                            double gaussians_per_face = 6.0);

// All body gaussians posed into the world along with per-body spans.
struct PosedRobot {
  std::vector<WorldGaussian> gaussians;
  std::vector<std::pair<int, int>> body_ranges;  // [begin, end) per body
};
PosedRobot pose_robot(const RobotScene& scene, const FkResult& fk);

struct RobotGenConfig {
  int n_steps = 4;
  double joint_sigma = 0.01;  // radians of injected noise
  uint64_t seed = 0;
  std::vector<double> home;   // home joint angles; zeros if empty
  double range = 0.3;         // uniform joint excursion around home
};

Dataset generate_robot_dataset(const RobotScene& scene, const RobotGenConfig& cfg,
                               const RasterConfig& raster = {});

}  // namespace resim
