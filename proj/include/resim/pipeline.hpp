#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "resim/losses.hpp"
#include "resim/optim.hpp"
#include "resim/raster.hpp"
#include "resim/scene_io.hpp"

namespace resim {

// The optimizable bundle: zero everywhere reproduces the nominal scene.
struct SceneParams {
  MeshDeformation deformation;
  SurfelSet surfels;
  std::vector<Vec3> camera_rot_deltas;
  std::vector<double> joint_offsets;
};

struct ReconstructConfig {
  int steps = 40000;
  uint64_t seed = 0;
  int eval_every = 500;       // cadence of full-loss evaluation + history rows
  int sh_degree = 2;
  double gaussians_per_face = 12.0;
  int init_subdivisions = 3;
  double init_radius = 0.05;  // meters
  Vec3 init_center{};
  bool opacity_clamped = false;
  double init_opacity = 0.8;
  bool surfel_clamp = true;   // false = covariance-constraint ablation
  double smask_tau = 25.0;
  bool smask_literal = false;
  LossWeights weights;
  double lr_gaussians = 5e-4;
  double lr_vertex = 1e-4;
  double lr_translation = 1e-3;
  double lr_camera = 1e-4;
  std::set<std::string> frozen;  // group names, e.g. "camera_rot"
  Vec3 background{};
  RasterConfig raster;
  double divergence_factor = 10.0;
};

struct LossRecord {
  int step = 0;
  double total = 0, photo = 0, mask = 0, smask = 0, normal = 0, laplacian = 0, edge = 0;
  bool is_eval = false;
};

struct ReconstructResult {
  TriangleMesh base_mesh;
  SceneParams params;       // best iterate
  TriangleMesh mesh;        // deformed mesh at the best iterate
  std::vector<LossRecord> history;
  double initial_eval_loss = 0.0;
  double best_eval_loss = 0.0;
  int best_step = 0;
  int divergence_events = 0;
};

ReconstructResult reconstruct(const Dataset& ds, const ReconstructConfig& cfg);

struct CalibrateConfig {
  int iterations = 600;  // alternation rounds
  uint64_t seed = 0;
  double lr_colors = 5e-3;
  double lr_joints = 2e-3;
  double lr_camera = 5e-4;
  double w_fixed = 1.0;
  double w_wrist = 0.1;
  int color_steps = 1;
  int pose_steps = 1;
  Vec3 background{};
  RasterConfig raster;
};

struct CalibrateResult {
  std::vector<std::vector<double>> q_est;  // per time step, best iterate
  std::vector<Vec3> camera_deltas;         // per chain camera
  std::vector<double> tcp_history_mm;      // index 0 = before optimization
  double initial_tcp_mm = 0.0;
  double best_tcp_mm = 0.0;
  int best_iteration = 0;
};

// Alternating color / SSIM-pose optimization against ground-truth renders.
CalibrateResult calibrate(const Dataset& ds, const RobotScene& scene,
                          const CalibrateConfig& cfg);

// Full pipeline state persisted into run directories.
struct SceneState {
  TriangleMesh base_mesh;
  MeshDeformation deformation;
  SurfelSet surfels;
  std::vector<Vec3> camera_deltas;
};

void save_scene_state(const SceneState& state, const std::string& path);
SceneState load_scene_state(const std::string& path);

void save_loss_csv(const std::vector<LossRecord>& history, const std::string& path);

}  // namespace resim
