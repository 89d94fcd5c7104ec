#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "resim/camera.hpp"
#include "resim/image.hpp"
#include "resim/kinematics.hpp"
#include "resim/losses.hpp"
#include "resim/mesh.hpp"
#include "resim/raster.hpp"
#include "resim/splat.hpp"

namespace resim {

struct PointSample {
  std::vector<Vec3> points;  // millimeters
  std::string source_id;
};

// Area-weighted face choice + square-root barycentric sampling; exact count,
// deterministic per seed. Mesh coordinates are meters, output millimeters.
PointSample sample_surface(const TriangleMesh& mesh, int n, uint64_t rng_seed,
                           const std::string& source_id = "");

// 0.5 * (mean_a min_b |a-b|^2 + mean_b min_a |b-a|^2) in mm^2.
// Nearest neighbors are exact (KD-tree, matches brute force).
double chamfer(const PointSample& a, const PointSample& b);

// 10 log10(1 / MSE) for [0,1] images; +infinity when MSE == 0.
double psnr(const Image& pred, const Image& gt);

struct AlignConfig {
  int steps = 200;
  double lr = 2e-3;
  RasterConfig raster;
  Vec3 background;
};

struct AlignResult {
  std::vector<Camera> cameras;      // aligned copies
  std::vector<Vec3> deltas;
  std::vector<double> psnr_before;  // per frame, dB
  std::vector<double> psnr_after;
};

// Optimizes a rotation delta per held-out frame against L1 photometric error;
// the scene (mesh + surfels) is read-only throughout.
AlignResult align_eval_cameras(const TriangleMesh& mesh, const SurfelSet& surfels,
                               std::span<const Camera> cameras,
                               std::span<const Observation* const> frames,
                               const AlignConfig& cfg);

// Mean distance between matching TCP sites under two joint states, mm.
double tcp_error(const KinematicChain& chain, const JointState& q_est, const JointState& q_gt);

// Exact nearest-neighbor index over 3D points (used by chamfer; exposed for
// tests to cross-check against brute force).
class KdTree3 {
 public:
  explicit KdTree3(std::span<const Vec3> points);
  // returns (index, squared distance)
  std::pair<int, double> nearest(Vec3 query) const;

 private:
  struct Node {
    int axis = -1;       // -1 marks a leaf
    double split = 0.0;
    int left = -1, right = -1;
    int begin = 0, end = 0;
  };
  void build(int node, int begin, int end, int depth);
  void search(int node, Vec3 q, int& best, double& best_d2) const;

  std::vector<Vec3> pts_;
  std::vector<int> index_;
  std::vector<Node> nodes_;
};

}  // namespace resim
