#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "resim/image.hpp"
#include "resim/mesh.hpp"

namespace resim {

// Per-term weights of the aggregate objective.
struct LossWeights {
  double photo = 1.0;
  double mask = 10.0;
  double smask = 1e-2;
  double normal = 3.0;
  double laplacian = 3.0;
  double edge = 1e-2;
};

struct Observation {
  std::string camera_id;
  Image rgb;                          // H x W x 3 in [0,1]
  std::optional<Image> mask;          // H x W x 1
  std::optional<Image> normal_map;    // H x W x 3, encoded n*0.5+0.5
  double weight = 1.0;                // per-frame beta
  std::optional<std::vector<double>> joints;
  int step = 0;
};

struct LossValue {
  double value = 0.0;
  Image d_pred;
};

// mean |pred - gt (x) mask| over pixels*channels; subgradient 0 at ties.
// mask may be null (treated as all ones); 1-channel, broadcast over channels.
LossValue photometric_l1(const Image& pred, const Image& gt, const Image* mask);

// sum of squares.
LossValue mask_l2(const Image& pred, const Image& gt);

// Exact Euclidean distance (pixels) to the nearest foreground pixel
// (value > 0.5); 0 on foreground. Two-pass separable exact transform.
Image edt(const Image& mask);

// Default target exp(-(EDT/tau)^2); literal mode targets EDT^2 as written
// in the source formulation.
Image soft_mask_target(const Image& gt_mask, double tau, bool literal);
LossValue soft_mask_loss(const Image& pred, const Image& gt_mask, double tau,
                         bool literal = false);

// || (pred - gt) (x) mask ||_2^2 on encoded normal images.
LossValue normal_loss(const Image& pred, const Image& gt, const Image* mask);

// Mean local SSIM, 11x11 gaussian window sigma 1.5, K1=0.01 K2=0.03, range 1.
// Windows are evaluated where they fit entirely; channels averaged.
double ssim(const Image& a, const Image& b);
std::pair<double, Image> ssim_with_grad(const Image& a, const Image& b);  // d/da

// One frame's rendered modalities as consumed by total_loss. The mask render
// is 1-channel (the compositing alpha of the mask modality).
struct FrameRender {
  const Image* rgb = nullptr;
  const Image* mask = nullptr;
  const Image* normal = nullptr;
};

struct FrameCotangents {
  Image d_rgb;     // empty if the term was off
  Image d_mask;
  Image d_normal;
};

struct TotalLoss {
  double total = 0.0;
  double photo = 0.0, mask = 0.0, smask = 0.0, normal = 0.0, laplacian = 0.0, edge = 0.0;
  std::vector<FrameCotangents> frames;
  std::vector<Vec3> d_vertices;  // regularizer gradient, empty when mesh null
};

// L = sum_f beta_f (w_photo L_photo + w_mask L_mask + w_smask L_smask +
//     w_normal L_normal) + w_lap L_lap + w_edge L_edge.
// smask_targets may supply precomputed soft targets per frame (else derived
// from the observation mask on the fly).
TotalLoss total_loss(std::span<const FrameRender> renders,
                     std::span<const Observation* const> observations,
                     const LossWeights& weights, const TriangleMesh* mesh,
                     double smask_tau = 25.0, bool smask_literal = false,
                     std::span<const Image* const> smask_targets = {});

}  // namespace resim
