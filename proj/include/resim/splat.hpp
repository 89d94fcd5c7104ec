#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "resim/mesh.hpp"
#include "resim/vec.hpp"

namespace resim {

// Normal-direction scale of every surfel, absolute meters.
inline constexpr double kSurfelNormalScale = 1.2e-7;

inline constexpr int kMaxShCoeffs = 16;  // degree 3

// Gaussians bound to mesh faces. Positions are barycentric softmax weights,
// extents live in the face tangent frame. SH coefficients are stored
// coefficient-major per Gaussian: sh[(g * coeff_count + k) * 3 + channel].
struct SurfelSet {
  std::vector<int> face_id;
  std::vector<std::array<double, 3>> bary_logits;
  std::vector<std::array<double, 2>> tangent_log_scales;
  // Only used when clamp_normal_scale == false (covariance-constraint ablation).
  std::vector<double> normal_log_scales;
  int sh_degree = 0;
  std::vector<double> sh;
  std::vector<double> opacity_logits;
  bool fixed_opacity = false;
  bool clamp_normal_scale = true;

  int size() const { return int(face_id.size()); }
  int coeff_count() const { return (sh_degree + 1) * (sh_degree + 1); }
  double* sh_at(int g) { return sh.data() + size_t(g) * coeff_count() * 3; }
  const double* sh_at(int g) const { return sh.data() + size_t(g) * coeff_count() * 3; }
};

// A Gaussian in world space. rotation columns are (tangent-u, tangent-v,
// face normal); scales = (s_u, s_v, normal scale).
struct WorldGaussian {
  Vec3 mean;
  Mat3 rotation;
  Vec3 scales;
  std::array<double, kMaxShCoeffs * 3> sh{};
  int sh_degree = 0;
  double opacity = 1.0;
};

std::vector<WorldGaussian> bind_to_world(const TriangleMesh& mesh, const SurfelSet& surfels);

// Cotangent on one WorldGaussian, shapes mirroring the forward output.
struct GaussianCotangent {
  Vec3 d_mean;
  Mat3 d_rotation;
  Vec3 d_scales;
  std::array<double, kMaxShCoeffs * 3> d_sh{};
  double d_opacity = 0.0;
};

struct BindGrads {
  std::vector<Vec3> d_vertices;
  std::vector<std::array<double, 3>> d_bary_logits;
  std::vector<std::array<double, 2>> d_tangent_log_scales;
  std::vector<double> d_normal_log_scales;
  std::vector<double> d_sh;
  std::vector<double> d_opacity_logits;
};

BindGrads bind_to_world_vjp(const TriangleMesh& mesh, const SurfelSet& surfels,
                            std::span<const GaussianCotangent> cotangents);

// Real spherical harmonics color: clamp(sum_k b_k(dir) * coeffs[k] + 0.5, 0, 1).
// coeffs is coefficient-major (coeff_count x 3), dir must be unit length.
Vec3 eval_sh(const double* coeffs, int degree, Vec3 dir);

struct ShVjp {
  std::array<double, kMaxShCoeffs * 3> d_coeffs{};
  Vec3 d_dir;
};

ShVjp eval_sh_vjp(const double* coeffs, int degree, Vec3 dir, Vec3 d_rgb);

// Rigid transform of gaussians (body-local -> world): mean = P(mean),
// rotation = P.R * rotation; scales, SH, opacity unchanged.
std::vector<WorldGaussian> transform_gaussians(const Pose& pose,
                                               std::span<const WorldGaussian> locals);

struct PoseTangent {
  Vec3 rotation;     // right-increment on the pose rotation
  Vec3 translation;
};

// VJP of transform_gaussians; writes local cotangents and returns the pose
// tangent accumulated over all gaussians.
PoseTangent transform_gaussians_vjp(const Pose& pose, std::span<const WorldGaussian> locals,
                                    std::span<const GaussianCotangent> d_world,
                                    std::span<GaussianCotangent> d_local);

// De facto splat interchange: binary PLY with x,y,z, nx,ny,nz, f_dc_*,
// f_rest_* (channel-major), opacity logit, log scales, rotation quaternion.
void export_splat_ply(std::span<const WorldGaussian> gaussians, const std::string& path,
                      bool fixed_opacity = false);
std::vector<WorldGaussian> import_splat_ply(const std::string& path);

}  // namespace resim
