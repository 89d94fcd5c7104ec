#include "resim/splat.hpp"

#include <cmath>
#include <string>

#include "resim/error.hpp"

namespace resim {

namespace {

struct FaceFrame {
  Vec3 u, v, n;   // orthonormal, v = n x u
  Vec3 e1, e2;    // v2 - v1, v3 - v1
  double e1_len = 0.0;
  double c_len = 0.0;  // |e1 x e2|
};

FaceFrame face_frame(const TriangleMesh& mesh, int f) {
  const auto& [a, b, c] = mesh.faces[f];
  FaceFrame fr;
  fr.e1 = mesh.vertices[b] - mesh.vertices[a];
  fr.e2 = mesh.vertices[c] - mesh.vertices[a];
  Vec3 cr = cross(fr.e1, fr.e2);
  fr.e1_len = norm(fr.e1);
  fr.c_len = norm(cr);
  if (0.5 * fr.c_len < 1e-12 || fr.e1_len <= 0.0)
    throw DegenerateGeometryError("bind_to_world: face " + std::to_string(f) + " is degenerate");
  fr.u = fr.e1 / fr.e1_len;
  fr.n = cr / fr.c_len;
  fr.v = cross(fr.n, fr.u);
  return fr;
}

std::array<double, 3> softmax3(const std::array<double, 3>& l) {
  double m = std::max(l[0], std::max(l[1], l[2]));
  double e0 = std::exp(l[0] - m), e1 = std::exp(l[1] - m), e2 = std::exp(l[2] - m);
  double s = e0 + e1 + e2;
  return {e0 / s, e1 / s, e2 / s};
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

void check_bound(const TriangleMesh& mesh, const SurfelSet& s) {
  for (int g = 0; g < s.size(); ++g)
    if (s.face_id[g] < 0 || s.face_id[g] >= mesh.face_count())
      throw ShapeError("surfel " + std::to_string(g) + " references invalid face");
  size_t n = size_t(s.size());
  if (s.bary_logits.size() != n || s.tangent_log_scales.size() != n ||
      s.opacity_logits.size() != n || s.sh.size() != n * s.coeff_count() * 3 ||
      (!s.clamp_normal_scale && s.normal_log_scales.size() != n))
    throw ShapeError("surfel set field sizes are inconsistent");
}

}  // namespace

std::vector<WorldGaussian> bind_to_world(const TriangleMesh& mesh, const SurfelSet& surfels) {
  check_bound(mesh, surfels);
  const int nc = surfels.coeff_count();
  std::vector<WorldGaussian> out(surfels.size());
  for (int g = 0; g < surfels.size(); ++g) {
    const int f = surfels.face_id[g];
    FaceFrame fr = face_frame(mesh, f);
    auto w = softmax3(surfels.bary_logits[g]);
    const auto& [a, b, c] = mesh.faces[f];

    WorldGaussian& wg = out[g];
    wg.mean = w[0] * mesh.vertices[a] + w[1] * mesh.vertices[b] + w[2] * mesh.vertices[c];
    wg.rotation = Mat3::from_columns(fr.u, fr.v, fr.n);
    double sn = surfels.clamp_normal_scale ? kSurfelNormalScale
                                           : std::exp(surfels.normal_log_scales[g]);
    wg.scales = {std::exp(surfels.tangent_log_scales[g][0]),
                 std::exp(surfels.tangent_log_scales[g][1]), sn};
    wg.sh_degree = surfels.sh_degree;
    for (int k = 0; k < nc * 3; ++k) wg.sh[k] = surfels.sh_at(g)[k];
    wg.opacity = surfels.fixed_opacity ? 1.0 : sigmoid(surfels.opacity_logits[g]);
  }
  return out;
}

BindGrads bind_to_world_vjp(const TriangleMesh& mesh, const SurfelSet& surfels,
                            std::span<const GaussianCotangent> cotangents) {
  check_bound(mesh, surfels);
  if (int(cotangents.size()) != surfels.size())
    throw ShapeError("bind_to_world_vjp: cotangent count does not match surfel count");

  const int nc = surfels.coeff_count();
  BindGrads grads;
  grads.d_vertices.assign(mesh.vertices.size(), Vec3{});
  grads.d_bary_logits.assign(surfels.size(), {});
  grads.d_tangent_log_scales.assign(surfels.size(), {});
  if (!surfels.clamp_normal_scale) grads.d_normal_log_scales.assign(surfels.size(), 0.0);
  grads.d_sh.assign(surfels.sh.size(), 0.0);
  grads.d_opacity_logits.assign(surfels.size(), 0.0);

  for (int g = 0; g < surfels.size(); ++g) {
    const GaussianCotangent& ct = cotangents[g];
    const int f = surfels.face_id[g];
    const auto& [ia, ib, ic] = mesh.faces[f];
    FaceFrame fr = face_frame(mesh, f);
    auto w = softmax3(surfels.bary_logits[g]);

    // Mean: mu = w0 va + w1 vb + w2 vc.
    grads.d_vertices[ia] += w[0] * ct.d_mean;
    grads.d_vertices[ib] += w[1] * ct.d_mean;
    grads.d_vertices[ic] += w[2] * ct.d_mean;
    double gw[3] = {dot(mesh.vertices[ia], ct.d_mean), dot(mesh.vertices[ib], ct.d_mean),
                    dot(mesh.vertices[ic], ct.d_mean)};
    double dotwg = w[0] * gw[0] + w[1] * gw[1] + w[2] * gw[2];
    for (int k = 0; k < 3; ++k) grads.d_bary_logits[g][k] = w[k] * (gw[k] - dotwg);

    // Frame: columns (u, v=n x u, n) as functions of the face vertices.
    Vec3 gu = ct.d_rotation.col(0);
    Vec3 gv = ct.d_rotation.col(1);
    Vec3 gn = ct.d_rotation.col(2);
    gu += cross(gv, fr.n);        // v = n x u, du path
    gn += cross(fr.u, gv);        // v = n x u, dn path
    Vec3 ge1 = (gu - dot(fr.u, gu) * fr.u) / fr.e1_len;  // u = e1/|e1|
    Vec3 gc = (gn - dot(fr.n, gn) * fr.n) / fr.c_len;    // n = c/|c|
    ge1 += cross(fr.e2, gc);      // c = e1 x e2
    Vec3 ge2 = cross(gc, fr.e1);
    grads.d_vertices[ib] += ge1;
    grads.d_vertices[ic] += ge2;
    grads.d_vertices[ia] -= ge1 + ge2;

    // Scales: s = exp(log s) on the tangent axes; normal axis is clamped
    // (no gradient) unless the constraint is disabled.
    grads.d_tangent_log_scales[g][0] =
        ct.d_scales.x * std::exp(surfels.tangent_log_scales[g][0]);
    grads.d_tangent_log_scales[g][1] =
        ct.d_scales.y * std::exp(surfels.tangent_log_scales[g][1]);
    if (!surfels.clamp_normal_scale)
      grads.d_normal_log_scales[g] = ct.d_scales.z * std::exp(surfels.normal_log_scales[g]);

    for (int k = 0; k < nc * 3; ++k) grads.d_sh[size_t(g) * nc * 3 + k] = ct.d_sh[k];

    if (!surfels.fixed_opacity) {
      double o = sigmoid(surfels.opacity_logits[g]);
      grads.d_opacity_logits[g] = ct.d_opacity * o * (1.0 - o);
    }
  }
  return grads;
}

std::vector<WorldGaussian> transform_gaussians(const Pose& pose,
                                               std::span<const WorldGaussian> locals) {
  std::vector<WorldGaussian> out(locals.begin(), locals.end());
  for (auto& g : out) {
    g.mean = pose.apply(g.mean);
    g.rotation = pose.R * g.rotation;
  }
  return out;
}

PoseTangent transform_gaussians_vjp(const Pose& pose, std::span<const WorldGaussian> locals,
                                    std::span<const GaussianCotangent> d_world,
                                    std::span<GaussianCotangent> d_local) {
  if (d_world.size() != locals.size() || d_local.size() != locals.size())
    throw ShapeError("transform_gaussians_vjp: size mismatch");
  const Mat3 Rt = transpose(pose.R);
  PoseTangent tangent;
  for (size_t i = 0; i < locals.size(); ++i) {
    const GaussianCotangent& gw = d_world[i];
    GaussianCotangent& gl = d_local[i];
    gl = gw;

    Vec3 rt_gm = Rt * gw.d_mean;
    gl.d_mean = rt_gm;
    tangent.rotation += cross(locals[i].mean, rt_gm);
    tangent.translation += gw.d_mean;

    // R_w = R_p R_l: g_Rl = R_p^T g_Rw; pose tangent via tr((R_l g_Rw^T R_p) E_k).
    Mat3 g_rl = Rt * gw.d_rotation;
    gl.d_rotation = g_rl;
    Mat3 B = locals[i].rotation * transpose(gw.d_rotation) * pose.R;
    tangent.rotation +=
        Vec3{B.m[1][2] - B.m[2][1], B.m[2][0] - B.m[0][2], B.m[0][1] - B.m[1][0]};
  }
  return tangent;
}

namespace {

constexpr double kC0 = 0.28209479177387814;
constexpr double kC1 = 0.4886025119029199;
constexpr double kC2[5] = {1.0925484305920792, -1.0925484305920792, 0.31539156525252005,
                           -1.0925484305920792, 0.5462742152960396};
constexpr double kC3[7] = {-0.5900435899266435, 2.890611442640554, -0.4570457994644658,
                           0.3731763325901154,  -0.4570457994644658, 1.445305721320277,
                           -0.5900435899266435};

// Fills basis values b[k] and, when db != nullptr, gradients db[k] w.r.t dir.
int sh_basis(int degree, Vec3 d, double* b, Vec3* db) {
  const double x = d.x, y = d.y, z = d.z;
  b[0] = kC0;
  if (db) db[0] = {};
  if (degree == 0) return 1;

  b[1] = -kC1 * y;
  b[2] = kC1 * z;
  b[3] = -kC1 * x;
  if (db) {
    db[1] = {0, -kC1, 0};
    db[2] = {0, 0, kC1};
    db[3] = {-kC1, 0, 0};
  }
  if (degree == 1) return 4;

  const double xx = x * x, yy = y * y, zz = z * z;
  b[4] = kC2[0] * x * y;
  b[5] = kC2[1] * y * z;
  b[6] = kC2[2] * (2.0 * zz - xx - yy);
  b[7] = kC2[3] * x * z;
  b[8] = kC2[4] * (xx - yy);
  if (db) {
    db[4] = kC2[0] * Vec3{y, x, 0};
    db[5] = kC2[1] * Vec3{0, z, y};
    db[6] = kC2[2] * Vec3{-2 * x, -2 * y, 4 * z};
    db[7] = kC2[3] * Vec3{z, 0, x};
    db[8] = kC2[4] * Vec3{2 * x, -2 * y, 0};
  }
  if (degree == 2) return 9;

  b[9] = kC3[0] * y * (3.0 * xx - yy);
  b[10] = kC3[1] * x * y * z;
  b[11] = kC3[2] * y * (4.0 * zz - xx - yy);
  b[12] = kC3[3] * z * (2.0 * zz - 3.0 * xx - 3.0 * yy);
  b[13] = kC3[4] * x * (4.0 * zz - xx - yy);
  b[14] = kC3[5] * z * (xx - yy);
  b[15] = kC3[6] * x * (xx - 3.0 * yy);
  if (db) {
    db[9] = kC3[0] * Vec3{6 * x * y, 3 * xx - 3 * yy, 0};
    db[10] = kC3[1] * Vec3{y * z, x * z, x * y};
    db[11] = kC3[2] * Vec3{-2 * x * y, 4 * zz - xx - 3 * yy, 8 * y * z};
    db[12] = kC3[3] * Vec3{-6 * x * z, -6 * y * z, 6 * zz - 3 * xx - 3 * yy};
    db[13] = kC3[4] * Vec3{4 * zz - 3 * xx - yy, -2 * x * y, 8 * x * z};
    db[14] = kC3[5] * Vec3{2 * x * z, -2 * y * z, xx - yy};
    db[15] = kC3[6] * Vec3{3 * xx - 3 * yy, -6 * x * y, 0};
  }
  return 16;
}

void check_sh_args(int degree, Vec3 dir) {
  if (degree < 0 || degree > 3) throw BoundError("eval_sh: degree must be in [0, 3]");
  if (std::abs(norm(dir) - 1.0) > 1e-6)
    throw DegenerateGeometryError("eval_sh: view direction must be unit length");
}

}  // namespace

Vec3 eval_sh(const double* coeffs, int degree, Vec3 dir) {
  check_sh_args(degree, dir);
  double b[kMaxShCoeffs];
  int n = sh_basis(degree, dir, b, nullptr);
  Vec3 rgb;
  for (int k = 0; k < n; ++k) {
    rgb.x += b[k] * coeffs[k * 3 + 0];
    rgb.y += b[k] * coeffs[k * 3 + 1];
    rgb.z += b[k] * coeffs[k * 3 + 2];
  }
  rgb += Vec3{0.5, 0.5, 0.5};
  for (int c = 0; c < 3; ++c) rgb[c] = std::clamp(rgb[c], 0.0, 1.0);
  return rgb;
}

ShVjp eval_sh_vjp(const double* coeffs, int degree, Vec3 dir, Vec3 d_rgb) {
  check_sh_args(degree, dir);
  double b[kMaxShCoeffs];
  Vec3 db[kMaxShCoeffs];
  int n = sh_basis(degree, dir, b, db);

  // Clamp gates: channels saturated at 0 or 1 pass no gradient.
  Vec3 raw{0.5, 0.5, 0.5};
  for (int k = 0; k < n; ++k)
    raw += b[k] * Vec3{coeffs[k * 3 + 0], coeffs[k * 3 + 1], coeffs[k * 3 + 2]};
  Vec3 gate;
  for (int c = 0; c < 3; ++c) gate[c] = (raw[c] > 0.0 && raw[c] < 1.0) ? d_rgb[c] : 0.0;

  ShVjp out;
  for (int k = 0; k < n; ++k) {
    double cdot = 0.0;
    for (int c = 0; c < 3; ++c) {
      out.d_coeffs[k * 3 + c] = b[k] * gate[c];
      cdot += coeffs[k * 3 + c] * gate[c];
    }
    out.d_dir += cdot * db[k];
  }
  return out;
}

}  // namespace resim
