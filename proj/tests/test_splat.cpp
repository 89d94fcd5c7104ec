#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "resim/error.hpp"
#include "resim/splat.hpp"
#include "test_util.hpp"

using namespace resim;

namespace {

// Scalar probe J = <cotangents, outputs> with a fixed random cotangent set,
// for finite-difference checks of bind_to_world.
struct BindProbe {
  std::vector<GaussianCotangent> cotangents;

  explicit BindProbe(int n, uint64_t seed) {
    Rng rng(seed);
    cotangents.resize(n);
    for (auto& ct : cotangents) {
      ct.d_mean = {rng.normal(), rng.normal(), rng.normal()};
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) ct.d_rotation.m[i][j] = rng.normal();
      ct.d_scales = {rng.normal(), rng.normal(), rng.normal()};
      for (auto& v : ct.d_sh) v = 0.2 * rng.normal();
      ct.d_opacity = rng.normal();
    }
  }

  double eval(const TriangleMesh& mesh, const SurfelSet& s) const {
    auto gs = bind_to_world(mesh, s);
    double j = 0.0;
    const int nsh = (s.sh_degree + 1) * (s.sh_degree + 1) * 3;
    for (size_t g = 0; g < gs.size(); ++g) {
      const auto& ct = cotangents[g];
      j += dot(ct.d_mean, gs[g].mean) + dot(ct.d_scales, gs[g].scales) +
           ct.d_opacity * gs[g].opacity;
      for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b) j += ct.d_rotation.m[a][b] * gs[g].rotation.m[a][b];
      for (int k = 0; k < nsh; ++k) j += ct.d_sh[k] * gs[g].sh[k];
    }
    return j;
  }
};

}  // namespace

TEST_CASE("bind_to_world: softmax symmetry and saturation") {
  TriangleMesh tri = make_mesh({{0, 0, 0}, {1, 0, 0}, {0, 1, 0}}, {{0, 1, 2}});
  SurfelSet s;
  s.face_id = {0, 1 - 1};
  s.face_id = {0, 0};
  s.bary_logits = {{0, 0, 0}, {20, 0, 0}};
  s.tangent_log_scales = {{-3, -3}, {-3, -3}};
  s.opacity_logits = {0.0, 0.0};
  s.sh_degree = 0;
  s.sh.assign(2 * 3, 0.0);

  auto gs = bind_to_world(tri, s);
  Vec3 centroid = (tri.vertices[0] + tri.vertices[1] + tri.vertices[2]) / 3.0;
  CHECK(norm(gs[0].mean - centroid) < 1e-12);
  CHECK(norm(gs[1].mean - tri.vertices[0]) < 1e-6);
  CHECK(gs[0].opacity == doctest::Approx(0.5));
  CHECK(gs[0].scales.z == kSurfelNormalScale);
}

TEST_CASE("bind_to_world: frame orthonormal, plane constraint, equivariance") {
  TriangleMesh mesh = test::random_mesh(41, 1);
  SurfelSet s = test::random_surfels(mesh, 42, 2);
  auto gs = bind_to_world(mesh, s);
  auto normals = face_normals(mesh);

  for (size_t g = 0; g < gs.size(); ++g) {
    const Mat3& R = gs[g].rotation;
    Mat3 should_be_eye = transpose(R) * R;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        CHECK(std::abs(should_be_eye.m[i][j] - (i == j ? 1.0 : 0.0)) < 1e-9);
    CHECK(det(R) == doctest::Approx(1.0).epsilon(1e-9));

    int f = s.face_id[g];
    Vec3 v1 = mesh.vertices[mesh.faces[f][0]];
    CHECK(std::abs(dot(gs[g].mean - v1, normals[f])) < 1e-9);
  }

  // rigid motion: mu -> R mu + t, frame -> R frame, everything else equal
  Mat3 R = so3_exp({0.4, 0.2, -0.7});
  Vec3 t{0.3, -0.5, 0.2};
  TriangleMesh moved = mesh;
  for (auto& v : moved.vertices) v = R * v + t;
  auto gs2 = bind_to_world(moved, s);
  for (size_t g = 0; g < gs.size(); ++g) {
    CHECK(norm(gs2[g].mean - (R * gs[g].mean + t)) < 1e-9);
    Mat3 expect = R * gs[g].rotation;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) CHECK(std::abs(gs2[g].rotation.m[i][j] - expect.m[i][j]) < 1e-9);
    CHECK(norm(gs2[g].scales - gs[g].scales) < 1e-12);
    CHECK(gs2[g].opacity == doctest::Approx(gs[g].opacity).epsilon(1e-15));
  }
}

TEST_CASE("surfel covariance smallest eigenvalue equals the clamp") {
  TriangleMesh mesh = test::random_mesh(43, 1);
  SurfelSet s = test::random_surfels(mesh, 44, 2);
  auto gs = bind_to_world(mesh, s);
  for (const auto& g : gs) {
    // Sigma = R diag(s^2) R^T; eigenvalues are the squared scales.
    double smin = std::min({g.scales.x, g.scales.y, g.scales.z});
    CHECK(smin == kSurfelNormalScale);
  }
}

TEST_CASE("bind_to_world_vjp: centroid case distributes mean cotangent") {
  TriangleMesh tri = make_mesh({{0, 0, 0}, {1, 0, 0}, {0, 1, 0}}, {{0, 1, 2}});
  SurfelSet s;
  s.face_id = {0};
  s.bary_logits = {{0, 0, 0}};
  s.tangent_log_scales = {{-3, -3}};
  s.opacity_logits = {0.0};
  s.sh_degree = 0;
  s.sh.assign(3, 0.0);

  GaussianCotangent ct;
  ct.d_mean = {1.0, 2.0, 3.0};
  auto grads = bind_to_world_vjp(tri, s, std::span<const GaussianCotangent>(&ct, 1));
  for (int v = 0; v < 3; ++v)
    CHECK(norm(grads.d_vertices[v] - (1.0 / 3.0) * ct.d_mean) < 1e-12);

  // zero cotangent -> zero gradients
  GaussianCotangent zero;
  auto zg = bind_to_world_vjp(tri, s, std::span<const GaussianCotangent>(&zero, 1));
  for (const auto& v : zg.d_vertices) CHECK(norm(v) == 0.0);
  CHECK(zg.d_bary_logits[0][0] == 0.0);
}

TEST_CASE("bind_to_world_vjp matches finite differences on all groups") {
  TriangleMesh mesh = test::random_mesh(45, 0);  // 12 vertices, 20 faces
  SurfelSet s = test::random_surfels(mesh, 46, 1, 1);
  REQUIRE(s.size() == 20);

  BindProbe probe(s.size(), 47);
  auto grads = bind_to_world_vjp(mesh, s, probe.cotangents);

  const double h = 1e-6;
  double worst = 0.0;

  for (int i = 0; i < mesh.vertex_count(); i += 3)
    for (int a = 0; a < 3; ++a) {
      TriangleMesh mp = mesh, mm = mesh;
      mp.vertices[i][a] += h;
      mm.vertices[i][a] -= h;
      double fd = (probe.eval(mp, s) - probe.eval(mm, s)) / (2 * h);
      worst = std::max(worst, test::rel_err(grads.d_vertices[i][a], fd, 1e-6));
    }

  for (int g = 0; g < s.size(); g += 4) {
    for (int k = 0; k < 3; ++k) {
      SurfelSet sp = s, sm = s;
      sp.bary_logits[g][k] += h;
      sm.bary_logits[g][k] -= h;
      double fd = (probe.eval(mesh, sp) - probe.eval(mesh, sm)) / (2 * h);
      worst = std::max(worst, test::rel_err(grads.d_bary_logits[g][k], fd, 1e-6));
    }
    for (int k = 0; k < 2; ++k) {
      SurfelSet sp = s, sm = s;
      sp.tangent_log_scales[g][k] += h;
      sm.tangent_log_scales[g][k] -= h;
      double fd = (probe.eval(mesh, sp) - probe.eval(mesh, sm)) / (2 * h);
      worst = std::max(worst, test::rel_err(grads.d_tangent_log_scales[g][k], fd, 1e-6));
    }
    {
      SurfelSet sp = s, sm = s;
      sp.opacity_logits[g] += h;
      sm.opacity_logits[g] -= h;
      double fd = (probe.eval(mesh, sp) - probe.eval(mesh, sm)) / (2 * h);
      worst = std::max(worst, test::rel_err(grads.d_opacity_logits[g], fd, 1e-6));
    }
    {
      SurfelSet sp = s, sm = s;
      sp.sh[g * 12 + 4] += h;
      sm.sh[g * 12 + 4] -= h;
      double fd = (probe.eval(mesh, sp) - probe.eval(mesh, sm)) / (2 * h);
      worst = std::max(worst, test::rel_err(grads.d_sh[g * 12 + 4], fd, 1e-6));
    }
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("eval_sh basics") {
  // degree 0 is isotropic: clamp(C0 c + 0.5)
  double coeffs[3] = {0.7, 0.7, 0.7};
  Vec3 a = eval_sh(coeffs, 0, {0, 0, 1});
  Vec3 b = eval_sh(coeffs, 0, normalized({1, -2, 0.5}));
  double expect = 0.28209479 * 0.7 + 0.5;
  CHECK(a.x == doctest::Approx(expect).epsilon(1e-7));
  CHECK(norm(a - b) < 1e-15);

  double zeros[48] = {0};
  Vec3 gray = eval_sh(zeros, 3, {0, 0, 1});
  CHECK(norm(gray - Vec3{0.5, 0.5, 0.5}) < 1e-15);

  // degree-1 z coefficient: difference between +z and -z views = 2 * C1 * c
  double d1[12] = {0};
  d1[2 * 3 + 0] = 0.3;  // z-coefficient, red channel
  Vec3 up = eval_sh(d1, 1, {0, 0, 1});
  Vec3 down = eval_sh(d1, 1, {0, 0, -1});
  CHECK(up.x - down.x == doctest::Approx(2.0 * 0.48860251 * 0.3).epsilon(1e-7));

  CHECK_THROWS_AS(eval_sh(coeffs, 0, {0, 0, 2}), DegenerateGeometryError);
}

TEST_CASE("eval_sh_vjp matches finite differences") {
  Rng rng(48);
  double coeffs[48];
  for (auto& c : coeffs) c = 0.2 * rng.normal();
  Vec3 dir = normalized({0.3, -0.5, 0.8});
  Vec3 cot{rng.normal(), rng.normal(), rng.normal()};

  for (int degree : {0, 1, 2, 3}) {
    ShVjp vjp = eval_sh_vjp(coeffs, degree, dir, cot);
    const double h = 1e-6;
    const int nc = (degree + 1) * (degree + 1);
    double worst = 0.0;
    for (int k = 0; k < nc * 3; ++k) {
      double save = coeffs[k];
      coeffs[k] = save + h;
      Vec3 up = eval_sh(coeffs, degree, dir);
      coeffs[k] = save - h;
      Vec3 dn = eval_sh(coeffs, degree, dir);
      coeffs[k] = save;
      double fd = (dot(cot, up) - dot(cot, dn)) / (2 * h);
      worst = std::max(worst, test::rel_err(vjp.d_coeffs[k], fd, 1e-6));
    }
    CHECK(worst < 1e-5);
  }
}

TEST_CASE("transform_gaussians and vjp") {
  TriangleMesh mesh = test::random_mesh(51, 0);
  SurfelSet s = test::random_surfels(mesh, 52, 1, 0);
  auto locals = bind_to_world(mesh, s);
  Pose pose{so3_exp({0.3, -0.6, 0.2}), {0.4, 0.1, -0.3}};

  auto world = transform_gaussians(pose, locals);
  for (size_t g = 0; g < locals.size(); ++g) {
    CHECK(norm(world[g].mean - pose.apply(locals[g].mean)) < 1e-12);
    CHECK(norm(world[g].scales - locals[g].scales) == 0.0);
  }

  // fd check of the pose tangent
  Rng rng(53);
  std::vector<GaussianCotangent> cots(locals.size());
  for (auto& ct : cots) {
    ct.d_mean = {rng.normal(), rng.normal(), rng.normal()};
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) ct.d_rotation.m[i][j] = rng.normal();
  }
  auto probe = [&](const Pose& p) {
    auto w = transform_gaussians(p, locals);
    double j = 0.0;
    for (size_t g = 0; g < w.size(); ++g) {
      j += dot(cots[g].d_mean, w[g].mean);
      for (int i = 0; i < 3; ++i)
        for (int k = 0; k < 3; ++k) j += cots[g].d_rotation.m[i][k] * w[g].rotation.m[i][k];
    }
    return j;
  };

  std::vector<GaussianCotangent> d_local(locals.size());
  PoseTangent tangent = transform_gaussians_vjp(pose, locals, cots, d_local);

  const double h = 1e-7;
  for (int k = 0; k < 3; ++k) {
    Vec3 e;
    e[k] = 1.0;
    Pose pp{pose.R * so3_exp(h * e), pose.t};
    Pose pm{pose.R * so3_exp(-h * e), pose.t};
    double fd = (probe(pp) - probe(pm)) / (2 * h);
    CHECK(test::rel_err(tangent.rotation[k], fd, 1e-6) < 1e-5);

    Pose tp{pose.R, pose.t + h * e};
    Pose tm{pose.R, pose.t - h * e};
    fd = (probe(tp) - probe(tm)) / (2 * h);
    CHECK(test::rel_err(tangent.translation[k], fd, 1e-6) < 1e-5);
  }
}

TEST_CASE("splat ply round trip") {
  namespace fs = std::filesystem;
  TriangleMesh mesh = test::random_mesh(55, 1);
  SurfelSet s = test::random_surfels(mesh, 56, 2, 2);
  auto gaussians = bind_to_world(mesh, s);

  fs::path dir = fs::temp_directory_path() / "resim_splat_test";
  fs::create_directories(dir);
  std::string p1 = (dir / "a.ply").string();
  std::string p2 = (dir / "b.ply").string();

  export_splat_ply(gaussians, p1, false);
  auto imported = import_splat_ply(p1);
  REQUIRE(imported.size() == gaussians.size());
  for (size_t g = 0; g < imported.size(); ++g) {
    CHECK(norm(imported[g].mean - gaussians[g].mean) < 1e-6);
    CHECK(imported[g].sh_degree == 2);
  }

  // float32 quantization is idempotent: a second export round trip is exact
  export_splat_ply(imported, p2, false);
  auto again = import_splat_ply(p2);
  for (size_t g = 0; g < imported.size(); ++g) {
    CHECK(imported[g].mean.x == again[g].mean.x);
    CHECK(imported[g].opacity == again[g].opacity);
    CHECK(imported[g].scales.y == again[g].scales.y);
    for (int k = 0; k < 27; ++k) CHECK(imported[g].sh[k] == again[g].sh[k]);
  }

  // fixed-opacity flag survives the file format and forces opacity 1.0
  export_splat_ply(gaussians, p1, true);
  auto clamped = import_splat_ply(p1);
  for (const auto& g : clamped) CHECK(g.opacity == 1.0);
}
