#include <doctest.h>

#include <filesystem>

#include "resim/error.hpp"
#include "resim/eval.hpp"
#include "resim/pipeline.hpp"
#include "resim/threading.hpp"
#include "test_util.hpp"

using namespace resim;
namespace fs = std::filesystem;

namespace {

// End-to-end gradient check on a tiny scene: 2 faces, 4 gaussians, 16x16.
// Probes the full chain loss(render(bind(deform(mesh)))) for every group.
struct TinyPipeline {
  TriangleMesh base;
  SurfelSet surfels;
  Camera nominal;
  Observation obs;
  LossWeights weights;

  TinyPipeline() {
    base = make_mesh({{-0.3, -0.3, 0.0}, {0.35, -0.25, 0.03}, {0.0, 0.4, -0.02}, {0.4, 0.35, 0.06}},
                     {{0, 1, 2}, {1, 3, 2}});
    Rng rng(140);
    surfels.sh_degree = 1;
    for (int f = 0; f < 2; ++f)
      for (int k = 0; k < 2; ++k) {
        surfels.face_id.push_back(f);
        surfels.bary_logits.push_back({rng.normal(), rng.normal(), rng.normal()});
        surfels.tangent_log_scales.push_back({std::log(0.12), std::log(0.12)});
        surfels.opacity_logits.push_back(0.8);
        for (int c = 0; c < 12; ++c)
          surfels.sh.push_back(c < 3 ? 0.2 * rng.normal() : 0.03 * rng.normal());
      }
    nominal = test::test_camera({0.1, -0.15, 1.8}, {0, 0, 0}, 16);

    // observation from a perturbed copy so losses and gradients are nonzero
    SurfelSet gt = surfels;
    for (auto& l : gt.bary_logits) l[0] += 0.3;
    for (int g = 0; g < gt.size(); ++g) gt.sh_at(g)[0] += 0.15;
    auto gt_gaussians = bind_to_world(base, gt);
    RenderBundle b = render_bundle(
        gt_gaussians, nominal,
        std::array<Modality, 3>{Modality::kRgb, Modality::kNormals, Modality::kMask},
        std::array<Vec3, 3>{Vec3{}, Vec3{}, Vec3{}});
    obs.rgb = b.colors[0];
    obs.normal_map = b.colors[1];
    obs.mask = b.alpha;
    obs.weight = 1.0;
    weights.smask = 0.01;
  }

  // Scalar objective at explicit parameter values.
  double objective(const MeshDeformation& def, const SurfelSet& s, Vec3 cam_delta) const {
    TriangleMesh deformed = apply_deformation(base, def);
    auto gaussians = bind_to_world(deformed, s);
    Camera cam = apply_rotation_delta(nominal, cam_delta);
    std::array<Modality, 3> mods{Modality::kRgb, Modality::kMask, Modality::kNormals};
    std::array<Vec3, 3> bgs{Vec3{}, Vec3{}, Vec3{}};
    RenderBundle bundle = render_bundle(gaussians, cam, mods, bgs);

    Image mask1(16, 16, 1);
    for (int y = 0; y < 16; ++y)
      for (int x = 0; x < 16; ++x) mask1.at(x, y, 0) = bundle.colors[1].at(x, y, 0);
    FrameRender fr{&bundle.colors[0], &mask1, &bundle.colors[2]};
    const Observation* op = &obs;
    TotalLoss tl = total_loss(std::span<const FrameRender>(&fr, 1),
                              std::span<const Observation* const>(&op, 1), weights, &deformed);
    return tl.total;
  }
};

}  // namespace

TEST_CASE("end-to-end gradients match finite differences for every group") {
  TinyPipeline tp;
  MeshDeformation def = MeshDeformation::zeros(tp.base.vertex_count());
  Vec3 cam_delta{0.01, -0.02, 0.005};

  // analytic gradients via the module chain
  TriangleMesh deformed = apply_deformation(tp.base, def);
  auto gaussians = bind_to_world(deformed, tp.surfels);
  Camera cam = apply_rotation_delta(tp.nominal, cam_delta);
  std::array<Modality, 3> mods{Modality::kRgb, Modality::kMask, Modality::kNormals};
  std::array<Vec3, 3> bgs{Vec3{}, Vec3{}, Vec3{}};
  RenderBundle bundle = render_bundle(gaussians, cam, mods, bgs);
  Image mask1(16, 16, 1);
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x) mask1.at(x, y, 0) = bundle.colors[1].at(x, y, 0);
  FrameRender fr{&bundle.colors[0], &mask1, &bundle.colors[2]};
  const Observation* op = &tp.obs;
  TotalLoss tl = total_loss(std::span<const FrameRender>(&fr, 1),
                            std::span<const Observation* const>(&op, 1), tp.weights, &deformed);

  Image mask_cot(16, 16, 3);
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x) mask_cot.at(x, y, 0) = tl.frames[0].d_mask.at(x, y, 0);
  std::array<const Image*, 3> cots{&tl.frames[0].d_rgb, &mask_cot, &tl.frames[0].d_normal};
  RasterGrads rg = render_bundle_vjp(gaussians, cam, mods, bgs, {}, cots, bundle);
  BindGrads bgr = bind_to_world_vjp(deformed, tp.surfels, rg.gaussians);
  Vec3 cam_grad = rotation_delta_vjp(tp.nominal, cam_delta, rg.camera.rotation,
                                     rg.camera.translation);

  const double h = 1e-6;
  double worst = 0.0;

  // vertex deltas (chain includes regularizers)
  for (int v = 0; v < tp.base.vertex_count(); ++v)
    for (int a = 0; a < 3; ++a) {
      MeshDeformation dp = def, dm = def;
      dp.vertex_deltas[v][a] += h;
      dm.vertex_deltas[v][a] -= h;
      double fd =
          (tp.objective(dp, tp.surfels, cam_delta) - tp.objective(dm, tp.surfels, cam_delta)) /
          (2 * h);
      double analytic = bgr.d_vertices[v][a] + tl.d_vertices[v][a];
      worst = std::max(worst, test::rel_err(analytic, fd, 1e-3));
    }

  // global translation
  for (int a = 0; a < 3; ++a) {
    MeshDeformation dp = def, dm = def;
    dp.global_translation[a] += h;
    dm.global_translation[a] -= h;
    double fd =
        (tp.objective(dp, tp.surfels, cam_delta) - tp.objective(dm, tp.surfels, cam_delta)) /
        (2 * h);
    double analytic = 0.0;
    for (int v = 0; v < tp.base.vertex_count(); ++v)
      analytic += bgr.d_vertices[v][a] + tl.d_vertices[v][a];
    worst = std::max(worst, test::rel_err(analytic, fd, 1e-3));
  }

  // gaussian parameter groups
  for (int g = 0; g < tp.surfels.size(); ++g) {
    for (int k = 0; k < 3; ++k) {
      SurfelSet sp = tp.surfels, sm = tp.surfels;
      sp.bary_logits[g][k] += h;
      sm.bary_logits[g][k] -= h;
      double fd = (tp.objective(def, sp, cam_delta) - tp.objective(def, sm, cam_delta)) / (2 * h);
      worst = std::max(worst, test::rel_err(bgr.d_bary_logits[g][k], fd, 1e-3));
    }
    for (int k = 0; k < 2; ++k) {
      SurfelSet sp = tp.surfels, sm = tp.surfels;
      sp.tangent_log_scales[g][k] += h;
      sm.tangent_log_scales[g][k] -= h;
      double fd = (tp.objective(def, sp, cam_delta) - tp.objective(def, sm, cam_delta)) / (2 * h);
      worst = std::max(worst, test::rel_err(bgr.d_tangent_log_scales[g][k], fd, 1e-3));
    }
    {
      SurfelSet sp = tp.surfels, sm = tp.surfels;
      sp.opacity_logits[g] += h;
      sm.opacity_logits[g] -= h;
      double fd = (tp.objective(def, sp, cam_delta) - tp.objective(def, sm, cam_delta)) / (2 * h);
      worst = std::max(worst, test::rel_err(bgr.d_opacity_logits[g], fd, 1e-3));
    }
    for (int k : {0, 4}) {
      SurfelSet sp = tp.surfels, sm = tp.surfels;
      sp.sh[g * 12 + k] += h;
      sm.sh[g * 12 + k] -= h;
      double fd = (tp.objective(def, sp, cam_delta) - tp.objective(def, sm, cam_delta)) / (2 * h);
      worst = std::max(worst, test::rel_err(bgr.d_sh[g * 12 + k], fd, 1e-3));
    }
  }

  // camera rotation delta
  for (int a = 0; a < 3; ++a) {
    Vec3 dp = cam_delta, dm = cam_delta;
    dp[a] += h;
    dm[a] -= h;
    double fd =
        (tp.objective(def, tp.surfels, dp) - tp.objective(def, tp.surfels, dm)) / (2 * h);
    worst = std::max(worst, test::rel_err(cam_grad[a], fd, 1e-3));
  }

  CHECK(worst < 1e-3);
}

TEST_CASE("reconstruct: fixed point at the ground truth") {
  // Dataset rendered from the gt scene; init == gt; zero regularization.
  // Gradients are exactly zero so parameters must not move at all.
  SceneAsset gt = make_ellipsoid_asset({0.05, 0.05, 0.05}, 40, 1, 3.0, 1);

  GenConfig gc;
  gc.n_views = 6;
  gc.width = 32;
  gc.height = 32;
  gc.seed = 4;
  gc.with_normals = false;
  Dataset ds = generate_dataset(gt, gc);

  // Reconstruct config that reproduces the gt asset exactly at init: the
  // sphere init matches because the gt asset is that very sphere.
  ReconstructConfig rc;
  rc.steps = 40;
  rc.seed = 40;  // same seed -> same allocation/init as the asset builder?
  rc.eval_every = 20;
  rc.sh_degree = 1;
  rc.gaussians_per_face = 3.0;
  rc.init_subdivisions = 1;
  rc.init_radius = 0.05;
  rc.opacity_clamped = true;
  rc.weights = LossWeights{1.0, 10.0, 0.0, 0.0, 0.0, 0.0};

  // Instead of relying on seeds matching the builder, drive reconstruct on a
  // dataset from its own init: rebuild the asset from reconstruct's
  // initialization by running zero steps first.
  ReconstructConfig probe_cfg = rc;
  probe_cfg.steps = 0;
  ReconstructResult init = reconstruct(ds, probe_cfg);

  SceneAsset self{init.mesh, init.params.surfels};
  Dataset self_ds = generate_dataset(self, gc);
  // Photometric-only fixed point: with a mask present the gt (x) mask target
  // differs from the prediction on soft silhouette edges by definition, so
  // the exact fixed point is probed on the unmasked photometric path.
  for (auto& fr : self_ds.frames) {
    fr.mask.reset();
    fr.mask_path.clear();
    fr.normal.reset();
    fr.normal_path.clear();
  }
  rc.weights = LossWeights{1.0, 0.0, 0.0, 0.0, 0.0, 0.0};

  ReconstructResult res = reconstruct(self_ds, rc);
  CHECK(res.initial_eval_loss < 1e-9);
  CHECK(res.best_eval_loss < 1e-9);
  // zero gradients at the optimum: parameters must not drift at all
  for (int i = 0; i < init.base_mesh.vertex_count(); ++i)
    CHECK(norm(res.params.deformation.vertex_deltas[i]) < 1e-4);
  CHECK(norm(res.params.deformation.global_translation) < 1e-4);
}

TEST_CASE("reconstruct: determinism per seed") {
  SceneAsset gt = make_ellipsoid_asset({0.055, 0.045, 0.05}, 41, 1, 3.0, 1);
  GenConfig gc;
  gc.n_views = 5;
  gc.width = 24;
  gc.height = 24;
  gc.with_normals = false;
  Dataset ds = generate_dataset(gt, gc);

  ReconstructConfig rc;
  rc.steps = 25;
  rc.eval_every = 25;
  rc.seed = 7;
  rc.sh_degree = 0;
  rc.gaussians_per_face = 2.0;
  rc.init_subdivisions = 1;
  rc.init_radius = 0.05;
  rc.weights = LossWeights{1.0, 10.0, 0.01, 0.0, 3.0, 0.01};

  set_num_threads(1);
  ReconstructResult a = reconstruct(ds, rc);
  ReconstructResult b = reconstruct(ds, rc);
  set_num_threads(0);
  REQUIRE(a.history.size() == b.history.size());
  for (size_t i = 0; i < a.history.size(); ++i)
    CHECK(a.history[i].total == b.history[i].total);
  for (size_t i = 0; i < a.params.surfels.sh.size(); ++i)
    CHECK(a.params.surfels.sh[i] == b.params.surfels.sh[i]);
}

TEST_CASE("reconstruct: best-so-far eval loss is non-increasing") {
  SceneAsset gt = make_ellipsoid_asset({0.06, 0.045, 0.05}, 42, 1, 3.0, 1);
  GenConfig gc;
  gc.n_views = 5;
  gc.width = 24;
  gc.height = 24;
  gc.with_normals = false;
  Dataset ds = generate_dataset(gt, gc);

  ReconstructConfig rc;
  rc.steps = 60;
  rc.eval_every = 10;
  rc.sh_degree = 0;
  rc.gaussians_per_face = 2.0;
  rc.init_subdivisions = 1;
  rc.weights = LossWeights{1.0, 10.0, 0.0, 0.0, 1.0, 0.01};
  ReconstructResult res = reconstruct(ds, rc);

  double best = 1e300;
  std::vector<double> best_series;
  for (const auto& r : res.history)
    if (r.is_eval) {
      best = std::min(best, r.total);
      best_series.push_back(best);
    }
  for (size_t i = 1; i < best_series.size(); ++i) CHECK(best_series[i] <= best_series[i - 1]);
  CHECK(res.best_eval_loss == best);

  // frozen camera group stays exactly zero
  ReconstructConfig rf = rc;
  rf.steps = 10;
  rf.frozen = {"camera_rot"};
  ReconstructResult res2 = reconstruct(ds, rf);
  for (const auto& d : res2.params.camera_rot_deltas) CHECK(norm(d) == 0.0);
}

TEST_CASE("scene state round trip") {
  SceneAsset gt = make_ellipsoid_asset({0.05, 0.04, 0.045}, 43, 2, 3.0, 1);
  SceneState state;
  state.base_mesh = gt.mesh;
  state.deformation = MeshDeformation::zeros(gt.mesh.vertex_count());
  state.deformation.global_translation = {0.01, -0.02, 0.003};
  state.surfels = gt.surfels;
  state.camera_deltas = {{0.1, 0.2, 0.3}, {-0.4, 0.5, -0.6}};

  fs::path dir = fs::temp_directory_path() / "resim_scene_state";
  fs::create_directories(dir);
  std::string path = (dir / "scene.json").string();
  save_scene_state(state, path);
  SceneState loaded = load_scene_state(path);

  CHECK(loaded.base_mesh.faces == state.base_mesh.faces);
  for (int i = 0; i < state.base_mesh.vertex_count(); ++i)
    CHECK(loaded.base_mesh.vertices[i].x == state.base_mesh.vertices[i].x);
  CHECK(loaded.surfels.sh == state.surfels.sh);
  CHECK(loaded.surfels.fixed_opacity == state.surfels.fixed_opacity);
  CHECK(loaded.camera_deltas.size() == 2);
  CHECK(loaded.camera_deltas[1].z == -0.6);
}
