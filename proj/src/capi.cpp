#include "resim.h"

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>

#include <nlohmann/json.hpp>

#include "resim/error.hpp"
#include "resim/eval.hpp"
#include "resim/pipeline.hpp"
#include "resim/ply.hpp"
#include "resim/scene_io.hpp"
#include "resim/threading.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace resim;

namespace {

thread_local std::string g_last_error;

resim_status to_status(const std::exception& e) {
  g_last_error = e.what();
  if (dynamic_cast<const ConfigError*>(&e)) return RESIM_ERR_CONFIG;
  if (dynamic_cast<const IoError*>(&e)) return RESIM_ERR_IO;
  if (dynamic_cast<const NumericalError*>(&e)) return RESIM_ERR_NUMERICAL;
  if (dynamic_cast<const ShapeError*>(&e)) return RESIM_ERR_SHAPE;
  if (dynamic_cast<const BoundError*>(&e)) return RESIM_ERR_CONFIG;
  if (dynamic_cast<const StateError*>(&e)) return RESIM_ERR_STATE;
  if (dynamic_cast<const Error*>(&e)) return RESIM_ERR_UNKNOWN;
  return RESIM_ERR_UNKNOWN;
}

template <typename Fn>
resim_status guarded(Fn&& fn) {
  try {
    fn();
    g_last_error.clear();
    return RESIM_OK;
  } catch (const std::exception& e) {
    return to_status(e);
  } catch (...) {
    g_last_error = "unknown error";
    return RESIM_ERR_UNKNOWN;
  }
}

json parse_config(const char* config_json) {
  if (!config_json) throw ConfigError("null config");
  try {
    return json::parse(config_json);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
}

std::string require_string(const json& cfg, const char* key) {
  if (!cfg.contains(key) || !cfg.at(key).is_string())
    throw ConfigError(std::string("config: missing string key \"") + key + "\"");
  return cfg.at(key).get<std::string>();
}

Vec3 vec3_from(const json& j, Vec3 fallback = {}) {
  if (j.is_null()) return fallback;
  return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()};
}

void apply_threads(const json& cfg) {
  if (cfg.contains("threads")) set_num_threads(cfg.at("threads").get<int>());
}

void echo_config(const json& cfg, const std::string& out_dir) {
  fs::create_directories(out_dir);
  std::ofstream os(fs::path(out_dir) / "config.json");
  if (!os) throw IoError("cannot write config echo in " + out_dir);
  os << cfg.dump(2) << "\n";
}

LossWeights weights_from(const json& cfg) {
  LossWeights w;
  if (!cfg.contains("weights")) return w;
  const json& jw = cfg.at("weights");
  w.photo = jw.value("photo", w.photo);
  w.mask = jw.value("mask", w.mask);
  w.smask = jw.value("smask", w.smask);
  w.normal = jw.value("normal", w.normal);
  w.laplacian = jw.value("laplacian", w.laplacian);
  w.edge = jw.value("edge", w.edge);
  return w;
}

SceneAsset asset_from_config(const json& scene, uint64_t seed) {
  std::string kind = scene.value("kind", "ellipsoid");
  int sh_degree = scene.value("sh_degree", 2);
  double per_face = scene.value("gaussians_per_face", 12.0);
  int subdivisions = scene.value("subdivisions", 3);
  if (kind == "ellipsoid") {
    Vec3 semi = scene.contains("semi_axes") ? vec3_from(scene.at("semi_axes"))
                                            : Vec3{0.065, 0.048, 0.038};
    return make_ellipsoid_asset(semi, seed, sh_degree, per_face, subdivisions);
  }
  if (kind == "bumpy_sphere") {
    double radius = scene.value("radius", 0.05);
    double amplitude = scene.value("amplitude", 0.12);
    return make_bumpy_sphere_asset(radius, amplitude, seed, sh_degree, per_face, subdivisions);
  }
  throw ConfigError("gen: unknown scene kind " + kind);
}

ReconstructConfig reconstruct_config_from(const json& cfg) {
  ReconstructConfig rc;
  rc.steps = cfg.value("steps", rc.steps);
  rc.seed = cfg.value("seed", uint64_t(0));
  rc.eval_every = cfg.value("eval_every", rc.eval_every);
  rc.sh_degree = cfg.value("sh_degree", rc.sh_degree);
  rc.gaussians_per_face = cfg.value("gaussians_per_face", rc.gaussians_per_face);
  if (cfg.contains("init")) {
    const json& ji = cfg.at("init");
    rc.init_subdivisions = ji.value("subdivisions", rc.init_subdivisions);
    rc.init_radius = ji.value("radius", rc.init_radius);
    if (ji.contains("center")) rc.init_center = vec3_from(ji.at("center"));
  }
  std::string opacity = cfg.value("opacity", "optimize");
  if (opacity == "clamp") rc.opacity_clamped = true;
  else if (opacity != "optimize") throw ConfigError("reconstruct: opacity must be optimize|clamp");
  rc.surfel_clamp = cfg.value("surfel_clamp", true);
  if (cfg.contains("smask")) {
    const json& js = cfg.at("smask");
    rc.smask_tau = js.value("tau", rc.smask_tau);
    std::string mode = js.value("mode", "smooth");
    if (mode == "literal") rc.smask_literal = true;
    else if (mode != "smooth") throw ConfigError("reconstruct: smask mode must be smooth|literal");
  }
  rc.weights = weights_from(cfg);
  if (cfg.contains("lr")) {
    const json& jl = cfg.at("lr");
    rc.lr_gaussians = jl.value("gaussians", rc.lr_gaussians);
    rc.lr_vertex = jl.value("vertex_deltas", rc.lr_vertex);
    rc.lr_translation = jl.value("translation", rc.lr_translation);
    rc.lr_camera = jl.value("camera_rot", rc.lr_camera);
  }
  if (cfg.contains("freeze"))
    for (const auto& f : cfg.at("freeze")) rc.frozen.insert(f.get<std::string>());
  if (cfg.contains("background")) rc.background = vec3_from(cfg.at("background"));
  return rc;
}

void write_metrics(const json& metrics, const std::string& out_dir) {
  std::ofstream os(fs::path(out_dir) / "metrics.json");
  if (!os) throw IoError("cannot write metrics.json in " + out_dir);
  os << metrics.dump(2) << "\n";
}

void cmd_gen_impl(const json& cfg) {
  std::string out = require_string(cfg, "out");
  apply_threads(cfg);
  uint64_t seed = cfg.value("seed", uint64_t(0));
  const json& scene = cfg.contains("scene") ? cfg.at("scene") : json::object();
  std::string kind = scene.value("kind", "ellipsoid");

  if (kind == "robot") {
    KinematicChain chain = load_chain_json(require_string(scene, "chain"));
    RobotScene robot = make_robot_scene(chain, scene.value("scene_seed", uint64_t(7)));
    RobotGenConfig rg;
    rg.n_steps = scene.value("n_steps", 4);
    rg.joint_sigma = scene.value("sigma", 0.01);
    rg.seed = seed;
    if (scene.contains("home")) rg.home = scene.at("home").get<std::vector<double>>();
    rg.range = scene.value("range", 0.3);
    Dataset ds = generate_robot_dataset(robot, rg);
    echo_config(cfg, out);
    save_dataset(ds, out);
    return;
  }

  SceneAsset asset = asset_from_config(scene, scene.value("scene_seed", seed));
  GenConfig gc;
  gc.n_views = cfg.value("n_views", 50);
  if (cfg.contains("resolution")) {
    gc.width = cfg.at("resolution").at(0).get<int>();
    gc.height = cfg.at("resolution").at(1).get<int>();
  }
  gc.seed = seed;
  gc.camera_rot_noise_deg = cfg.value("camera_rot_noise_deg", 0.0);
  gc.focal_scale = cfg.value("focal_scale", 1.5);
  gc.distance_scale = cfg.value("distance_scale", 2.5);
  gc.train_fraction = cfg.value("train_fraction", 0.8);
  Dataset ds = generate_dataset(asset, gc);
  echo_config(cfg, out);
  save_dataset(ds, out);
  export_asset(asset.mesh, asset.surfels, (fs::path(out) / "gt").string());
}

void cmd_reconstruct_impl(const json& cfg) {
  std::string out = require_string(cfg, "out");
  std::string dataset_dir = require_string(cfg, "dataset");
  apply_threads(cfg);
  ReconstructConfig rc = reconstruct_config_from(cfg);

  Dataset ds = load_dataset(dataset_dir);
  echo_config(cfg, out);
  ReconstructResult res = reconstruct(ds, rc);

  save_loss_csv(res.history, (fs::path(out) / "loss.csv").string());
  SceneState state{res.base_mesh, res.params.deformation, res.params.surfels,
                   res.params.camera_rot_deltas};
  save_scene_state(state, (fs::path(out) / "scene.json").string());
  export_asset(res.mesh, res.params.surfels, out);

  json summary;
  summary["initial_eval_loss"] = res.initial_eval_loss;
  summary["best_eval_loss"] = res.best_eval_loss;
  summary["best_step"] = res.best_step;
  summary["divergence_events"] = res.divergence_events;
  std::ofstream os(fs::path(out) / "summary.json");
  os << summary.dump(2) << "\n";
}

void cmd_calibrate_impl(const json& cfg) {
  std::string out = require_string(cfg, "out");
  std::string dataset_dir = require_string(cfg, "dataset");
  std::string chain_path = require_string(cfg, "chain");
  apply_threads(cfg);

  CalibrateConfig cc;
  cc.iterations = cfg.value("iterations", cc.iterations);
  cc.seed = cfg.value("seed", uint64_t(0));
  if (cfg.contains("lr")) {
    const json& jl = cfg.at("lr");
    cc.lr_colors = jl.value("colors", cc.lr_colors);
    cc.lr_joints = jl.value("joints", cc.lr_joints);
    cc.lr_camera = jl.value("camera_rot", cc.lr_camera);
  }
  cc.w_fixed = cfg.value("w_fixed", cc.w_fixed);
  cc.w_wrist = cfg.value("w_wrist", cc.w_wrist);

  KinematicChain chain = load_chain_json(chain_path);
  RobotScene scene = make_robot_scene(chain, cfg.value("scene_seed", uint64_t(7)));
  Dataset ds = load_dataset(dataset_dir);
  echo_config(cfg, out);

  CalibrateResult res = calibrate(ds, scene, cc);

  {
    std::ofstream os(fs::path(out) / "tcp_history.csv");
    os << "iteration,tcp_error_mm\n";
    for (size_t i = 0; i < res.tcp_history_mm.size(); ++i) {
      char line[64];
      std::snprintf(line, sizeof(line), "%zu,%.17g\n", i, res.tcp_history_mm[i]);
      os << line;
    }
  }
  json metrics;
  metrics["tcp_error_mm"] = {{"initial", res.initial_tcp_mm},
                             {"final", res.best_tcp_mm},
                             {"best_iteration", res.best_iteration}};
  json jq = json::array();
  for (const auto& q : res.q_est) jq.push_back(q);
  json jd = json::array();
  for (const auto& d : res.camera_deltas) jd.push_back({d.x, d.y, d.z});
  json state;
  state["q_est"] = std::move(jq);
  state["camera_deltas"] = std::move(jd);
  std::ofstream os(fs::path(out) / "calibration.json");
  os << state.dump(2) << "\n";
  write_metrics(metrics, out);
}

void cmd_eval_impl(const json& cfg) {
  std::string out = require_string(cfg, "out");
  std::string dataset_dir = require_string(cfg, "dataset");
  std::string run_dir = require_string(cfg, "run");
  apply_threads(cfg);

  Dataset ds = load_dataset(dataset_dir);
  SceneState state = load_scene_state((fs::path(run_dir) / "scene.json").string());
  echo_config(cfg, out);

  TriangleMesh mesh = apply_deformation(state.base_mesh, state.deformation);
  json metrics;

  if (ds.gt_mesh) {
    uint64_t seed = cfg.value("seed", uint64_t(0));
    int n = cfg.value("samples", 10000);
    PointSample a = sample_surface(mesh, n, seed, "reconstruction");
    PointSample b = sample_surface(*ds.gt_mesh, n, seed + 1, "ground_truth");
    metrics["cd_mm2"] = chamfer(a, b);
  }

  if (!ds.test_ids.empty()) {
    std::vector<Observation> heldout;
    std::vector<Camera> cams;
    for (int id : ds.test_ids) {
      heldout.push_back(make_observation(ds, id));
      cams.push_back(ds.cameras[camera_index(ds, ds.frames[id].camera_id)]);
    }
    std::vector<const Observation*> obs_ptr;
    for (const auto& o : heldout) obs_ptr.push_back(&o);

    AlignConfig ac;
    ac.steps = cfg.value("align_steps", 200);
    if (!cfg.value("align", true)) ac.steps = 0;
    AlignResult ar = align_eval_cameras(mesh, state.surfels, cams, obs_ptr, ac);

    auto gaussians = bind_to_world(mesh, state.surfels);
    json psnr_frames = json::array(), ssim_frames = json::array();
    double psnr_sum = 0.0, ssim_sum = 0.0;
    for (size_t f = 0; f < heldout.size(); ++f) {
      RenderOutput r = render(gaussians, ar.cameras[f], Modality::kRgb, {}, ac.raster);
      double p = psnr(r.color, heldout[f].rgb);
      double s = ssim(r.color, heldout[f].rgb);
      psnr_frames.push_back(p);
      ssim_frames.push_back(s);
      psnr_sum += p;
      ssim_sum += s;
    }
    metrics["psnr_db"] = {{"frames", psnr_frames}, {"mean", psnr_sum / heldout.size()}};
    metrics["ssim"] = {{"frames", ssim_frames}, {"mean", ssim_sum / heldout.size()}};
  }

  write_metrics(metrics, out);
}

void cmd_export_impl(const json& cfg) {
  std::string out = require_string(cfg, "out");
  std::string run_dir = require_string(cfg, "run");
  apply_threads(cfg);
  SceneState state = load_scene_state((fs::path(run_dir) / "scene.json").string());
  echo_config(cfg, out);
  TriangleMesh mesh = apply_deformation(state.base_mesh, state.deformation);
  export_asset(mesh, state.surfels, out);
}

void cmd_render_impl(const json& cfg) {
  std::string out = require_string(cfg, "out");
  apply_threads(cfg);

  std::vector<WorldGaussian> gaussians;
  if (cfg.contains("splat")) {
    gaussians = import_splat_ply(require_string(cfg, "splat"));
  } else if (cfg.contains("run")) {
    SceneState state = load_scene_state(
        (fs::path(require_string(cfg, "run")) / "scene.json").string());
    TriangleMesh mesh = apply_deformation(state.base_mesh, state.deformation);
    gaussians = bind_to_world(mesh, state.surfels);
  } else {
    throw ConfigError("render: need \"splat\" or \"run\"");
  }

  Camera cam;
  json metrics;
  std::optional<Image> reference;
  if (cfg.contains("camera") && cfg.at("camera").contains("dataset")) {
    const json& jc = cfg.at("camera");
    Dataset ds = load_dataset(jc.at("dataset").get<std::string>());
    int frame = jc.value("frame", 0);
    if (frame < 0 || frame >= int(ds.frames.size()))
      throw ConfigError("render: frame index out of range");
    cam = ds.cameras[camera_index(ds, ds.frames[frame].camera_id)];
    reference = make_observation(ds, frame).rgb;
  } else if (cfg.contains("camera")) {
    const json& jc = cfg.at("camera");
    cam.fx = jc.at("fx").get<double>();
    cam.fy = jc.at("fy").get<double>();
    cam.cx = jc.at("cx").get<double>();
    cam.cy = jc.at("cy").get<double>();
    cam.width = jc.at("width").get<int>();
    cam.height = jc.at("height").get<int>();
    const auto& r = jc.at("rotation");
    for (int i = 0; i < 3; ++i)
      for (int k = 0; k < 3; ++k) cam.world_to_camera.R.m[i][k] = r.at(i * 3 + k).get<double>();
    cam.world_to_camera.t = vec3_from(jc.at("translation"));
  } else {
    throw ConfigError("render: missing \"camera\"");
  }

  echo_config(cfg, out);
  RenderOutput r = render(gaussians, cam, Modality::kRgb,
                          cfg.contains("background") ? vec3_from(cfg.at("background")) : Vec3{});
  save_png(r.color, (fs::path(out) / "render.png").string());
  save_png(r.alpha, (fs::path(out) / "alpha.png").string());
  metrics["gaussians"] = gaussians.size();
  metrics["skipped_singular"] = r.skipped_singular;
  if (reference) {
    double p = psnr(r.color, *reference);
    metrics["psnr_db"] = std::isinf(p) ? json("inf") : json(p);
  }
  write_metrics(metrics, out);
}

}  // namespace

extern "C" {

const char* resim_version(void) { return "0.1.0"; }

const char* resim_status_name(resim_status status) {
  switch (status) {
    case RESIM_OK: return "ok";
    case RESIM_ERR_CONFIG: return "config_error";
    case RESIM_ERR_IO: return "io_error";
    case RESIM_ERR_NUMERICAL: return "numerical_error";
    case RESIM_ERR_SHAPE: return "shape_error";
    case RESIM_ERR_STATE: return "state_error";
    case RESIM_ERR_UNKNOWN: return "unknown_error";
  }
  return "invalid_status";
}

const char* resim_last_error(void) { return g_last_error.c_str(); }

void resim_set_threads(int n) { set_num_threads(n); }

resim_status resim_cmd_gen(const char* config_json) {
  return guarded([&] { cmd_gen_impl(parse_config(config_json)); });
}
resim_status resim_cmd_reconstruct(const char* config_json) {
  return guarded([&] { cmd_reconstruct_impl(parse_config(config_json)); });
}
resim_status resim_cmd_calibrate(const char* config_json) {
  return guarded([&] { cmd_calibrate_impl(parse_config(config_json)); });
}
resim_status resim_cmd_eval(const char* config_json) {
  return guarded([&] { cmd_eval_impl(parse_config(config_json)); });
}
resim_status resim_cmd_export(const char* config_json) {
  return guarded([&] { cmd_export_impl(parse_config(config_json)); });
}
resim_status resim_cmd_render(const char* config_json) {
  return guarded([&] { cmd_render_impl(parse_config(config_json)); });
}

struct resim_splat {
  std::vector<WorldGaussian> gaussians;
};

resim_status resim_splat_load(const char* splat_ply, resim_splat** out) {
  return guarded([&] {
    if (!splat_ply || !out) throw ConfigError("resim_splat_load: null argument");
    auto* s = new resim_splat{import_splat_ply(splat_ply)};
    *out = s;
  });
}

void resim_splat_destroy(resim_splat* splat) { delete splat; }

int64_t resim_splat_count(const resim_splat* splat) {
  return splat ? int64_t(splat->gaussians.size()) : 0;
}

resim_status resim_splat_render(const resim_splat* splat, const double rotation[9],
                                const double translation[3], double fx, double fy, double cx,
                                double cy, int width, int height, double* out_rgb) {
  return guarded([&] {
    if (!splat || !rotation || !translation || !out_rgb)
      throw ConfigError("resim_splat_render: null argument");
    Camera cam;
    cam.fx = fx;
    cam.fy = fy;
    cam.cx = cx;
    cam.cy = cy;
    cam.width = width;
    cam.height = height;
    for (int i = 0; i < 3; ++i)
      for (int k = 0; k < 3; ++k) cam.world_to_camera.R.m[i][k] = rotation[i * 3 + k];
    cam.world_to_camera.t = {translation[0], translation[1], translation[2]};
    RenderOutput r = render(splat->gaussians, cam, Modality::kRgb, {});
    std::memcpy(out_rgb, r.color.data.data(), r.color.data.size() * sizeof(double));
  });
}

struct resim_chain {
  KinematicChain chain;
};

resim_status resim_chain_load(const char* json_path, resim_chain** out) {
  return guarded([&] {
    if (!json_path || !out) throw ConfigError("resim_chain_load: null argument");
    auto* c = new resim_chain{load_chain_json(json_path)};
    *out = c;
  });
}

void resim_chain_destroy(resim_chain* chain) { delete chain; }

int resim_chain_joint_count(const resim_chain* chain) {
  return chain ? chain->chain.joint_count : 0;
}

int resim_chain_tcp_count(const resim_chain* chain) {
  return chain ? int(chain->chain.tcps.size()) : 0;
}

resim_status resim_chain_tcp_positions(const resim_chain* chain, const double* q, int nq,
                                       double* out_xyz) {
  return guarded([&] {
    if (!chain || !q || !out_xyz) throw ConfigError("resim_chain_tcp_positions: null argument");
    JointState state;
    state.angles.assign(q, q + nq);
    FkResult fk = forward_kinematics(chain->chain, state);
    for (size_t i = 0; i < fk.tcp_points.size(); ++i) {
      out_xyz[3 * i + 0] = fk.tcp_points[i].x;
      out_xyz[3 * i + 1] = fk.tcp_points[i].y;
      out_xyz[3 * i + 2] = fk.tcp_points[i].z;
    }
  });
}

resim_status resim_chamfer_mm2(const double* a_xyz_mm, int64_t na, const double* b_xyz_mm,
                               int64_t nb, double* out_mm2) {
  return guarded([&] {
    if (!a_xyz_mm || !b_xyz_mm || !out_mm2) throw ConfigError("resim_chamfer_mm2: null argument");
    PointSample a, b;
    a.points.resize(size_t(na));
    for (int64_t i = 0; i < na; ++i)
      a.points[i] = {a_xyz_mm[3 * i], a_xyz_mm[3 * i + 1], a_xyz_mm[3 * i + 2]};
    b.points.resize(size_t(nb));
    for (int64_t i = 0; i < nb; ++i)
      b.points[i] = {b_xyz_mm[3 * i], b_xyz_mm[3 * i + 1], b_xyz_mm[3 * i + 2]};
    *out_mm2 = chamfer(a, b);
  });
}

}  // extern "C"
