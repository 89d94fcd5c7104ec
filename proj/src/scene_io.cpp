#include "resim/scene_io.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "resim/error.hpp"
#include "resim/ply.hpp"
#include "resim/rng.hpp"

namespace resim {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json pose_to_json(const Pose& p) {
  json j;
  json r = json::array();
  for (int i = 0; i < 3; ++i)
    for (int k = 0; k < 3; ++k) r.push_back(p.R.m[i][k]);
  j["rotation"] = r;
  j["translation"] = {p.t.x, p.t.y, p.t.z};
  return j;
}

Pose pose_from_json(const json& j) {
  Pose p;
  const auto& r = j.at("rotation");
  for (int i = 0; i < 3; ++i)
    for (int k = 0; k < 3; ++k) p.R.m[i][k] = r.at(i * 3 + k).get<double>();
  const auto& t = j.at("translation");
  p.t = {t.at(0).get<double>(), t.at(1).get<double>(), t.at(2).get<double>()};
  return p;
}

// Deterministic per-face RNG stream for surfel initialization.
struct SurfelInit {
  double logit_spread = 0.8;
  double scale_factor = 0.6;
  double opacity = 1.0;
  bool fixed_opacity = true;
};

SurfelSet build_surfels(const TriangleMesh& mesh, uint64_t seed, int sh_degree,
                        double per_face, const SurfelInit& init) {
  auto counts = allocate_gaussians(mesh, per_face, seed);
  auto areas = face_areas(mesh);

  SurfelSet s;
  s.sh_degree = sh_degree;
  s.fixed_opacity = init.fixed_opacity;
  const int nc = s.coeff_count();
  double logit0 = init.fixed_opacity
                      ? 0.0
                      : std::log(init.opacity / (1.0 - init.opacity));

  for (int f = 0; f < mesh.face_count(); ++f) {
    Rng rng = Rng::keyed(seed ^ 0xfacefeedULL, uint64_t(f));
    double sigma0 = init.scale_factor * std::sqrt(areas[f] / std::max(1, counts[f]));
    for (int k = 0; k < counts[f]; ++k) {
      s.face_id.push_back(f);
      s.bary_logits.push_back({init.logit_spread * rng.normal(),
                               init.logit_spread * rng.normal(),
                               init.logit_spread * rng.normal()});
      double ls = std::log(sigma0);
      s.tangent_log_scales.push_back({ls, ls});
      s.opacity_logits.push_back(logit0);
      for (int c = 0; c < nc * 3; ++c) s.sh.push_back(0.0);
    }
  }
  if (!s.clamp_normal_scale) s.normal_log_scales.assign(s.size(), 0.0);
  return s;
}

// Smooth colorful pattern: base color varies with position, higher orders add
// mild view dependence. mu must be the world position of the gaussian.
void paint_surfels(SurfelSet& s, const TriangleMesh& mesh, uint64_t seed) {
  auto gaussians = bind_to_world(mesh, s);
  Rng pal = Rng::keyed(seed ^ 0xc0105eedULL, 1);
  Vec3 k1{pal.uniform(40.0, 90.0), pal.uniform(40.0, 90.0), pal.uniform(40.0, 90.0)};
  Vec3 ph{pal.uniform(0.0, 6.28), pal.uniform(0.0, 6.28), pal.uniform(0.0, 6.28)};
  Vec3 dir1 = normalized({pal.normal(), pal.normal(), pal.normal()});
  Vec3 dir2 = normalized({pal.normal(), pal.normal(), pal.normal()});

  const int nc = s.coeff_count();
  constexpr double kC0 = 0.28209479177387814;
  for (int g = 0; g < s.size(); ++g) {
    Vec3 p = gaussians[g].mean;
    Rng rng = Rng::keyed(seed ^ 0x9a1e77eULL, uint64_t(g));
    double* sh = s.sh_at(g);
    for (int c = 0; c < 3; ++c) {
      double base = 0.5 + 0.28 * std::sin(k1[c] * dot(p, c == 0 ? dir1 : (c == 1 ? dir2 : dir1 + dir2)) + ph[c]);
      base += 0.05 * rng.normal();
      base = std::clamp(base, 0.08, 0.92);
      sh[c] = (base - 0.5) / kC0;
      for (int k = 1; k < nc; ++k) sh[k * 3 + c] = 0.03 * rng.normal();
    }
  }
}

}  // namespace

int camera_index(const Dataset& ds, const std::string& id) {
  for (size_t i = 0; i < ds.cameras.size(); ++i)
    if (ds.cameras[i].id == id) return int(i);
  throw ConfigError("dataset: unknown camera id " + id);
}

Observation make_observation(const Dataset& ds, int frame_idx) {
  const DatasetFrame& fr = ds.frames.at(frame_idx);
  const Camera& cam = ds.cameras[camera_index(ds, fr.camera_id)];
  Observation obs;
  obs.camera_id = fr.camera_id;
  obs.weight = cam.frame_weight;
  obs.step = fr.step;
  obs.joints = fr.joints;
  auto fetch = [&](const std::optional<Image>& mem, const std::string& rel) -> std::optional<Image> {
    if (mem) return mem;
    if (rel.empty()) return std::nullopt;
    return load_png((fs::path(ds.root) / rel).string());
  };
  auto rgb = fetch(fr.rgb, fr.rgb_path);
  if (!rgb) throw IoError("dataset frame " + std::to_string(frame_idx) + " has no RGB image");
  obs.rgb = std::move(*rgb);
  obs.mask = fetch(fr.mask, fr.mask_path);
  obs.normal_map = fetch(fr.normal, fr.normal_path);
  return obs;
}

Dataset generate_dataset(const SceneAsset& gt, const GenConfig& cfg, const RasterConfig& raster) {
  if (cfg.n_views < 2) throw BoundError("generate_dataset: need at least 2 views");

  Vec3 lo{1e300, 1e300, 1e300}, hi{-1e300, -1e300, -1e300};
  for (const auto& v : gt.mesh.vertices)
    for (int a = 0; a < 3; ++a) {
      lo[a] = std::min(lo[a], v[a]);
      hi[a] = std::max(hi[a], v[a]);
    }
  Vec3 center = 0.5 * (lo + hi);
  double extent = std::max({hi.x - lo.x, hi.y - lo.y, hi.z - lo.z});
  double distance = cfg.distance_scale * extent;

  auto gaussians = bind_to_world(gt.mesh, gt.surfels);

  Dataset ds;
  ds.gt_mesh = gt.mesh;
  const Modality mods[3] = {Modality::kRgb, Modality::kNormals, Modality::kMask};
  const Vec3 bgs[3] = {Vec3{}, Vec3{}, Vec3{}};
  const int n_mods = cfg.with_normals ? 3 : 1;

  for (int i = 0; i < cfg.n_views; ++i) {
    Rng rng = Rng::keyed(cfg.seed ^ 0xcafe0001ULL, uint64_t(i));
    double z = rng.uniform();
    double az = rng.uniform(0.0, 2.0 * 3.14159265358979323846);
    double rxy = std::sqrt(std::max(0.0, 1.0 - z * z));
    Vec3 dir{rxy * std::cos(az), rxy * std::sin(az), z};
    Vec3 eye = center + distance * dir;

    char name[16];
    std::snprintf(name, sizeof(name), "cam%03d", i);
    Camera true_cam =
        look_at_camera(eye, center, {0, 0, 1}, cfg.focal_scale * cfg.width,
                       cfg.focal_scale * cfg.width, cfg.width / 2.0, cfg.height / 2.0,
                       cfg.width, cfg.height);
    true_cam.id = name;

    Camera nominal = true_cam;
    if (cfg.camera_rot_noise_deg > 0.0) {
      Rng nrng = Rng::keyed(cfg.seed ^ 0xcafe0002ULL, uint64_t(i));
      Vec3 axis = normalized({nrng.normal(), nrng.normal(), nrng.normal()});
      double angle = cfg.camera_rot_noise_deg * 3.14159265358979323846 / 180.0;
      nominal = apply_rotation_delta(true_cam, angle * axis);
      nominal.id = name;
    }

    // Observations are rendered at the true pose; the manifest reports the
    // (possibly perturbed) nominal pose, like a miscalibrated rig would.
    RenderBundle bundle = render_bundle(gaussians, true_cam,
                                        std::span<const Modality>(mods, n_mods),
                                        std::span<const Vec3>(bgs, n_mods), raster);
    DatasetFrame fr;
    fr.camera_id = name;
    fr.step = i;
    fr.rgb = std::move(bundle.colors[0]);
    if (cfg.with_normals) {
      fr.normal = std::move(bundle.colors[1]);
      fr.mask = std::move(bundle.alpha);
    } else {
      fr.mask = std::move(bundle.alpha);
    }
    char buf[32];
    std::snprintf(buf, sizeof(buf), "rgb/f%04d.png", i);
    fr.rgb_path = buf;
    std::snprintf(buf, sizeof(buf), "mask/f%04d.png", i);
    fr.mask_path = buf;
    if (cfg.with_normals) {
      std::snprintf(buf, sizeof(buf), "normal/f%04d.png", i);
      fr.normal_path = buf;
    }
    ds.cameras.push_back(std::move(nominal));
    ds.frames.push_back(std::move(fr));
  }

  // Seeded 80/20 split.
  std::vector<int> ids(cfg.n_views);
  for (int i = 0; i < cfg.n_views; ++i) ids[i] = i;
  Rng shuffle_rng = Rng::keyed(cfg.seed ^ 0xcafe0003ULL, 0);
  for (int i = cfg.n_views - 1; i > 0; --i)
    std::swap(ids[i], ids[shuffle_rng.uniform_int(i + 1)]);
  int n_train = int(cfg.train_fraction * cfg.n_views + 0.5);
  ds.train_ids.assign(ids.begin(), ids.begin() + n_train);
  ds.test_ids.assign(ids.begin() + n_train, ids.end());
  std::sort(ds.train_ids.begin(), ds.train_ids.end());
  std::sort(ds.test_ids.begin(), ds.test_ids.end());
  return ds;
}

void save_dataset(const Dataset& ds, const std::string& dir) {
  fs::create_directories(dir);
  json manifest;
  manifest["version"] = ds.version;

  json cams = json::array();
  for (const auto& c : ds.cameras) {
    json jc = pose_to_json(c.world_to_camera);
    jc["id"] = c.id;
    jc["fx"] = c.fx;
    jc["fy"] = c.fy;
    jc["cx"] = c.cx;
    jc["cy"] = c.cy;
    jc["width"] = c.width;
    jc["height"] = c.height;
    jc["weight"] = c.frame_weight;
    cams.push_back(std::move(jc));
  }
  manifest["cameras"] = std::move(cams);

  json frames = json::array();
  for (const auto& fr : ds.frames) {
    json jf;
    jf["camera"] = fr.camera_id;
    jf["step"] = fr.step;
    jf["rgb"] = fr.rgb_path;
    if (!fr.mask_path.empty()) jf["mask"] = fr.mask_path;
    if (!fr.normal_path.empty()) jf["normal"] = fr.normal_path;
    if (fr.joints) jf["joints"] = *fr.joints;
    frames.push_back(std::move(jf));
  }
  manifest["frames"] = std::move(frames);
  manifest["splits"] = {{"train", ds.train_ids}, {"test", ds.test_ids}};

  if (ds.gt_mesh || ds.gt) {
    json jg;
    if (ds.gt_mesh) jg["mesh"] = "gt/mesh.ply";
    if (ds.gt) jg["joints"] = ds.gt->joints;
    manifest["gt"] = std::move(jg);
  }

  for (const auto& fr : ds.frames) {
    auto write = [&](const std::optional<Image>& img, const std::string& rel, int depth) {
      if (rel.empty()) return;
      fs::path dst = fs::path(dir) / rel;
      fs::create_directories(dst.parent_path());
      if (img) {
        save_png(*img, dst.string(), depth);
      } else {
        fs::path src = fs::path(ds.root) / rel;
        if (!fs::exists(src)) throw IoError("save_dataset: missing source image " + src.string());
        fs::copy_file(src, dst, fs::copy_options::overwrite_existing);
      }
    };
    write(fr.rgb, fr.rgb_path, 8);
    write(fr.mask, fr.mask_path, 8);
    write(fr.normal, fr.normal_path, 16);
  }
  if (ds.gt_mesh) {
    fs::create_directories(fs::path(dir) / "gt");
    save_mesh_ply(*ds.gt_mesh, (fs::path(dir) / "gt/mesh.ply").string());
  }

  std::ofstream os(fs::path(dir) / "manifest.json");
  if (!os) throw IoError("save_dataset: cannot write manifest in " + dir);
  os << manifest.dump(2) << "\n";
}

Dataset load_dataset(const std::string& dir) {
  fs::path root(dir);
  std::ifstream in(root / "manifest.json");
  if (!in) throw IoError("load_dataset: no manifest.json in " + dir);
  json manifest;
  try {
    in >> manifest;
  } catch (const json::exception& e) {
    throw IoError(std::string("load_dataset: malformed manifest: ") + e.what());
  }

  Dataset ds;
  ds.root = dir;
  ds.version = manifest.at("version").get<int>();
  if (ds.version != 1)
    throw IoError("load_dataset: unsupported manifest version " +
                  std::to_string(ds.version));

  for (const auto& jc : manifest.at("cameras")) {
    Camera c;
    c.id = jc.at("id").get<std::string>();
    c.fx = jc.at("fx").get<double>();
    c.fy = jc.at("fy").get<double>();
    c.cx = jc.at("cx").get<double>();
    c.cy = jc.at("cy").get<double>();
    c.width = jc.at("width").get<int>();
    c.height = jc.at("height").get<int>();
    c.frame_weight = jc.value("weight", 1.0);
    c.world_to_camera = pose_from_json(jc);
    ds.cameras.push_back(std::move(c));
  }

  for (const auto& jf : manifest.at("frames")) {
    DatasetFrame fr;
    fr.camera_id = jf.at("camera").get<std::string>();
    fr.step = jf.value("step", 0);
    fr.rgb_path = jf.at("rgb").get<std::string>();
    fr.mask_path = jf.value("mask", "");
    fr.normal_path = jf.value("normal", "");
    if (jf.contains("joints")) fr.joints = jf.at("joints").get<std::vector<double>>();
    for (const std::string& rel : {fr.rgb_path, fr.mask_path, fr.normal_path}) {
      if (rel.empty()) continue;
      if (!fs::exists(root / rel))
        throw IoError("load_dataset: referenced file missing: " + (root / rel).string());
    }
    fr.rgb = load_png((root / fr.rgb_path).string());
    if (!fr.mask_path.empty()) fr.mask = load_png((root / fr.mask_path).string());
    if (!fr.normal_path.empty()) fr.normal = load_png((root / fr.normal_path).string());
    ds.frames.push_back(std::move(fr));
  }

  const auto& splits = manifest.at("splits");
  ds.train_ids = splits.at("train").get<std::vector<int>>();
  ds.test_ids = splits.at("test").get<std::vector<int>>();

  if (manifest.contains("gt")) {
    const auto& jg = manifest.at("gt");
    if (jg.contains("mesh")) {
      fs::path mp = root / jg.at("mesh").get<std::string>();
      if (!fs::exists(mp)) throw IoError("load_dataset: missing gt mesh " + mp.string());
      ds.gt_mesh = load_mesh_ply(mp.string());
    }
    if (jg.contains("joints")) {
      DatasetGroundTruth gt;
      gt.joints = jg.at("joints").get<std::vector<std::vector<double>>>();
      ds.gt = std::move(gt);
    }
  }
  return ds;
}

std::vector<Vec3> bake_vertex_colors(const TriangleMesh& mesh, const SurfelSet& surfels,
                                     BakeStats* stats) {
  auto gaussians = bind_to_world(mesh, surfels);
  std::vector<std::vector<int>> face_gaussians(mesh.face_count());
  for (int g = 0; g < surfels.size(); ++g) face_gaussians[surfels.face_id[g]].push_back(g);

  std::vector<std::vector<int>> vertex_faces(mesh.vertex_count());
  for (int f = 0; f < mesh.face_count(); ++f)
    for (int k = 0; k < 3; ++k) vertex_faces[mesh.faces[f][k]].push_back(f);

  constexpr double kC0 = 0.28209479177387814;
  std::vector<Vec3> colors(mesh.vertex_count());
  int fallbacks = 0;
  for (int v = 0; v < mesh.vertex_count(); ++v) {
    double h = 0.0;
    for (int nb : mesh.adjacency[v]) h += norm(mesh.vertices[v] - mesh.vertices[nb]);
    h /= std::max<size_t>(1, mesh.adjacency[v].size());

    Vec3 acc;
    double wsum = 0.0;
    for (int f : vertex_faces[v]) {
      for (int g : face_gaussians[f]) {
        const WorldGaussian& wg = gaussians[g];
        double w = wg.opacity *
                   std::exp(-norm_sq(wg.mean - mesh.vertices[v]) / std::max(h * h, 1e-18));
        Vec3 c{std::clamp(kC0 * wg.sh[0] + 0.5, 0.0, 1.0),
               std::clamp(kC0 * wg.sh[1] + 0.5, 0.0, 1.0),
               std::clamp(kC0 * wg.sh[2] + 0.5, 0.0, 1.0)};
        acc += w * c;
        wsum += w;
      }
    }
    if (wsum > 0.0) {
      colors[v] = acc / wsum;
    } else {
      colors[v] = {0.5, 0.5, 0.5};
      ++fallbacks;
    }
  }
  if (stats) stats->fallback_vertices = fallbacks;
  return colors;
}

void export_asset(const TriangleMesh& mesh, const SurfelSet& surfels, const std::string& dir) {
  fs::create_directories(dir);
  auto colors = bake_vertex_colors(mesh, surfels);
  save_mesh_ply(mesh, (fs::path(dir) / "mesh.ply").string(), &colors);
  auto gaussians = bind_to_world(mesh, surfels);
  export_splat_ply(gaussians, (fs::path(dir) / "splat.ply").string(), surfels.fixed_opacity);
}

SceneAsset make_ellipsoid_asset(Vec3 semi_axes, uint64_t seed, int sh_degree,
                                double gaussians_per_face, int subdivisions) {
  TriangleMesh unit = make_icosphere(subdivisions, 1.0);
  for (auto& v : unit.vertices) v = hadamard(v, semi_axes);
  SceneAsset asset;
  asset.mesh = make_mesh(std::move(unit.vertices), std::move(unit.faces));
  asset.surfels = build_surfels(asset.mesh, seed, sh_degree, gaussians_per_face, {});
  paint_surfels(asset.surfels, asset.mesh, seed);
  return asset;
}

SceneAsset make_bumpy_sphere_asset(double radius, double bump_amplitude, uint64_t seed,
                                   int sh_degree, double gaussians_per_face, int subdivisions) {
  TriangleMesh unit = make_icosphere(subdivisions, 1.0);
  Rng rng = Rng::keyed(seed ^ 0xb0b5ULL, 7);
  Vec3 bump_dir[3];
  double bump_amp[3], bump_width[3];
  for (int k = 0; k < 3; ++k) {
    bump_dir[k] = normalized({rng.normal(), rng.normal(), rng.normal()});
    bump_amp[k] = rng.uniform(0.5, 1.0) * (k == 1 ? -1.0 : 1.0);
    bump_width[k] = rng.uniform(0.45, 0.8);
  }
  for (auto& v : unit.vertices) {
    Vec3 d = normalized(v);
    double r = 1.0;
    for (int k = 0; k < 3; ++k) {
      double u = norm_sq(d - bump_dir[k]) / (bump_width[k] * bump_width[k]);
      r += bump_amplitude * bump_amp[k] * std::exp(-u);
    }
    v = radius * r * d;
  }
  SceneAsset asset;
  asset.mesh = make_mesh(std::move(unit.vertices), std::move(unit.faces));
  asset.surfels = build_surfels(asset.mesh, seed, sh_degree, gaussians_per_face, {});
  paint_surfels(asset.surfels, asset.mesh, seed);
  return asset;
}

namespace {

// Stretched icosphere between two points, in the owning body's frame.
void append_capsule(TriangleMesh& target, Vec3 from, Vec3 to, double min_radius) {
  Vec3 axis = to - from;
  double len = norm(axis);
  Vec3 mid = 0.5 * (from + to);
  double radius = std::clamp(0.22 * len, 0.015, 0.06);
  if (len < 0.02) {
    len = 0.05;
    axis = {0, 0, len};
    radius = std::max(min_radius, 0.02);
  }
  Vec3 a = axis / len;
  Vec3 helper = std::abs(a.z) < 0.9 ? Vec3{0, 0, 1} : Vec3{1, 0, 0};
  Vec3 b = normalized(cross(a, helper));
  Vec3 c = cross(a, b);

  TriangleMesh unit = make_icosphere(1, 1.0);
  int base = int(target.vertices.size());
  for (const auto& v : unit.vertices)
    target.vertices.push_back(mid + (0.55 * len * v.x) * a + (radius * v.y) * b +
                              (radius * v.z) * c);
  for (const auto& f : unit.faces)
    target.faces.push_back({f[0] + base, f[1] + base, f[2] + base});
}

}  // namespace

RobotScene make_robot_scene(const KinematicChain& chain, uint64_t seed,
                            double gaussians_per_face) {
  RobotScene scene;
  scene.chain = chain;
  scene.body_assets.resize(chain.bodies.size());

  for (size_t b = 0; b < chain.bodies.size(); ++b) {
    TriangleMesh raw;
    bool terminal = true;
    for (size_t c = 0; c < chain.bodies.size(); ++c) {
      if (chain.bodies[c].parent == int(b)) {
        append_capsule(raw, Vec3{}, chain.bodies[c].local.t, 0.02);
        terminal = false;
      }
    }
    if (terminal) {
      for (const auto& t : chain.tcps)
        if (t.body == int(b)) append_capsule(raw, Vec3{}, t.local, 0.015);
    }
    if (raw.vertices.empty()) continue;

    SceneAsset& asset = scene.body_assets[b];
    asset.mesh = make_mesh(std::move(raw.vertices), std::move(raw.faces));
    asset.surfels = build_surfels(asset.mesh, seed ^ (uint64_t(b) << 32), 0,
                                  gaussians_per_face, {});

    // Strong per-link texture so photometric and SSIM terms carry pose signal.
    auto gaussians = bind_to_world(asset.mesh, asset.surfels);
    Rng body_rng = Rng::keyed(seed ^ 0xa12b00bULL, b);
    Vec3 base{body_rng.uniform(0.25, 0.85), body_rng.uniform(0.25, 0.85),
              body_rng.uniform(0.25, 0.85)};
    Vec3 stripe_dir = normalized({body_rng.normal(), body_rng.normal(), body_rng.normal()});
    double freq = body_rng.uniform(120.0, 220.0);
    constexpr double kC0 = 0.28209479177387814;
    for (int g = 0; g < asset.surfels.size(); ++g) {
      Rng rng = Rng::keyed(seed ^ 0x5712e5ULL ^ (uint64_t(b) << 40), uint64_t(g));
      double stripe = 0.5 + 0.5 * std::sin(freq * dot(gaussians[g].mean, stripe_dir));
      double* sh = asset.surfels.sh_at(g);
      for (int c = 0; c < 3; ++c) {
        double v = base[c] * (0.45 + 0.55 * stripe) + 0.12 * rng.normal();
        sh[c] = (std::clamp(v, 0.05, 0.95) - 0.5) / kC0;
      }
    }
  }
  return scene;
}

PosedRobot pose_robot(const RobotScene& scene, const FkResult& fk) {
  PosedRobot out;
  out.body_ranges.assign(scene.body_assets.size(), {0, 0});
  for (size_t b = 0; b < scene.body_assets.size(); ++b) {
    const SceneAsset& asset = scene.body_assets[b];
    int begin = int(out.gaussians.size());
    if (!asset.mesh.vertices.empty()) {
      auto locals = bind_to_world(asset.mesh, asset.surfels);
      auto posed = transform_gaussians(fk.body_poses[b], locals);
      out.gaussians.insert(out.gaussians.end(), posed.begin(), posed.end());
    }
    out.body_ranges[b] = {begin, int(out.gaussians.size())};
  }
  return out;
}

Dataset generate_robot_dataset(const RobotScene& scene, const RobotGenConfig& cfg,
                               const RasterConfig& raster) {
  const KinematicChain& chain = scene.chain;
  if (cfg.n_steps < 1) throw BoundError("generate_robot_dataset: need at least one step");
  std::vector<double> home = cfg.home;
  if (home.empty()) home.assign(chain.joint_count, 0.0);
  if (int(home.size()) != chain.joint_count)
    throw ShapeError("generate_robot_dataset: home pose size mismatch");

  Dataset ds;
  DatasetGroundTruth gt;

  for (int t = 0; t < cfg.n_steps; ++t) {
    JointState q;
    q.angles.resize(chain.joint_count);
    Rng rng = Rng::keyed(cfg.seed ^ 0x70b07001ULL, uint64_t(t));
    for (int j = 0; j < chain.joint_count; ++j)
      q.angles[j] = home[j] + rng.uniform(-cfg.range, cfg.range);
    gt.joints.push_back(q.angles);

    JointState noisy =
        add_joint_noise(q, cfg.joint_sigma, hash_combine(cfg.seed ^ 0x70b07002ULL, t));

    FkResult fk = forward_kinematics(chain, q);
    PosedRobot posed = pose_robot(scene, fk);

    for (size_t c = 0; c < fk.cameras.size(); ++c) {
      RenderOutput r = render(posed.gaussians, fk.cameras[c], Modality::kRgb, {}, raster);
      DatasetFrame fr;
      fr.camera_id = fk.cameras[c].id;
      fr.step = t;
      fr.joints = noisy.angles;
      fr.rgb = std::move(r.color);
      char buf[48];
      std::snprintf(buf, sizeof(buf), "rgb/s%03d_%s.png", t, fk.cameras[c].id.c_str());
      fr.rgb_path = buf;
      ds.frames.push_back(std::move(fr));
      if (t == 0) ds.cameras.push_back(fk.cameras[c]);
    }
  }
  ds.gt = std::move(gt);
  ds.train_ids.resize(ds.frames.size());
  for (size_t i = 0; i < ds.frames.size(); ++i) ds.train_ids[i] = int(i);
  return ds;
}

}  // namespace resim
