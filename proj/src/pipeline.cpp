#include "resim/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "resim/error.hpp"
#include "resim/eval.hpp"
#include "resim/rng.hpp"

namespace resim {

namespace {

using nlohmann::json;

std::span<double> span_of(std::vector<Vec3>& v) {
  return {reinterpret_cast<double*>(v.data()), v.size() * 3};
}
std::span<const double> span_of(const std::vector<Vec3>& v) {
  return {reinterpret_cast<const double*>(v.data()), v.size() * 3};
}
std::span<double> span_of(std::vector<std::array<double, 3>>& v) {
  return {reinterpret_cast<double*>(v.data()), v.size() * 3};
}
std::span<const double> span_of(const std::vector<std::array<double, 3>>& v) {
  return {reinterpret_cast<const double*>(v.data()), v.size() * 3};
}
std::span<double> span_of(std::vector<std::array<double, 2>>& v) {
  return {reinterpret_cast<double*>(v.data()), v.size() * 2};
}
std::span<const double> span_of(const std::vector<std::array<double, 2>>& v) {
  return {reinterpret_cast<const double*>(v.data()), v.size() * 2};
}

double logit(double p) { return std::log(p / (1.0 - p)); }

// Initial surfel set on the (undeformed) initialization sphere.
SurfelSet init_surfels(const TriangleMesh& mesh, const ReconstructConfig& cfg) {
  auto counts = allocate_gaussians(mesh, cfg.gaussians_per_face, cfg.seed);
  auto areas = face_areas(mesh);
  SurfelSet s;
  s.sh_degree = cfg.sh_degree;
  s.fixed_opacity = cfg.opacity_clamped;
  s.clamp_normal_scale = cfg.surfel_clamp;
  const int nc = s.coeff_count();
  const double logit0 = cfg.opacity_clamped ? 0.0 : logit(cfg.init_opacity);
  for (int f = 0; f < mesh.face_count(); ++f) {
    Rng rng = Rng::keyed(cfg.seed ^ 0x1417a11cULL, uint64_t(f));
    double sigma0 = 0.6 * std::sqrt(areas[f] / std::max(1, counts[f]));
    double ls = std::log(sigma0);
    for (int k = 0; k < counts[f]; ++k) {
      s.face_id.push_back(f);
      s.bary_logits.push_back({0.8 * rng.normal(), 0.8 * rng.normal(), 0.8 * rng.normal()});
      s.tangent_log_scales.push_back({ls, ls});
      s.opacity_logits.push_back(logit0);
      for (int c = 0; c < nc * 3; ++c) s.sh.push_back(0.0);
    }
  }
  if (!s.clamp_normal_scale) {
    // Ablation: the normal axis starts as thick as the tangent axes.
    s.normal_log_scales.resize(s.size());
    for (int g = 0; g < s.size(); ++g) s.normal_log_scales[g] = s.tangent_log_scales[g][0];
  }
  return s;
}

struct FrameLoss {
  TotalLoss tl;
  std::vector<Modality> mods;
  std::vector<Vec3> bgs;
  RenderBundle bundle;
  Image mask_1ch;       // extracted channel 0 of the mask render
  Image mask_cot_3ch;   // cotangent lifted back to 3 channels
  int rgb_idx = -1, mask_idx = -1, normal_idx = -1;
};

// Renders the modalities demanded by the active weights and evaluates the
// aggregate loss for one frame.
FrameLoss frame_forward(std::span<const WorldGaussian> gaussians, const Camera& cam,
                        const Observation& obs, const ReconstructConfig& cfg,
                        const TriangleMesh* mesh_for_reg, const Image* smask_target) {
  FrameLoss fl;
  if (cfg.weights.photo > 0.0) {
    fl.rgb_idx = int(fl.mods.size());
    fl.mods.push_back(Modality::kRgb);
    fl.bgs.push_back(cfg.background);
  }
  if ((cfg.weights.mask > 0.0 || cfg.weights.smask > 0.0) && obs.mask) {
    fl.mask_idx = int(fl.mods.size());
    fl.mods.push_back(Modality::kMask);
    fl.bgs.push_back(Vec3{});
  }
  if (cfg.weights.normal > 0.0 && obs.normal_map) {
    fl.normal_idx = int(fl.mods.size());
    fl.mods.push_back(Modality::kNormals);
    fl.bgs.push_back(Vec3{});
  }

  fl.bundle = render_bundle(gaussians, cam, fl.mods, fl.bgs, cfg.raster);

  FrameRender fr;
  if (fl.rgb_idx >= 0) fr.rgb = &fl.bundle.colors[fl.rgb_idx];
  if (fl.mask_idx >= 0) {
    const Image& m3 = fl.bundle.colors[fl.mask_idx];
    fl.mask_1ch = Image(m3.width, m3.height, 1);
    for (int y = 0; y < m3.height; ++y)
      for (int x = 0; x < m3.width; ++x) fl.mask_1ch.at(x, y, 0) = m3.at(x, y, 0);
    fr.mask = &fl.mask_1ch;
  }
  if (fl.normal_idx >= 0) fr.normal = &fl.bundle.colors[fl.normal_idx];

  const Observation* obs_ptr = &obs;
  const Image* targets[1] = {smask_target};
  fl.tl = total_loss(std::span<const FrameRender>(&fr, 1),
                     std::span<const Observation* const>(&obs_ptr, 1), cfg.weights,
                     mesh_for_reg, cfg.smask_tau, cfg.smask_literal,
                     std::span<const Image* const>(targets, 1));
  return fl;
}

RasterGrads frame_backward(std::span<const WorldGaussian> gaussians, const Camera& cam,
                           const ReconstructConfig& cfg, FrameLoss& fl) {
  std::vector<const Image*> cots(fl.mods.size(), nullptr);
  if (fl.rgb_idx >= 0 && fl.tl.frames[0].d_rgb.size() > 0)
    cots[fl.rgb_idx] = &fl.tl.frames[0].d_rgb;
  if (fl.mask_idx >= 0 && fl.tl.frames[0].d_mask.size() > 0) {
    const Image& m1 = fl.tl.frames[0].d_mask;
    fl.mask_cot_3ch = Image(m1.width, m1.height, 3);
    for (int y = 0; y < m1.height; ++y)
      for (int x = 0; x < m1.width; ++x) fl.mask_cot_3ch.at(x, y, 0) = m1.at(x, y, 0);
    cots[fl.mask_idx] = &fl.mask_cot_3ch;
  }
  if (fl.normal_idx >= 0 && fl.tl.frames[0].d_normal.size() > 0)
    cots[fl.normal_idx] = &fl.tl.frames[0].d_normal;
  return render_bundle_vjp(gaussians, cam, fl.mods, fl.bgs, cfg.raster, cots, fl.bundle);
}

}  // namespace

ReconstructResult reconstruct(const Dataset& ds, const ReconstructConfig& cfg) {
  if (ds.train_ids.empty()) throw ConfigError("reconstruct: dataset has no training frames");

  // Preload observations and static soft-mask targets.
  std::vector<Observation> observations(ds.frames.size());
  std::vector<Image> smask_targets(ds.frames.size());
  for (int id : ds.train_ids) {
    observations[id] = make_observation(ds, id);
    if (cfg.weights.smask > 0.0 && observations[id].mask)
      smask_targets[id] =
          soft_mask_target(*observations[id].mask, cfg.smask_tau, cfg.smask_literal);
  }

  TriangleMesh base = make_icosphere(cfg.init_subdivisions, cfg.init_radius, cfg.init_center);

  SceneParams params;
  params.deformation = MeshDeformation::zeros(base.vertex_count());
  params.surfels = init_surfels(base, cfg);
  params.camera_rot_deltas.assign(ds.cameras.size(), Vec3{});

  AdamState adam;
  adam.add_group("vertex_deltas", base.vertex_count() * 3, cfg.lr_vertex);
  adam.add_group("translation", 3, cfg.lr_translation);
  adam.add_group("bary_logits", params.surfels.bary_logits.size() * 3, cfg.lr_gaussians);
  adam.add_group("log_scales", params.surfels.tangent_log_scales.size() * 2, cfg.lr_gaussians);
  if (!cfg.surfel_clamp)
    adam.add_group("normal_log_scales", params.surfels.normal_log_scales.size(),
                   cfg.lr_gaussians);
  adam.add_group("sh", params.surfels.sh.size(), cfg.lr_gaussians);
  if (!cfg.opacity_clamped)
    adam.add_group("opacity", params.surfels.opacity_logits.size(), cfg.lr_gaussians);
  adam.add_group("camera_rot", params.camera_rot_deltas.size() * 3, cfg.lr_camera);
  for (const auto& name : cfg.frozen) {
    auto it = adam.groups.find(name);
    if (it == adam.groups.end()) throw ConfigError("reconstruct: unknown frozen group " + name);
    it->second.frozen = true;
  }

  // Fixed eval subset for best-iterate tracking.
  std::vector<int> eval_ids(ds.train_ids.begin(),
                            ds.train_ids.begin() + std::min<size_t>(8, ds.train_ids.size()));

  auto evaluate = [&](int step) -> LossRecord {
    TriangleMesh deformed = apply_deformation(base, params.deformation);
    auto gaussians = bind_to_world(deformed, params.surfels);
    LossRecord rec;
    rec.step = step;
    rec.is_eval = true;
    for (int id : eval_ids) {
      int ci = camera_index(ds, ds.frames[id].camera_id);
      Camera cam = apply_rotation_delta(ds.cameras[ci], params.camera_rot_deltas[ci]);
      FrameLoss fl = frame_forward(gaussians, cam, observations[id], cfg, nullptr,
                                   smask_targets[id].size() ? &smask_targets[id] : nullptr);
      rec.photo += fl.tl.photo;
      rec.mask += fl.tl.mask;
      rec.smask += fl.tl.smask;
      rec.normal += fl.tl.normal;
    }
    double n = double(eval_ids.size());
    rec.photo /= n;
    rec.mask /= n;
    rec.smask /= n;
    rec.normal /= n;
    TotalLoss reg =
        total_loss({}, {}, cfg.weights, &deformed, cfg.smask_tau, cfg.smask_literal);
    rec.laplacian = reg.laplacian;
    rec.edge = reg.edge;
    rec.total = rec.photo + rec.mask + rec.smask + rec.normal + rec.laplacian + rec.edge;
    return rec;
  };

  ReconstructResult result;
  result.base_mesh = base;

  LossRecord initial = evaluate(0);
  if (!std::isfinite(initial.total))
    throw NumericalError("reconstruct: non-finite loss at step 0");
  result.history.push_back(initial);
  result.initial_eval_loss = initial.total;
  result.best_eval_loss = initial.total;
  result.best_step = 0;
  SceneParams best = params;

  Rng sampler = Rng::keyed(cfg.seed ^ 0x0f7a3e21ULL, 99);
  bool lr_halved = false;

  for (int step = 1; step <= cfg.steps; ++step) {
    TriangleMesh deformed = apply_deformation(base, params.deformation);
    auto gaussians = bind_to_world(deformed, params.surfels);

    int fid = ds.train_ids[sampler.uniform_int(int(ds.train_ids.size()))];
    int ci = camera_index(ds, ds.frames[fid].camera_id);
    Camera cam = apply_rotation_delta(ds.cameras[ci], params.camera_rot_deltas[ci]);

    FrameLoss fl = frame_forward(gaussians, cam, observations[fid], cfg, &deformed,
                                 smask_targets[fid].size() ? &smask_targets[fid] : nullptr);
    if (!std::isfinite(fl.tl.total))
      throw NumericalError("reconstruct: non-finite loss at step " + std::to_string(step));

    RasterGrads rg = frame_backward(gaussians, cam, cfg, fl);
    BindGrads bg = bind_to_world_vjp(deformed, params.surfels, rg.gaussians);

    std::vector<Vec3> vertex_grad(base.vertex_count());
    Vec3 translation_grad;
    for (int i = 0; i < base.vertex_count(); ++i) {
      vertex_grad[i] = bg.d_vertices[i];
      if (!fl.tl.d_vertices.empty()) vertex_grad[i] += fl.tl.d_vertices[i];
      translation_grad += vertex_grad[i];
    }
    double tgrad[3] = {translation_grad.x, translation_grad.y, translation_grad.z};

    std::vector<Vec3> camera_grads(ds.cameras.size());
    camera_grads[ci] =
        rotation_delta_vjp(ds.cameras[ci], params.camera_rot_deltas[ci], rg.camera.rotation,
                           rg.camera.translation);

    std::vector<ParamGroupRef> groups;
    groups.push_back({"vertex_deltas", span_of(params.deformation.vertex_deltas),
                      span_of(vertex_grad)});
    groups.push_back({"translation",
                      std::span<double>(&params.deformation.global_translation.x, 3),
                      std::span<const double>(tgrad, 3)});
    groups.push_back({"bary_logits", span_of(params.surfels.bary_logits),
                      span_of(bg.d_bary_logits)});
    groups.push_back({"log_scales", span_of(params.surfels.tangent_log_scales),
                      span_of(bg.d_tangent_log_scales)});
    if (!cfg.surfel_clamp)
      groups.push_back({"normal_log_scales", params.surfels.normal_log_scales,
                        bg.d_normal_log_scales});
    groups.push_back({"sh", params.surfels.sh, bg.d_sh});
    if (!cfg.opacity_clamped)
      groups.push_back({"opacity", params.surfels.opacity_logits, bg.d_opacity_logits});
    groups.push_back({"camera_rot", span_of(params.camera_rot_deltas), span_of(camera_grads)});
    adam_step(adam, groups);

    bool is_eval_step = (cfg.eval_every > 0 && step % cfg.eval_every == 0) || step == cfg.steps;
    if (is_eval_step) {
      LossRecord rec = evaluate(step);
      result.history.push_back(rec);
      if (rec.total < result.best_eval_loss) {
        result.best_eval_loss = rec.total;
        result.best_step = step;
        best = params;
      }
      if (!lr_halved && rec.total > cfg.divergence_factor * result.initial_eval_loss) {
        adam.scale_learning_rates(0.5);
        lr_halved = true;
        ++result.divergence_events;
      }
    }
  }

  result.params = std::move(best);
  result.mesh = apply_deformation(base, result.params.deformation);
  return result;
}

CalibrateResult calibrate(const Dataset& ds, const RobotScene& scene,
                          const CalibrateConfig& cfg) {
  const KinematicChain& chain = scene.chain;
  if (!ds.gt || ds.gt->joints.empty())
    throw ConfigError("calibrate: dataset carries no ground-truth joints");
  if (chain.tcps.empty()) throw ConfigError("calibrate: chain defines no TCP sites");

  // Group frames by time step; frames of one step share a joint vector.
  int n_steps = 0;
  for (const auto& fr : ds.frames) n_steps = std::max(n_steps, fr.step + 1);
  std::vector<std::vector<int>> step_frames(n_steps);
  std::vector<std::vector<double>> q_noisy(n_steps);
  for (size_t i = 0; i < ds.frames.size(); ++i) {
    const DatasetFrame& fr = ds.frames[i];
    if (!fr.joints) throw ConfigError("calibrate: frame without joint state");
    step_frames[fr.step].push_back(int(i));
    q_noisy[fr.step] = *fr.joints;
  }
  if (int(ds.gt->joints.size()) != n_steps)
    throw ConfigError("calibrate: ground-truth joint count mismatch");

  std::vector<Observation> observations(ds.frames.size());
  for (size_t i = 0; i < ds.frames.size(); ++i) observations[i] = make_observation(ds, int(i));

  // Chain camera lookup by id; dataset frames reference these.
  auto chain_camera_of = [&](const std::string& id) {
    for (size_t c = 0; c < chain.cameras.size(); ++c)
      if (chain.cameras[c].intrinsics.id == id) return int(c);
    throw ConfigError("calibrate: frame camera " + id + " not in chain");
  };

  RobotScene work = scene;  // colors are optimized in place

  const int nj = chain.joint_count;
  std::vector<double> joint_offsets(size_t(n_steps) * nj, 0.0);
  std::vector<Vec3> camera_deltas(chain.cameras.size());
  std::vector<bool> delta_enabled(chain.cameras.size());
  for (size_t c = 0; c < chain.cameras.size(); ++c)
    delta_enabled[c] = chain.cameras[c].optimize_rotation && chain.cameras[c].body < 0;

  AdamState adam_color;
  for (size_t b = 0; b < work.body_assets.size(); ++b)
    if (work.body_assets[b].surfels.size() > 0)
      adam_color.add_group("colors/" + std::to_string(b), work.body_assets[b].surfels.sh.size(),
                           cfg.lr_colors);
  AdamState adam_pose;
  adam_pose.add_group("joints", joint_offsets.size(), cfg.lr_joints);
  adam_pose.add_group("camera_rot", camera_deltas.size() * 3, cfg.lr_camera);

  auto q_est_of = [&](int t) {
    JointState q;
    q.angles = q_noisy[t];
    for (int j = 0; j < nj; ++j) q.angles[j] += joint_offsets[size_t(t) * nj + j];
    return q;
  };

  auto mean_tcp_error = [&]() {
    double sum = 0.0;
    for (int t = 0; t < n_steps; ++t) {
      JointState gt{ds.gt->joints[t]};
      sum += tcp_error(chain, q_est_of(t), gt);
    }
    return sum / double(n_steps);
  };

  CalibrateResult result;
  result.initial_tcp_mm = mean_tcp_error();
  result.tcp_history_mm.push_back(result.initial_tcp_mm);
  result.best_tcp_mm = result.initial_tcp_mm;
  result.best_iteration = 0;
  std::vector<double> best_offsets = joint_offsets;
  std::vector<Vec3> best_deltas = camera_deltas;

  Rng sampler = Rng::keyed(cfg.seed ^ 0xca11b7a7ULL, 3);
  const Modality rgb_mod[1] = {Modality::kRgb};
  const Vec3 bg[1] = {cfg.background};

  for (int iter = 1; iter <= cfg.iterations; ++iter) {
    int t = sampler.uniform_int(n_steps);
    JointState q = q_est_of(t);
    FkResult fk = forward_kinematics(chain, q);

    auto camera_for_frame = [&](int fi) {
      int cc = chain_camera_of(ds.frames[fi].camera_id);
      Camera cam = fk.cameras[cc];
      if (delta_enabled[cc]) cam = apply_rotation_delta(fk.cameras[cc], camera_deltas[cc]);
      return std::make_pair(cam, cc);
    };

    // Phase A: colors against the L1 photometric loss, pose held fixed.
    for (int cs = 0; cs < cfg.color_steps; ++cs) {
      PosedRobot posed = pose_robot(work, fk);
      std::vector<std::vector<double>> color_grads(work.body_assets.size());
      for (size_t b = 0; b < work.body_assets.size(); ++b)
        color_grads[b].assign(work.body_assets[b].surfels.sh.size(), 0.0);

      const double inv_f = 1.0 / double(step_frames[t].size());
      for (int fi : step_frames[t]) {
        auto [cam, cc] = camera_for_frame(fi);
        RenderBundle bundle = render_bundle(posed.gaussians, cam, rgb_mod, bg, cfg.raster);
        LossValue lv = photometric_l1(bundle.colors[0], observations[fi].rgb, nullptr);
        if (!std::isfinite(lv.value))
          throw NumericalError("calibrate: non-finite color loss at iteration " +
                               std::to_string(iter));
        for (auto& v : lv.d_pred.data) v *= inv_f;
        const Image* cots[1] = {&lv.d_pred};
        RasterGrads rg =
            render_bundle_vjp(posed.gaussians, cam, rgb_mod, bg, cfg.raster, cots, bundle);
        for (size_t b = 0; b < work.body_assets.size(); ++b) {
          auto [begin, end] = posed.body_ranges[b];
          const int nsh = work.body_assets[b].surfels.coeff_count() * 3;
          for (int g = begin; g < end; ++g)
            for (int k = 0; k < nsh; ++k)
              color_grads[b][size_t(g - begin) * nsh + k] += rg.gaussians[g].d_sh[k];
        }
      }
      std::vector<ParamGroupRef> groups;
      for (size_t b = 0; b < work.body_assets.size(); ++b)
        if (work.body_assets[b].surfels.size() > 0)
          groups.push_back({"colors/" + std::to_string(b), work.body_assets[b].surfels.sh,
                            color_grads[b]});
      adam_step(adam_color, groups);
    }

    // Phase B: joints + fixed-camera rotations against weighted SSIM.
    for (int ps = 0; ps < cfg.pose_steps; ++ps) {
      PosedRobot posed = pose_robot(work, fk);
      std::vector<std::vector<WorldGaussian>> locals(work.body_assets.size());
      for (size_t b = 0; b < work.body_assets.size(); ++b)
        if (work.body_assets[b].surfels.size() > 0)
          locals[b] = bind_to_world(work.body_assets[b].mesh, work.body_assets[b].surfels);

      FkCotangent fk_cot;
      fk_cot.cameras.assign(chain.cameras.size(), {});
      fk_cot.bodies.assign(chain.bodies.size(), {});
      std::vector<Vec3> delta_grads(chain.cameras.size());

      double wsum = 0.0;
      for (int fi : step_frames[t])
        wsum += observations[fi].weight;

      for (int fi : step_frames[t]) {
        auto [cam, cc] = camera_for_frame(fi);
        RenderBundle bundle = render_bundle(posed.gaussians, cam, rgb_mod, bg, cfg.raster);
        auto [s, ds_dpred] = ssim_with_grad(bundle.colors[0], observations[fi].rgb);
        if (!std::isfinite(s))
          throw NumericalError("calibrate: non-finite SSIM at iteration " +
                               std::to_string(iter));
        // Maximize the weighted average SSIM: descend on 1 - avg.
        double scale = -observations[fi].weight / wsum;
        for (auto& v : ds_dpred.data) v *= scale;
        const Image* cots[1] = {&ds_dpred};
        RasterGrads rg =
            render_bundle_vjp(posed.gaussians, cam, rgb_mod, bg, cfg.raster, cots, bundle);

        for (size_t b = 0; b < work.body_assets.size(); ++b) {
          auto [begin, end] = posed.body_ranges[b];
          if (begin == end) continue;
          std::vector<GaussianCotangent> d_local(end - begin);
          PoseTangent tangent = transform_gaussians_vjp(
              fk.body_poses[b], locals[b],
              std::span<const GaussianCotangent>(rg.gaussians.data() + begin, end - begin),
              d_local);
          fk_cot.bodies[b].rotation += tangent.rotation;
          fk_cot.bodies[b].translation += tangent.translation;
        }
        if (delta_enabled[cc]) {
          delta_grads[cc] += rotation_delta_vjp(fk.cameras[cc], camera_deltas[cc],
                                                rg.camera.rotation, rg.camera.translation);
        } else {
          fk_cot.cameras[cc].rotation += rg.camera.rotation;
          fk_cot.cameras[cc].translation += rg.camera.translation;
        }
      }

      std::vector<double> jg = fk_vjp(chain, q, fk_cot);
      std::vector<double> joint_grads(joint_offsets.size(), 0.0);
      for (int j = 0; j < nj; ++j) joint_grads[size_t(t) * nj + j] = jg[j];

      std::vector<ParamGroupRef> groups;
      groups.push_back({"joints", joint_offsets, joint_grads});
      groups.push_back({"camera_rot", span_of(camera_deltas), span_of(delta_grads)});
      adam_step(adam_pose, groups);

      // Pose moved; refresh for a possible next pose step.
      q = q_est_of(t);
      fk = forward_kinematics(chain, q);
    }

    double err = mean_tcp_error();
    result.tcp_history_mm.push_back(err);
    if (err < result.best_tcp_mm) {
      result.best_tcp_mm = err;
      result.best_iteration = iter;
      best_offsets = joint_offsets;
      best_deltas = camera_deltas;
    }
  }

  joint_offsets = best_offsets;
  result.camera_deltas = best_deltas;
  result.q_est.resize(n_steps);
  for (int t = 0; t < n_steps; ++t) result.q_est[t] = q_est_of(t).angles;
  return result;
}

namespace {

json mesh_to_json(const TriangleMesh& mesh) {
  json j;
  json vs = json::array();
  for (const auto& v : mesh.vertices) {
    vs.push_back(v.x);
    vs.push_back(v.y);
    vs.push_back(v.z);
  }
  json fs = json::array();
  for (const auto& f : mesh.faces) {
    fs.push_back(f[0]);
    fs.push_back(f[1]);
    fs.push_back(f[2]);
  }
  j["vertices"] = std::move(vs);
  j["faces"] = std::move(fs);
  return j;
}

TriangleMesh mesh_from_json(const json& j) {
  const auto& vs = j.at("vertices");
  const auto& fs = j.at("faces");
  std::vector<Vec3> vertices(vs.size() / 3);
  for (size_t i = 0; i < vertices.size(); ++i)
    vertices[i] = {vs.at(3 * i).get<double>(), vs.at(3 * i + 1).get<double>(),
                   vs.at(3 * i + 2).get<double>()};
  std::vector<std::array<int, 3>> faces(fs.size() / 3);
  for (size_t i = 0; i < faces.size(); ++i)
    faces[i] = {fs.at(3 * i).get<int>(), fs.at(3 * i + 1).get<int>(),
                fs.at(3 * i + 2).get<int>()};
  return make_mesh(std::move(vertices), std::move(faces));
}

}  // namespace

void save_scene_state(const SceneState& state, const std::string& path) {
  json j;
  j["version"] = 1;
  j["mesh"] = mesh_to_json(state.base_mesh);
  json d;
  json deltas = json::array();
  for (const auto& v : state.deformation.vertex_deltas) {
    deltas.push_back(v.x);
    deltas.push_back(v.y);
    deltas.push_back(v.z);
  }
  d["vertex_deltas"] = std::move(deltas);
  d["translation"] = {state.deformation.global_translation.x,
                      state.deformation.global_translation.y,
                      state.deformation.global_translation.z};
  j["deformation"] = std::move(d);

  const SurfelSet& s = state.surfels;
  json js;
  js["face_id"] = s.face_id;
  json bl = json::array();
  for (const auto& b : s.bary_logits)
    for (double v : b) bl.push_back(v);
  js["bary_logits"] = std::move(bl);
  json ls = json::array();
  for (const auto& b : s.tangent_log_scales)
    for (double v : b) ls.push_back(v);
  js["tangent_log_scales"] = std::move(ls);
  js["normal_log_scales"] = s.normal_log_scales;
  js["sh_degree"] = s.sh_degree;
  js["sh"] = s.sh;
  js["opacity_logits"] = s.opacity_logits;
  js["fixed_opacity"] = s.fixed_opacity;
  js["clamp_normal_scale"] = s.clamp_normal_scale;
  j["surfels"] = std::move(js);

  json cd = json::array();
  for (const auto& v : state.camera_deltas) {
    cd.push_back(v.x);
    cd.push_back(v.y);
    cd.push_back(v.z);
  }
  j["camera_deltas"] = std::move(cd);

  std::ofstream os(path);
  if (!os) throw IoError("save_scene_state: cannot write " + path);
  os << j.dump() << "\n";
}

SceneState load_scene_state(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("load_scene_state: cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw IoError(std::string("load_scene_state: malformed json: ") + e.what());
  }
  if (j.value("version", 0) != 1) throw IoError("load_scene_state: unsupported version");

  SceneState state;
  state.base_mesh = mesh_from_json(j.at("mesh"));
  const auto& d = j.at("deformation");
  const auto& deltas = d.at("vertex_deltas");
  state.deformation.vertex_deltas.resize(deltas.size() / 3);
  for (size_t i = 0; i < state.deformation.vertex_deltas.size(); ++i)
    state.deformation.vertex_deltas[i] = {deltas.at(3 * i).get<double>(),
                                          deltas.at(3 * i + 1).get<double>(),
                                          deltas.at(3 * i + 2).get<double>()};
  const auto& tr = d.at("translation");
  state.deformation.global_translation = {tr.at(0).get<double>(), tr.at(1).get<double>(),
                                          tr.at(2).get<double>()};

  const auto& js = j.at("surfels");
  SurfelSet& s = state.surfels;
  s.face_id = js.at("face_id").get<std::vector<int>>();
  const auto& bl = js.at("bary_logits");
  s.bary_logits.resize(bl.size() / 3);
  for (size_t i = 0; i < s.bary_logits.size(); ++i)
    s.bary_logits[i] = {bl.at(3 * i).get<double>(), bl.at(3 * i + 1).get<double>(),
                        bl.at(3 * i + 2).get<double>()};
  const auto& ls = js.at("tangent_log_scales");
  s.tangent_log_scales.resize(ls.size() / 2);
  for (size_t i = 0; i < s.tangent_log_scales.size(); ++i)
    s.tangent_log_scales[i] = {ls.at(2 * i).get<double>(), ls.at(2 * i + 1).get<double>()};
  s.normal_log_scales = js.at("normal_log_scales").get<std::vector<double>>();
  s.sh_degree = js.at("sh_degree").get<int>();
  s.sh = js.at("sh").get<std::vector<double>>();
  s.opacity_logits = js.at("opacity_logits").get<std::vector<double>>();
  s.fixed_opacity = js.at("fixed_opacity").get<bool>();
  s.clamp_normal_scale = js.at("clamp_normal_scale").get<bool>();

  const auto& cd = j.at("camera_deltas");
  state.camera_deltas.resize(cd.size() / 3);
  for (size_t i = 0; i < state.camera_deltas.size(); ++i)
    state.camera_deltas[i] = {cd.at(3 * i).get<double>(), cd.at(3 * i + 1).get<double>(),
                              cd.at(3 * i + 2).get<double>()};
  return state;
}

void save_loss_csv(const std::vector<LossRecord>& history, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw IoError("save_loss_csv: cannot write " + path);
  os << "step,total,photo,mask,smask,normal,laplacian,edge,is_eval\n";
  char line[256];
  for (const auto& r : history) {
    std::snprintf(line, sizeof(line), "%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%d\n",
                  r.step, r.total, r.photo, r.mask, r.smask, r.normal, r.laplacian, r.edge,
                  r.is_eval ? 1 : 0);
    os << line;
  }
}

}  // namespace resim
