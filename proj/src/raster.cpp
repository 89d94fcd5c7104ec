#include "resim/raster.hpp"

#include <algorithm>
#include <cmath>

#include "resim/error.hpp"
#include "resim/threading.hpp"

namespace resim {

namespace {

struct Item {
  Vec2 mean2d;
  double cov[3];    // (a, b, c), blur included
  double conic[3];  // inverse of cov
  double depth;
  double opacity;
  Vec3 xc;          // camera-space mean
  int world;
  int px0, px1, py0, py1;  // inclusive pixel bbox
};

struct Prepared {
  std::vector<Item> items;  // ascending depth, ties by index
  std::vector<std::vector<Vec3>> colors;
  std::vector<std::vector<int32_t>> tile_bins;
  int tiles_x = 0, tiles_y = 0;
  int skipped_singular = 0;
};

// Camera-space covariance sandwich A = J * W with the perspective Jacobian J.
void projection_rows(const Camera& cam, Vec3 xc, Vec3 j_row0, Vec3 j_row1, Vec3 a_row[2]) {
  const Mat3& W = cam.world_to_camera.R;
  a_row[0] = {dot(j_row0, W.col(0)), dot(j_row0, W.col(1)), dot(j_row0, W.col(2))};
  a_row[1] = {dot(j_row1, W.col(0)), dot(j_row1, W.col(1)), dot(j_row1, W.col(2))};
  (void)xc;
}

void perspective_jacobian(const Camera& cam, Vec3 xc, Vec3& j_row0, Vec3& j_row1) {
  double inv_z = 1.0 / xc.z;
  double inv_z2 = inv_z * inv_z;
  j_row0 = {cam.fx * inv_z, 0.0, -cam.fx * xc.x * inv_z2};
  j_row1 = {0.0, cam.fy * inv_z, -cam.fy * xc.y * inv_z2};
}

Mat3 world_covariance(const WorldGaussian& g) {
  Mat3 D = Mat3::diag(g.scales.x * g.scales.x, g.scales.y * g.scales.y, g.scales.z * g.scales.z);
  return g.rotation * D * transpose(g.rotation);
}

bool project_item(const WorldGaussian& g, const Camera& cam, const RasterConfig& cfg, Item& it,
                  int* skipped_singular) {
  Vec3 xc = cam.world_to_camera.apply(g.mean);
  if (xc.z <= cfg.near_plane) return false;

  double inv_z = 1.0 / xc.z;
  it.mean2d = {cam.fx * xc.x * inv_z + cam.cx, cam.fy * xc.y * inv_z + cam.cy};
  it.depth = xc.z;
  it.xc = xc;
  it.opacity = g.opacity;

  Vec3 j0, j1;
  perspective_jacobian(cam, xc, j0, j1);
  Vec3 a_row[2];
  projection_rows(cam, xc, j0, j1, a_row);

  Mat3 S = world_covariance(g);
  Vec3 sa0 = S * a_row[0];
  Vec3 sa1 = S * a_row[1];
  it.cov[0] = dot(a_row[0], sa0) + cfg.blur;
  it.cov[1] = dot(a_row[0], sa1);
  it.cov[2] = dot(a_row[1], sa1) + cfg.blur;

  double d = it.cov[0] * it.cov[2] - it.cov[1] * it.cov[1];
  if (d < 1e-12) {
    if (skipped_singular) ++(*skipped_singular);
    return false;
  }
  it.conic[0] = it.cov[2] / d;
  it.conic[1] = -it.cov[1] / d;
  it.conic[2] = it.cov[0] / d;

  double mid = 0.5 * (it.cov[0] + it.cov[2]);
  double lam_max = mid + std::sqrt(std::max(0.0, mid * mid - d));
  double r = cfg.radius_sigma * std::sqrt(lam_max);
  it.px0 = std::max(0, int(std::ceil(it.mean2d.x - r - 0.5)));
  it.px1 = std::min(cam.width - 1, int(std::floor(it.mean2d.x + r - 0.5)));
  it.py0 = std::max(0, int(std::ceil(it.mean2d.y - r - 0.5)));
  it.py1 = std::min(cam.height - 1, int(std::floor(it.mean2d.y + r - 0.5)));
  return it.px0 <= it.px1 && it.py0 <= it.py1;
}

Vec3 modality_color(const WorldGaussian& g, const Camera& cam, Modality m) {
  switch (m) {
    case Modality::kRgb: {
      Vec3 v = g.mean - cam.center();
      Vec3 dir = norm(v) > 1e-12 ? v / norm(v) : Vec3{0, 0, 1};
      return eval_sh(g.sh.data(), g.sh_degree, dir);
    }
    case Modality::kNormals: {
      Vec3 n_cam = cam.world_to_camera.R * g.rotation.col(2);
      return 0.5 * n_cam + Vec3{0.5, 0.5, 0.5};
    }
    case Modality::kMask:
      return {1.0, 1.0, 1.0};
  }
  return {};
}

Prepared prepare(std::span<const WorldGaussian> gaussians, const Camera& cam,
                 std::span<const Modality> modalities, const RasterConfig& cfg) {
  validate_camera(cam);
  Prepared prep;
  prep.tiles_x = (cam.width + cfg.tile_size - 1) / cfg.tile_size;
  prep.tiles_y = (cam.height + cfg.tile_size - 1) / cfg.tile_size;

  prep.items.reserve(gaussians.size());
  for (int i = 0; i < int(gaussians.size()); ++i) {
    Item it;
    if (project_item(gaussians[i], cam, cfg, it, &prep.skipped_singular)) {
      it.world = i;
      prep.items.push_back(it);
    }
  }
  std::sort(prep.items.begin(), prep.items.end(), [](const Item& a, const Item& b) {
    return a.depth != b.depth ? a.depth < b.depth : a.world < b.world;
  });

  prep.colors.resize(modalities.size());
  for (size_t m = 0; m < modalities.size(); ++m) {
    prep.colors[m].resize(prep.items.size());
    for (size_t k = 0; k < prep.items.size(); ++k)
      prep.colors[m][k] = modality_color(gaussians[prep.items[k].world], cam, modalities[m]);
  }

  prep.tile_bins.assign(size_t(prep.tiles_x) * prep.tiles_y, {});
  for (size_t k = 0; k < prep.items.size(); ++k) {
    const Item& it = prep.items[k];
    int tx0 = it.px0 / cfg.tile_size, tx1 = it.px1 / cfg.tile_size;
    int ty0 = it.py0 / cfg.tile_size, ty1 = it.py1 / cfg.tile_size;
    for (int ty = ty0; ty <= ty1; ++ty)
      for (int tx = tx0; tx <= tx1; ++tx)
        prep.tile_bins[size_t(ty) * prep.tiles_x + tx].push_back(int32_t(k));
  }
  return prep;
}

}  // namespace

std::optional<Projection> project_gaussian(const WorldGaussian& g, const Camera& cam,
                                           const RasterConfig& cfg) {
  validate_camera(cam);
  Vec3 xc = cam.world_to_camera.apply(g.mean);
  if (xc.z <= cfg.near_plane) return std::nullopt;
  Item it;
  int dummy = 0;
  // Keep the full projection even when off-screen; only near-plane culls here.
  project_item(g, cam, cfg, it, &dummy);
  Projection p;
  p.mean2d = it.mean2d;
  p.cov2d[0] = it.cov[0];
  p.cov2d[1] = it.cov[1];
  p.cov2d[2] = it.cov[2];
  p.depth = it.depth;
  return p;
}

RenderBundle render_bundle(std::span<const WorldGaussian> gaussians, const Camera& cam,
                           std::span<const Modality> modalities,
                           std::span<const Vec3> backgrounds, const RasterConfig& cfg) {
  if (modalities.size() != backgrounds.size())
    throw ShapeError("render_bundle: modality/background count mismatch");
  Prepared prep = prepare(gaussians, cam, modalities, cfg);

  RenderBundle out;
  out.modalities.assign(modalities.begin(), modalities.end());
  out.backgrounds.assign(backgrounds.begin(), backgrounds.end());
  out.skipped_singular = prep.skipped_singular;
  out.colors.assign(modalities.size(), Image(cam.width, cam.height, 3));
  out.alpha = Image(cam.width, cam.height, 1);
  out.records.tiles.resize(prep.tile_bins.size());
  out.records.tiles_x = prep.tiles_x;
  out.records.tiles_y = prep.tiles_y;
  out.records.gaussian_count = int(gaussians.size());

  const int n_tiles = prep.tiles_x * prep.tiles_y;
  const int nm = int(modalities.size());

  parallel_for(n_tiles, [&](int t) {
    const int tx = t % prep.tiles_x, ty = t / prep.tiles_x;
    const int x0 = tx * cfg.tile_size, x1 = std::min(cam.width, x0 + cfg.tile_size);
    const int y0 = ty * cfg.tile_size, y1 = std::min(cam.height, y0 + cfg.tile_size);
    const auto& bins = prep.tile_bins[t];
    TileRecords& rec = out.records.tiles[t];
    rec.pixel_count.reserve(size_t(x1 - x0) * (y1 - y0));

    Vec3 accum[3];
    for (int py = y0; py < y1; ++py) {
      for (int px = x0; px < x1; ++px) {
        double T = 1.0;
        for (int m = 0; m < nm; ++m) accum[m] = {};
        int32_t count = 0;
        for (int32_t pos = 0; pos < int32_t(bins.size()); ++pos) {
          const Item& it = prep.items[bins[pos]];
          double dx = (px + 0.5) - it.mean2d.x;
          double dy = (py + 0.5) - it.mean2d.y;
          double q = it.conic[0] * dx * dx + 2.0 * it.conic[1] * dx * dy +
                     it.conic[2] * dy * dy;
          if (q > 50.0) continue;
          double raw = it.opacity * std::exp(-0.5 * q);
          if (raw < cfg.alpha_skip) continue;
          double a = std::min(raw, cfg.alpha_clip);
          double w = a * T;
          for (int m = 0; m < nm; ++m) accum[m] += w * prep.colors[m][bins[pos]];
          rec.pos.push_back(pos);
          rec.alpha_raw.push_back(raw);
          ++count;
          T *= 1.0 - a;
          if (T < cfg.transmittance_min) break;
        }
        rec.pixel_count.push_back(count);
        for (int m = 0; m < nm; ++m)
          out.colors[m].set_rgb(px, py, accum[m] + T * backgrounds[m]);
        out.alpha.at(px, py, 0) = 1.0 - T;
      }
    }
  });

  out.records.tile_bins = std::move(prep.tile_bins);
  out.records.valid = true;
  return out;
}

namespace {

// Per-gaussian accumulators gathered from the pixel loops.
struct ItemGrad {
  Vec2 mean2d;
  double conic[3] = {0, 0, 0};
  double opacity = 0.0;
};

void check_records(const RenderRecords& rec, std::span<const WorldGaussian> gaussians,
                   const Camera& cam, const RasterConfig& cfg) {
  if (!rec.valid) throw StateError("render_vjp: forward records missing");
  int tiles_x = (cam.width + cfg.tile_size - 1) / cfg.tile_size;
  int tiles_y = (cam.height + cfg.tile_size - 1) / cfg.tile_size;
  if (rec.tiles_x != tiles_x || rec.tiles_y != tiles_y ||
      rec.gaussian_count != int(gaussians.size()) ||
      rec.tiles.size() != size_t(tiles_x) * tiles_y)
    throw StateError("render_vjp: forward records do not match these inputs");
}

}  // namespace

RasterGrads render_bundle_vjp(std::span<const WorldGaussian> gaussians, const Camera& cam,
                              std::span<const Modality> modalities,
                              std::span<const Vec3> backgrounds, const RasterConfig& cfg,
                              std::span<const Image* const> cotangents,
                              const RenderBundle& forward) {
  if (modalities.size() != backgrounds.size() || cotangents.size() != modalities.size() ||
      forward.colors.size() != modalities.size())
    throw ShapeError("render_bundle_vjp: modality list mismatch");
  for (size_t m = 0; m < modalities.size(); ++m)
    if (cotangents[m] &&
        (cotangents[m]->width != cam.width || cotangents[m]->height != cam.height ||
         cotangents[m]->channels != 3))
      throw ShapeError("render_bundle_vjp: cotangent image shape mismatch");
  check_records(forward.records, gaussians, cam, cfg);

  // Re-derive the projection; identical inputs give identical items.
  Prepared prep = prepare(gaussians, cam, modalities, cfg);
  const auto& tile_bins = forward.records.tile_bins;
  if (tile_bins.size() != prep.tile_bins.size())
    throw StateError("render_bundle_vjp: stale forward records");

  const int n_tiles = prep.tiles_x * prep.tiles_y;
  const int nm = int(modalities.size());
  const size_t n_items = prep.items.size();

  // Pixel-loop gradients per tile, reduced in tile order below.
  std::vector<std::vector<ItemGrad>> tile_item_grads(n_tiles);
  std::vector<std::vector<Vec3>> tile_color_grads(n_tiles);

  parallel_for(n_tiles, [&](int t) {
    const int tx = t % prep.tiles_x, ty = t / prep.tiles_x;
    const int x0 = tx * cfg.tile_size, x1 = std::min(cam.width, x0 + cfg.tile_size);
    const int y0 = ty * cfg.tile_size, y1 = std::min(cam.height, y0 + cfg.tile_size);
    const auto& bins = tile_bins[t];
    const TileRecords& rec = forward.records.tiles[t];
    if (bins.empty()) return;

    auto& igrad = tile_item_grads[t];
    auto& cgrad = tile_color_grads[t];
    igrad.assign(bins.size(), {});
    cgrad.assign(bins.size() * nm, Vec3{});

    size_t cursor = 0;
    size_t pixel_idx = 0;
    Vec3 partial[3];
    Vec3 gC[3];
    for (int py = y0; py < y1; ++py) {
      for (int px = x0; px < x1; ++px, ++pixel_idx) {
        int32_t count = rec.pixel_count[pixel_idx];
        if (count == 0) continue;
        double T = 1.0;
        for (int m = 0; m < nm; ++m) {
          partial[m] = {};
          gC[m] = cotangents[m] ? cotangents[m]->rgb(px, py) : Vec3{};
        }
        for (int32_t r = 0; r < count; ++r, ++cursor) {
          int32_t pos = rec.pos[cursor];
          double raw = rec.alpha_raw[cursor];
          const Item& it = prep.items[bins[pos]];
          double a = std::min(raw, cfg.alpha_clip);
          double w = a * T;
          double g_alpha = 0.0;
          for (int m = 0; m < nm; ++m) {
            if (!cotangents[m]) continue;
            Vec3 c = prep.colors[m][bins[pos]];
            cgrad[size_t(pos) * nm + m] += w * gC[m];
            partial[m] += w * c;
            // Everything composited behind this contribution, incl. background.
            Vec3 suffix = forward.colors[m].rgb(px, py) - partial[m];
            Vec3 dC_da = T * c - (1.0 / (1.0 - a)) * suffix;
            g_alpha += dot(gC[m], dC_da);
          }
          if (raw < cfg.alpha_clip) {
            ItemGrad& ig = igrad[pos];
            double g_q = -0.5 * raw * g_alpha;
            double dx = (px + 0.5) - it.mean2d.x;
            double dy = (py + 0.5) - it.mean2d.y;
            ig.mean2d.x -= g_q * 2.0 * (it.conic[0] * dx + it.conic[1] * dy);
            ig.mean2d.y -= g_q * 2.0 * (it.conic[1] * dx + it.conic[2] * dy);
            ig.conic[0] += g_q * dx * dx;
            ig.conic[1] += g_q * 2.0 * dx * dy;
            ig.conic[2] += g_q * dy * dy;
            ig.opacity += g_alpha * (raw / it.opacity);
          }
          T *= 1.0 - a;
        }
      }
    }
  });

  // Deterministic reduction across tiles.
  std::vector<ItemGrad> item_grads(n_items);
  std::vector<Vec3> color_grads(n_items * nm);
  for (int t = 0; t < n_tiles; ++t) {
    const auto& bins = tile_bins[t];
    if (tile_item_grads[t].empty()) continue;
    for (size_t p = 0; p < bins.size(); ++p) {
      ItemGrad& dst = item_grads[bins[p]];
      const ItemGrad& src = tile_item_grads[t][p];
      dst.mean2d = dst.mean2d + src.mean2d;
      for (int k = 0; k < 3; ++k) dst.conic[k] += src.conic[k];
      dst.opacity += src.opacity;
      for (int m = 0; m < nm; ++m)
        color_grads[bins[p] * nm + m] += tile_color_grads[t][size_t(p) * nm + m];
    }
  }

  // Per-item projection/color backward; camera grads reduced in chunk order.
  RasterGrads out;
  out.gaussians.assign(gaussians.size(), {});
  out.skipped_singular = prep.skipped_singular;

  const Mat3& W = cam.world_to_camera.R;
  const Mat3 Wt = transpose(W);
  const Vec3 rt_t = Wt * cam.world_to_camera.t;  // R^T t, = -camera center
  const Vec3 cam_center = -1.0 * rt_t;

  const int chunk = 512;
  const int n_chunks = int((n_items + chunk - 1) / chunk);
  std::vector<CameraGrad> chunk_cam(std::max(1, n_chunks));

  parallel_for(n_chunks, [&](int ci) {
    CameraGrad cg;
    for (size_t k = size_t(ci) * chunk; k < std::min(n_items, size_t(ci + 1) * chunk); ++k) {
      const Item& it = prep.items[k];
      const WorldGaussian& g = gaussians[it.world];
      GaussianCotangent& gc = out.gaussians[it.world];
      const ItemGrad& ig = item_grads[k];

      gc.d_opacity += ig.opacity;

      // Colors.
      for (int m = 0; m < nm; ++m) {
        Vec3 g_col = color_grads[k * nm + m];
        if (g_col.x == 0.0 && g_col.y == 0.0 && g_col.z == 0.0) continue;
        switch (modalities[m]) {
          case Modality::kRgb: {
            Vec3 v = g.mean - cam_center;
            double len = norm(v);
            Vec3 dir = len > 1e-12 ? v / len : Vec3{0, 0, 1};
            ShVjp sv = eval_sh_vjp(g.sh.data(), g.sh_degree, dir, g_col);
            for (int i = 0; i < (g.sh_degree + 1) * (g.sh_degree + 1) * 3; ++i)
              gc.d_sh[i] += sv.d_coeffs[i];
            if (len > 1e-12) {
              Vec3 g_v = (sv.d_dir - dot(dir, sv.d_dir) * dir) / len;
              gc.d_mean += g_v;
              Vec3 g_cc = -1.0 * g_v;
              cg.rotation += cross(rt_t, g_cc);
              cg.translation -= W * g_cc;
            }
            break;
          }
          case Modality::kNormals: {
            Vec3 half = 0.5 * g_col;
            Vec3 g_n = Wt * half;
            for (int i = 0; i < 3; ++i) gc.d_rotation.m[i][2] += g_n[i];
            cg.rotation += cross(g.rotation.col(2), g_n);
            break;
          }
          case Modality::kMask:
            break;
        }
      }

      // conic -> cov2d: Lambda = Sigma^-1, Ghat_Sigma = -Lambda Ghat_Lambda Lambda.
      double la = it.conic[0], lb = it.conic[1], lc = it.conic[2];
      double gla = ig.conic[0], glb = 0.5 * ig.conic[1], glc = ig.conic[2];
      // M1 = Lambda * Ghat_Lambda (2x2), Ghat_Sigma = -(M1 * Lambda)
      double m1_00 = la * gla + lb * glb, m1_01 = la * glb + lb * glc;
      double m1_10 = lb * gla + lc * glb, m1_11 = lb * glb + lc * glc;
      double gs_00 = -(m1_00 * la + m1_01 * lb);
      double gs_01 = -(m1_00 * lb + m1_01 * lc);
      double gs_10 = -(m1_10 * la + m1_11 * lb);
      double gs_11 = -(m1_10 * lb + m1_11 * lc);
      // Symmetric matrix cotangent on cov2d = A Sigma_w A^T (+ blur I).
      double gm_00 = gs_00, gm_01 = 0.5 * (gs_01 + gs_10), gm_11 = gs_11;

      Vec3 j0, j1;
      perspective_jacobian(cam, it.xc, j0, j1);
      Vec3 a_row[2];
      projection_rows(cam, it.xc, j0, j1, a_row);
      Mat3 Sw = world_covariance(g);

      // g_A = 2 Ghat_M A Sigma_w  (2x3)
      Vec3 a_sw[2] = {Sw * a_row[0], Sw * a_row[1]};  // Sigma_w symmetric
      Vec3 g_a0 = 2.0 * (gm_00 * a_sw[0] + gm_01 * a_sw[1]);
      Vec3 g_a1 = 2.0 * (gm_01 * a_sw[0] + gm_11 * a_sw[1]);

      // Ghat_Sw = A^T Ghat_M A.
      Mat3 g_sw = gm_00 * outer(a_row[0], a_row[0]) + gm_11 * outer(a_row[1], a_row[1]) +
                  gm_01 * (outer(a_row[0], a_row[1]) + outer(a_row[1], a_row[0]));

      // Sigma_w = R D R^T: g_R = 2 Ghat R D, g_D = diag(R^T Ghat R).
      Mat3 D = Mat3::diag(g.scales.x * g.scales.x, g.scales.y * g.scales.y,
                          g.scales.z * g.scales.z);
      Mat3 g_rot = 2.0 * (g_sw * (g.rotation * D));
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) gc.d_rotation.m[i][j] += g_rot.m[i][j];
      Mat3 rt_g_r = transpose(g.rotation) * g_sw * g.rotation;
      gc.d_scales.x += 2.0 * g.scales.x * rt_g_r.m[0][0];
      gc.d_scales.y += 2.0 * g.scales.y * rt_g_r.m[1][1];
      gc.d_scales.z += 2.0 * g.scales.z * rt_g_r.m[2][2];

      // g_J = g_A W^T; nonzero J entries feed x_c.
      Vec3 g_j0 = {dot(g_a0, Wt.col(0)), dot(g_a0, Wt.col(1)), dot(g_a0, Wt.col(2))};
      Vec3 g_j1 = {dot(g_a1, Wt.col(0)), dot(g_a1, Wt.col(1)), dot(g_a1, Wt.col(2))};
      double inv_z = 1.0 / it.xc.z;
      double inv_z2 = inv_z * inv_z;
      double inv_z3 = inv_z2 * inv_z;
      Vec3 g_xc;
      g_xc.x += g_j0.z * (-cam.fx * inv_z2);
      g_xc.y += g_j1.z * (-cam.fy * inv_z2);
      g_xc.z += g_j0.x * (-cam.fx * inv_z2) + g_j0.z * (2.0 * cam.fx * it.xc.x * inv_z3) +
                g_j1.y * (-cam.fy * inv_z2) + g_j1.z * (2.0 * cam.fy * it.xc.y * inv_z3);

      // mean2d = (fx x/z + cx, fy y/z + cy).
      g_xc.x += ig.mean2d.x * cam.fx * inv_z;
      g_xc.y += ig.mean2d.y * cam.fy * inv_z;
      g_xc.z += -ig.mean2d.x * cam.fx * it.xc.x * inv_z2 - ig.mean2d.y * cam.fy * it.xc.y * inv_z2;

      // x_c = W mu + t.
      gc.d_mean += Wt * g_xc;
      cg.rotation += cross(g.mean, Wt * g_xc);
      cg.translation += g_xc;

      // W path inside cov2d: g_W = J^T g_A; tangent via tr(g_W^T W E_k).
      Mat3 g_w = outer(j0, g_a0) + outer(j1, g_a1);  // J^T g_A
      Mat3 B = transpose(g_w) * W;
      cg.rotation += Vec3{B.m[1][2] - B.m[2][1], B.m[2][0] - B.m[0][2], B.m[0][1] - B.m[1][0]};
    }
    chunk_cam[ci] = cg;
  });

  for (int ci = 0; ci < n_chunks; ++ci) {
    out.camera.rotation += chunk_cam[ci].rotation;
    out.camera.translation += chunk_cam[ci].translation;
  }
  return out;
}

RenderOutput render(std::span<const WorldGaussian> gaussians, const Camera& cam,
                    Modality modality, Vec3 background, const RasterConfig& cfg) {
  Modality mods[1] = {modality};
  Vec3 bgs[1] = {background};
  RenderBundle b = render_bundle(gaussians, cam, mods, bgs, cfg);
  RenderOutput out;
  out.color = std::move(b.colors[0]);
  out.alpha = std::move(b.alpha);
  out.modality = modality;
  out.background = background;
  out.skipped_singular = b.skipped_singular;
  out.records = std::move(b.records);
  return out;
}

RasterGrads render_vjp(std::span<const WorldGaussian> gaussians, const Camera& cam,
                       Modality modality, Vec3 background, const RasterConfig& cfg,
                       const Image& cotangent, const RenderOutput& forward) {
  check_records(forward.records, gaussians, cam, cfg);
  RenderBundle b;
  b.colors.push_back(forward.color);
  b.alpha = forward.alpha;
  b.modalities = {modality};
  b.backgrounds = {background};
  b.records = forward.records;
  Modality mods[1] = {modality};
  Vec3 bgs[1] = {background};
  const Image* cots[1] = {&cotangent};
  return render_bundle_vjp(gaussians, cam, mods, bgs, cfg, cots, b);
}

}  // namespace resim
