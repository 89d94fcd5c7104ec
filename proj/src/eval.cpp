#include "resim/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "resim/error.hpp"
#include "resim/optim.hpp"
#include "resim/rng.hpp"
#include "resim/threading.hpp"

namespace resim {

PointSample sample_surface(const TriangleMesh& mesh, int n, uint64_t rng_seed,
                           const std::string& source_id) {
  if (n < 0) throw BoundError("sample_surface: negative count");
  auto areas = face_areas(mesh);
  std::vector<double> cdf(areas.size());
  double total = 0.0;
  for (size_t f = 0; f < areas.size(); ++f) {
    total += areas[f];
    cdf[f] = total;
  }
  if (total <= 0.0) throw DegenerateGeometryError("sample_surface: zero total area");

  PointSample out;
  out.source_id = source_id;
  out.points.reserve(n);
  Rng rng = Rng::keyed(rng_seed, 0x5a3f9e1d);
  for (int k = 0; k < n; ++k) {
    double u = rng.uniform() * total;
    int f = int(std::lower_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
    if (f >= int(areas.size())) f = int(areas.size()) - 1;
    double su = std::sqrt(rng.uniform());
    double v = rng.uniform();
    double w0 = 1.0 - su, w1 = su * (1.0 - v), w2 = su * v;
    const auto& [a, b, c] = mesh.faces[f];
    Vec3 p = w0 * mesh.vertices[a] + w1 * mesh.vertices[b] + w2 * mesh.vertices[c];
    out.points.push_back(1000.0 * p);  // meters -> millimeters
  }
  return out;
}

KdTree3::KdTree3(std::span<const Vec3> points) : pts_(points.begin(), points.end()) {
  if (pts_.empty()) throw BoundError("KdTree3: empty point set");
  index_.resize(pts_.size());
  std::iota(index_.begin(), index_.end(), 0);
  nodes_.reserve(2 * pts_.size() / 8 + 16);
  nodes_.push_back({});
  build(0, 0, int(pts_.size()), 0);
}

void KdTree3::build(int node, int begin, int end, int depth) {
  if (end - begin <= 8 || depth > 48) {
    nodes_[node].axis = -1;
    nodes_[node].begin = begin;
    nodes_[node].end = end;
    return;
  }
  Vec3 lo{1e300, 1e300, 1e300}, hi{-1e300, -1e300, -1e300};
  for (int i = begin; i < end; ++i) {
    Vec3 p = pts_[index_[i]];
    for (int a = 0; a < 3; ++a) {
      lo[a] = std::min(lo[a], p[a]);
      hi[a] = std::max(hi[a], p[a]);
    }
  }
  int axis = 0;
  double spread = hi.x - lo.x;
  if (hi.y - lo.y > spread) { axis = 1; spread = hi.y - lo.y; }
  if (hi.z - lo.z > spread) { axis = 2; }

  int mid = (begin + end) / 2;
  std::nth_element(index_.begin() + begin, index_.begin() + mid, index_.begin() + end,
                   [&](int a, int b) { return pts_[a][axis] < pts_[b][axis]; });
  nodes_[node].axis = axis;
  nodes_[node].split = pts_[index_[mid]][axis];

  int left = int(nodes_.size());
  nodes_.push_back({});
  int right = int(nodes_.size());
  nodes_.push_back({});
  nodes_[node].left = left;
  nodes_[node].right = right;
  build(left, begin, mid, depth + 1);
  build(right, mid, end, depth + 1);
}

void KdTree3::search(int node, Vec3 q, int& best, double& best_d2) const {
  const Node& nd = nodes_[node];
  if (nd.axis < 0) {
    for (int i = nd.begin; i < nd.end; ++i) {
      double d2 = norm_sq(q - pts_[index_[i]]);
      if (d2 < best_d2 || (d2 == best_d2 && index_[i] < best)) {
        best_d2 = d2;
        best = index_[i];
      }
    }
    return;
  }
  double delta = q[nd.axis] - nd.split;
  int near = delta < 0.0 ? nd.left : nd.right;
  int far = delta < 0.0 ? nd.right : nd.left;
  search(near, q, best, best_d2);
  if (delta * delta <= best_d2) search(far, q, best, best_d2);
}

std::pair<int, double> KdTree3::nearest(Vec3 q) const {
  int best = -1;
  double best_d2 = std::numeric_limits<double>::infinity();
  search(0, q, best, best_d2);
  return {best, best_d2};
}

namespace {

double directed_mean_sq(const std::vector<Vec3>& from, const KdTree3& to_tree) {
  const int n = int(from.size());
  const int chunk = 256;
  const int n_chunks = (n + chunk - 1) / chunk;
  // Per-point distances first, then one sequential sum: the result is
  // bit-identical to the naive loop regardless of worker count.
  std::vector<double> d2(n);
  parallel_for(n_chunks, [&](int ci) {
    for (int i = ci * chunk; i < std::min(n, (ci + 1) * chunk); ++i)
      d2[i] = to_tree.nearest(from[i]).second;
  });
  double sum = 0.0;
  for (double v : d2) sum += v;
  return sum / double(n);
}

}  // namespace

double chamfer(const PointSample& a, const PointSample& b) {
  if (a.points.empty() || b.points.empty())
    throw BoundError("chamfer: point sets must be non-empty");
  KdTree3 tree_a(a.points), tree_b(b.points);
  return 0.5 * (directed_mean_sq(a.points, tree_b) + directed_mean_sq(b.points, tree_a));
}

double psnr(const Image& pred, const Image& gt) {
  if (!pred.same_shape(gt)) throw ShapeError("psnr: image shapes differ");
  double mse = 0.0;
  for (size_t i = 0; i < pred.size(); ++i) {
    double r = pred.data[i] - gt.data[i];
    mse += r * r;
  }
  mse /= double(pred.size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / mse);
}

AlignResult align_eval_cameras(const TriangleMesh& mesh, const SurfelSet& surfels,
                               std::span<const Camera> cameras,
                               std::span<const Observation* const> frames,
                               const AlignConfig& cfg) {
  if (frames.empty()) throw BoundError("align_eval_cameras: no held-out frames");
  if (cameras.size() != frames.size())
    throw ShapeError("align_eval_cameras: camera/frame count mismatch");

  auto gaussians = bind_to_world(mesh, surfels);
  AlignResult out;
  out.cameras.assign(cameras.begin(), cameras.end());
  out.deltas.assign(cameras.size(), Vec3{});
  out.psnr_before.resize(cameras.size());
  out.psnr_after.resize(cameras.size());

  for (size_t f = 0; f < frames.size(); ++f) {
    const Observation& obs = *frames[f];
    const Camera& nominal = cameras[f];
    Vec3 delta;

    {
      RenderOutput r0 = render(gaussians, nominal, Modality::kRgb, cfg.background, cfg.raster);
      out.psnr_before[f] = psnr(r0.color, obs.rgb);
    }

    AdamState adam;
    adam.add_group("delta", 3, cfg.lr);
    for (int it = 0; it < cfg.steps; ++it) {
      Camera cam = apply_rotation_delta(nominal, delta);
      RenderOutput r = render(gaussians, cam, Modality::kRgb, cfg.background, cfg.raster);
      const Image* m = obs.mask ? &*obs.mask : nullptr;
      LossValue lv = photometric_l1(r.color, obs.rgb, m);
      RasterGrads rg =
          render_vjp(gaussians, cam, Modality::kRgb, cfg.background, cfg.raster, lv.d_pred, r);
      Vec3 g = rotation_delta_vjp(nominal, delta, rg.camera.rotation, rg.camera.translation);
      double gbuf[3] = {g.x, g.y, g.z};
      double vbuf[3] = {delta.x, delta.y, delta.z};
      ParamGroupRef ref{"delta", std::span<double>(vbuf, 3), std::span<const double>(gbuf, 3)};
      adam_step(adam, std::span<const ParamGroupRef>(&ref, 1));
      delta = {vbuf[0], vbuf[1], vbuf[2]};
    }

    out.deltas[f] = delta;
    out.cameras[f] = apply_rotation_delta(nominal, delta);
    RenderOutput r1 =
        render(gaussians, out.cameras[f], Modality::kRgb, cfg.background, cfg.raster);
    out.psnr_after[f] = psnr(r1.color, obs.rgb);
  }
  return out;
}

double tcp_error(const KinematicChain& chain, const JointState& q_est, const JointState& q_gt) {
  if (chain.tcps.empty()) throw TopologyError("tcp_error: chain defines no TCP sites");
  FkResult est = forward_kinematics(chain, q_est);
  FkResult gt = forward_kinematics(chain, q_gt);
  double sum = 0.0;
  for (size_t i = 0; i < chain.tcps.size(); ++i)
    sum += norm(est.tcp_points[i] - gt.tcp_points[i]);
  return 1000.0 * sum / double(chain.tcps.size());
}

}  // namespace resim
