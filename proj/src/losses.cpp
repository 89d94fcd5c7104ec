#include "resim/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "resim/error.hpp"

namespace resim {

namespace {

void require_same_shape(const Image& a, const Image& b, const char* who) {
  if (!a.same_shape(b)) throw ShapeError(std::string(who) + ": image shapes differ");
}

double mask_value(const Image* mask, int x, int y) {
  return mask ? mask->at(x, y, 0) : 1.0;
}

// Off-pixel sentinel for the squared distance transform. A single shared
// finite value keeps parabola intersections exact (the BIGs cancel) while it
// can never beat a real foreground parabola on an image grid.
constexpr double kDtBig = 1e15;

// Felzenszwalb-Huttenlocher 1D squared distance transform (exact).
void dt1d(const double* f, int n, double* d, int* v, double* z) {
  const double inf = std::numeric_limits<double>::infinity();
  int k = 0;
  v[0] = 0;
  z[0] = -inf;
  z[1] = inf;
  for (int q = 1; q < n; ++q) {
    double s = ((f[q] + double(q) * q) - (f[v[k]] + double(v[k]) * v[k])) /
               (2.0 * q - 2.0 * v[k]);
    while (s <= z[k]) {
      --k;
      s = ((f[q] + double(q) * q) - (f[v[k]] + double(v[k]) * v[k])) /
          (2.0 * q - 2.0 * v[k]);
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = inf;
  }
  k = 0;
  for (int q = 0; q < n; ++q) {
    while (z[k + 1] < double(q)) ++k;
    double dq = double(q) - double(v[k]);
    d[q] = dq * dq + f[v[k]];
  }
}

}  // namespace

LossValue photometric_l1(const Image& pred, const Image& gt, const Image* mask) {
  require_same_shape(pred, gt, "photometric_l1");
  if (mask && (mask->width != pred.width || mask->height != pred.height || mask->channels != 1))
    throw ShapeError("photometric_l1: mask must be H x W x 1 matching the images");

  LossValue out;
  out.d_pred = Image(pred.width, pred.height, pred.channels);
  const double inv_n = 1.0 / double(pred.size());
  double sum = 0.0;
  for (int y = 0; y < pred.height; ++y) {
    for (int x = 0; x < pred.width; ++x) {
      double m = mask_value(mask, x, y);
      for (int c = 0; c < pred.channels; ++c) {
        double r = pred.at(x, y, c) - gt.at(x, y, c) * m;
        sum += std::abs(r);
        out.d_pred.at(x, y, c) = r > 0.0 ? inv_n : (r < 0.0 ? -inv_n : 0.0);
      }
    }
  }
  out.value = sum * inv_n;
  return out;
}

LossValue mask_l2(const Image& pred, const Image& gt) {
  require_same_shape(pred, gt, "mask_l2");
  LossValue out;
  out.d_pred = Image(pred.width, pred.height, pred.channels);
  double sum = 0.0;
  for (size_t i = 0; i < pred.size(); ++i) {
    double r = pred.data[i] - gt.data[i];
    sum += r * r;
    out.d_pred.data[i] = 2.0 * r;
  }
  out.value = sum;
  return out;
}

Image edt(const Image& mask) {
  if (mask.channels != 1) throw ShapeError("edt: mask must be 1-channel");
  const int w = mask.width, h = mask.height;

  std::vector<double> grid(size_t(w) * h);
  bool any = false;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      bool fg = mask.at(x, y, 0) > 0.5;
      any = any || fg;
      grid[size_t(y) * w + x] = fg ? 0.0 : kDtBig;
    }
  if (!any) throw EmptyMaskError("edt: mask has no foreground pixels");

  int n = std::max(w, h);
  std::vector<double> f(n), d(n), z(n + 1);
  std::vector<int> v(n);

  // Columns, then rows.
  for (int x = 0; x < w; ++x) {
    for (int y = 0; y < h; ++y) f[y] = grid[size_t(y) * w + x];
    dt1d(f.data(), h, d.data(), v.data(), z.data());
    for (int y = 0; y < h; ++y) grid[size_t(y) * w + x] = d[y];
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) f[x] = grid[size_t(y) * w + x];
    dt1d(f.data(), w, d.data(), v.data(), z.data());
    for (int x = 0; x < w; ++x) grid[size_t(y) * w + x] = d[x];
  }

  Image out(w, h, 1);
  for (size_t i = 0; i < out.size(); ++i) out.data[i] = std::sqrt(grid[i]);
  return out;
}

Image soft_mask_target(const Image& gt_mask, double tau, bool literal) {
  if (!literal && !(tau > 0.0)) throw BoundError("soft_mask_target: tau must be positive");
  Image dist = edt(gt_mask);
  Image target(dist.width, dist.height, 1);
  for (size_t i = 0; i < dist.size(); ++i) {
    double d = dist.data[i];
    target.data[i] = literal ? d * d : std::exp(-(d / tau) * (d / tau));
  }
  return target;
}

LossValue soft_mask_loss(const Image& pred, const Image& gt_mask, double tau, bool literal) {
  Image target = soft_mask_target(gt_mask, tau, literal);
  require_same_shape(pred, target, "soft_mask_loss");
  return mask_l2(pred, target);
}

LossValue normal_loss(const Image& pred, const Image& gt, const Image* mask) {
  require_same_shape(pred, gt, "normal_loss");
  if (mask && (mask->width != pred.width || mask->height != pred.height || mask->channels != 1))
    throw ShapeError("normal_loss: mask must be H x W x 1 matching the images");
  LossValue out;
  out.d_pred = Image(pred.width, pred.height, pred.channels);
  double sum = 0.0;
  for (int y = 0; y < pred.height; ++y) {
    for (int x = 0; x < pred.width; ++x) {
      double m = mask_value(mask, x, y);
      for (int c = 0; c < pred.channels; ++c) {
        double r = (pred.at(x, y, c) - gt.at(x, y, c)) * m;
        sum += r * r;
        out.d_pred.at(x, y, c) = 2.0 * r * m;
      }
    }
  }
  out.value = sum;
  return out;
}

namespace {

constexpr int kSsimWindow = 11;
constexpr double kSsimSigma = 1.5;
constexpr double kSsimC1 = 1e-4;   // (0.01 * 1)^2
constexpr double kSsimC2 = 9e-4;   // (0.03 * 1)^2

const double* ssim_kernel() {
  static double k[kSsimWindow];
  static bool init = [] {
    double sum = 0.0;
    for (int i = 0; i < kSsimWindow; ++i) {
      double d = i - (kSsimWindow - 1) / 2.0;
      k[i] = std::exp(-d * d / (2.0 * kSsimSigma * kSsimSigma));
      sum += k[i];
    }
    for (int i = 0; i < kSsimWindow; ++i) k[i] /= sum;
    return true;
  }();
  (void)init;
  return k;
}

// Valid-mode separable correlation of a single channel field.
// in: w x h, out: (w - 10) x (h - 10).
void sepconv_valid(const std::vector<double>& in, int w, int h, std::vector<double>& tmp,
                   std::vector<double>& out) {
  const double* k = ssim_kernel();
  const int vw = w - kSsimWindow + 1;
  const int vh = h - kSsimWindow + 1;
  tmp.assign(size_t(vw) * h, 0.0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < vw; ++x) {
      double s = 0.0;
      for (int i = 0; i < kSsimWindow; ++i) s += k[i] * in[size_t(y) * w + x + i];
      tmp[size_t(y) * vw + x] = s;
    }
  out.assign(size_t(vw) * vh, 0.0);
  for (int y = 0; y < vh; ++y)
    for (int x = 0; x < vw; ++x) {
      double s = 0.0;
      for (int i = 0; i < kSsimWindow; ++i) s += k[i] * tmp[size_t(y + i) * vw + x];
      out[size_t(y) * vw + x] = s;
    }
}

// Adjoint of sepconv_valid: scatters a valid-size field back to image size.
void sepconv_valid_adjoint(const std::vector<double>& in, int w, int h, std::vector<double>& tmp,
                           std::vector<double>& out) {
  const double* k = ssim_kernel();
  const int vw = w - kSsimWindow + 1;
  const int vh = h - kSsimWindow + 1;
  tmp.assign(size_t(vw) * h, 0.0);
  for (int y = 0; y < vh; ++y)
    for (int x = 0; x < vw; ++x) {
      double val = in[size_t(y) * vw + x];
      if (val == 0.0) continue;
      for (int i = 0; i < kSsimWindow; ++i) tmp[size_t(y + i) * vw + x] += k[i] * val;
    }
  out.assign(size_t(w) * h, 0.0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < vw; ++x) {
      double val = tmp[size_t(y) * vw + x];
      if (val == 0.0) continue;
      for (int i = 0; i < kSsimWindow; ++i) out[size_t(y) * w + x + i] += k[i] * val;
    }
}

struct SsimEval {
  double value = 0.0;
  Image grad;  // empty unless requested
};

SsimEval ssim_impl(const Image& a, const Image& b, bool want_grad) {
  require_same_shape(a, b, "ssim");
  if (a.width < kSsimWindow || a.height < kSsimWindow)
    throw ShapeError("ssim: images smaller than the 11x11 window");

  const int w = a.width, h = a.height, nc = a.channels;
  const int vw = w - kSsimWindow + 1;
  const int vh = h - kSsimWindow + 1;
  const double n_valid = double(vw) * vh * nc;

  SsimEval out;
  if (want_grad) out.grad = Image(w, h, nc);

  std::vector<double> ca(size_t(w) * h), cb(size_t(w) * h), caa(size_t(w) * h),
      cbb(size_t(w) * h), cab(size_t(w) * h);
  std::vector<double> mu_a, mu_b, m_aa, m_bb, m_ab, tmp;
  std::vector<double> p1, p2, p3, t1, t2, t3, s1, s2, s3;

  double total = 0.0;
  for (int c = 0; c < nc; ++c) {
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        double va = a.at(x, y, c), vb = b.at(x, y, c);
        size_t i = size_t(y) * w + x;
        ca[i] = va;
        cb[i] = vb;
        caa[i] = va * va;
        cbb[i] = vb * vb;
        cab[i] = va * vb;
      }
    sepconv_valid(ca, w, h, tmp, mu_a);
    sepconv_valid(cb, w, h, tmp, mu_b);
    sepconv_valid(caa, w, h, tmp, m_aa);
    sepconv_valid(cbb, w, h, tmp, m_bb);
    sepconv_valid(cab, w, h, tmp, m_ab);

    if (want_grad) {
      p1.assign(size_t(vw) * vh, 0.0);
      p2.assign(size_t(vw) * vh, 0.0);
      p3.assign(size_t(vw) * vh, 0.0);
    }
    for (size_t i = 0; i < size_t(vw) * vh; ++i) {
      double ma = mu_a[i], mb = mu_b[i];
      double va = m_aa[i] - ma * ma;
      double vb = m_bb[i] - mb * mb;
      double vab = m_ab[i] - ma * mb;
      double a1 = 2.0 * ma * mb + kSsimC1;
      double a2 = 2.0 * vab + kSsimC2;
      double b1 = ma * ma + mb * mb + kSsimC1;
      double b2 = va + vb + kSsimC2;
      double s = (a1 * a2) / (b1 * b2);
      total += s;
      if (want_grad) {
        p1[i] = 2.0 * (mb * a2 * b1 - ma * a1 * a2) / (b1 * b1 * b2);  // dS/d mu_a
        p2[i] = -a1 * a2 / (b1 * b2 * b2);                             // dS/d var_a
        p3[i] = 2.0 * a1 / (b1 * b2);                                  // dS/d cov_ab
      }
    }
    if (want_grad) {
      // dL/da(x) = w*[P1 + 2 P2 (a - mu_a) + P3 (b - mu_b)] scattered.
      t1 = p1;
      t2.assign(p2.size(), 0.0);
      t3.assign(p3.size(), 0.0);
      for (size_t i = 0; i < p2.size(); ++i) {
        t2[i] = p2[i] * mu_a[i];
        t3[i] = p3[i] * mu_b[i];
      }
      sepconv_valid_adjoint(t1, w, h, tmp, s1);
      sepconv_valid_adjoint(p2, w, h, tmp, s2);
      sepconv_valid_adjoint(p3, w, h, tmp, s3);
      std::vector<double> s2m, s3m;
      sepconv_valid_adjoint(t2, w, h, tmp, s2m);
      sepconv_valid_adjoint(t3, w, h, tmp, s3m);
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
          size_t i = size_t(y) * w + x;
          double g = s1[i] + 2.0 * (a.at(x, y, c) * s2[i] - s2m[i]) +
                     (b.at(x, y, c) * s3[i] - s3m[i]);
          out.grad.at(x, y, c) = g / n_valid;
        }
    }
  }
  out.value = total / n_valid;
  return out;
}

}  // namespace

double ssim(const Image& a, const Image& b) { return ssim_impl(a, b, false).value; }

std::pair<double, Image> ssim_with_grad(const Image& a, const Image& b) {
  SsimEval e = ssim_impl(a, b, true);
  return {e.value, std::move(e.grad)};
}

TotalLoss total_loss(std::span<const FrameRender> renders,
                     std::span<const Observation* const> observations,
                     const LossWeights& weights, const TriangleMesh* mesh, double smask_tau,
                     bool smask_literal, std::span<const Image* const> smask_targets) {
  if (renders.size() != observations.size())
    throw ShapeError("total_loss: render/observation count mismatch");

  TotalLoss out;
  out.frames.resize(renders.size());
  for (size_t f = 0; f < renders.size(); ++f) {
    const Observation& obs = *observations[f];
    const FrameRender& r = renders[f];
    FrameCotangents& ct = out.frames[f];
    const double beta = obs.weight;

    if (weights.photo > 0.0 && r.rgb) {
      const Image* m = obs.mask ? &*obs.mask : nullptr;
      LossValue lv = photometric_l1(*r.rgb, obs.rgb, m);
      out.photo += beta * weights.photo * lv.value;
      double s = beta * weights.photo;
      ct.d_rgb = std::move(lv.d_pred);
      for (auto& v : ct.d_rgb.data) v *= s;
    }
    if (r.mask && obs.mask) {
      LossValue hard, soft;
      double s_hard = beta * weights.mask, s_soft = beta * weights.smask;
      if (weights.mask > 0.0) {
        hard = mask_l2(*r.mask, *obs.mask);
        out.mask += s_hard * hard.value;
      }
      if (weights.smask > 0.0) {
        if (f < smask_targets.size() && smask_targets[f]) {
          soft = mask_l2(*r.mask, *smask_targets[f]);
        } else {
          soft = soft_mask_loss(*r.mask, *obs.mask, smask_tau, smask_literal);
        }
        out.smask += s_soft * soft.value;
      }
      if (weights.mask > 0.0 || weights.smask > 0.0) {
        ct.d_mask = Image(r.mask->width, r.mask->height, 1);
        for (size_t i = 0; i < ct.d_mask.size(); ++i) {
          double g = 0.0;
          if (weights.mask > 0.0) g += s_hard * hard.d_pred.data[i];
          if (weights.smask > 0.0) g += s_soft * soft.d_pred.data[i];
          ct.d_mask.data[i] = g;
        }
      }
    }
    if (weights.normal > 0.0 && r.normal && obs.normal_map) {
      const Image* m = obs.mask ? &*obs.mask : nullptr;
      LossValue lv = normal_loss(*r.normal, *obs.normal_map, m);
      out.normal += beta * weights.normal * lv.value;
      double s = beta * weights.normal;
      ct.d_normal = std::move(lv.d_pred);
      for (auto& v : ct.d_normal.data) v *= s;
    }
  }

  if (mesh) {
    out.d_vertices.assign(mesh->vertices.size(), Vec3{});
    if (weights.laplacian > 0.0) {
      auto [l, g] = laplacian_loss(*mesh);
      out.laplacian = weights.laplacian * l;
      for (size_t i = 0; i < g.size(); ++i) out.d_vertices[i] += weights.laplacian * g[i];
    }
    if (weights.edge > 0.0) {
      auto [l, g] = edge_length_loss(*mesh);
      out.edge = weights.edge * l;
      for (size_t i = 0; i < g.size(); ++i) out.d_vertices[i] += weights.edge * g[i];
    }
  }

  out.total = out.photo + out.mask + out.smask + out.normal + out.laplacian + out.edge;
  return out;
}

}  // namespace resim
