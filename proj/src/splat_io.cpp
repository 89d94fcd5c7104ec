#include <cmath>
#include <string>

#include "resim/error.hpp"
#include "resim/ply.hpp"
#include "resim/splat.hpp"

namespace resim {

namespace {

constexpr const char* kFixedOpacityComment = "resim_fixed_opacity 1";

// Logit whose sigmoid is exactly 1.0 in double arithmetic; external viewers
// still read it as fully opaque.
constexpr double kClampedLogit = 100.0;

double logit(double p) { return std::log(p / (1.0 - p)); }

}  // namespace

void export_splat_ply(std::span<const WorldGaussian> gaussians, const std::string& path,
                      bool fixed_opacity) {
  int degree = gaussians.empty() ? 0 : gaussians[0].sh_degree;
  for (const auto& g : gaussians)
    if (g.sh_degree != degree)
      throw ShapeError("export_splat_ply: mixed SH degrees");
  const int nc = (degree + 1) * (degree + 1);
  const int n_rest = (nc - 1) * 3;
  const size_t n = gaussians.size();

  PlyFile ply;
  ply.binary = true;
  if (fixed_opacity) ply.comments.push_back(kFixedOpacityComment);

  PlyElement e;
  e.name = "vertex";
  e.count = n;
  std::vector<std::string> names = {"x", "y", "z", "nx", "ny", "nz", "f_dc_0", "f_dc_1", "f_dc_2"};
  for (int k = 0; k < n_rest; ++k) names.push_back("f_rest_" + std::to_string(k));
  names.insert(names.end(), {"opacity", "scale_0", "scale_1", "scale_2",
                             "rot_0", "rot_1", "rot_2", "rot_3"});
  for (const auto& name : names) {
    PlyProperty p;
    p.name = name;
    p.type = PlyProperty::Type::kFloat;
    p.values.resize(n);
    e.properties.push_back(std::move(p));
  }
  // Stable pointers now that the property vector is fully built.
  PlyProperty* pos[3] = {&e.properties[0], &e.properties[1], &e.properties[2]};
  PlyProperty* nrm[3] = {&e.properties[3], &e.properties[4], &e.properties[5]};
  PlyProperty* dc[3] = {&e.properties[6], &e.properties[7], &e.properties[8]};
  std::vector<PlyProperty*> rest(n_rest);
  for (int k = 0; k < n_rest; ++k) rest[k] = &e.properties[9 + k];
  PlyProperty* opacity = &e.properties[9 + n_rest];
  PlyProperty* scale[3] = {&e.properties[10 + n_rest], &e.properties[11 + n_rest],
                           &e.properties[12 + n_rest]};
  PlyProperty* rot[4] = {&e.properties[13 + n_rest], &e.properties[14 + n_rest],
                         &e.properties[15 + n_rest], &e.properties[16 + n_rest]};

  auto f32 = [](double v) { return double(float(v)); };
  for (size_t i = 0; i < n; ++i) {
    const WorldGaussian& g = gaussians[i];
    Vec3 normal = g.rotation.col(2);
    for (int a = 0; a < 3; ++a) {
      pos[a]->values[i] = f32(g.mean[a]);
      nrm[a]->values[i] = f32(normal[a]);
      scale[a]->values[i] = f32(std::log(g.scales[a]));
    }
    for (int c = 0; c < 3; ++c) dc[c]->values[i] = f32(g.sh[c]);
    // f_rest is channel-major: all R coefficients, then G, then B.
    for (int c = 0; c < 3; ++c)
      for (int k = 1; k < nc; ++k)
        rest[c * (nc - 1) + (k - 1)]->values[i] = f32(g.sh[size_t(k) * 3 + c]);
    double lg = fixed_opacity ? kClampedLogit : logit(std::clamp(g.opacity, 1e-12, 1.0 - 1e-12));
    opacity->values[i] = f32(lg);
    Quat q = rotation_to_quat(g.rotation);
    rot[0]->values[i] = f32(q.w);
    rot[1]->values[i] = f32(q.x);
    rot[2]->values[i] = f32(q.y);
    rot[3]->values[i] = f32(q.z);
  }
  ply.elements.push_back(std::move(e));
  write_ply(ply, path);
}

std::vector<WorldGaussian> import_splat_ply(const std::string& path) {
  PlyFile ply = read_ply(path);
  const PlyElement* e = ply.find("vertex");
  if (!e) throw IoError("import_splat_ply: missing vertex element in " + path);

  bool fixed_opacity = false;
  for (const auto& c : ply.comments)
    if (c == kFixedOpacityComment) fixed_opacity = true;

  auto need = [&](const std::string& name) {
    const PlyProperty* p = e->find(name);
    if (!p) throw IoError("import_splat_ply: missing property " + name + " in " + path);
    return p;
  };

  int n_rest = 0;
  while (e->find("f_rest_" + std::to_string(n_rest))) ++n_rest;
  int nc = n_rest / 3 + 1;
  int degree = -1;
  for (int d = 0; d <= 3; ++d)
    if ((d + 1) * (d + 1) == nc) degree = d;
  if (degree < 0 || n_rest % 3 != 0)
    throw IoError("import_splat_ply: unsupported SH layout in " + path);

  const PlyProperty* pos[3] = {need("x"), need("y"), need("z")};
  const PlyProperty* dc[3] = {need("f_dc_0"), need("f_dc_1"), need("f_dc_2")};
  const PlyProperty* opacity = need("opacity");
  const PlyProperty* scale[3] = {need("scale_0"), need("scale_1"), need("scale_2")};
  const PlyProperty* rot[4] = {need("rot_0"), need("rot_1"), need("rot_2"), need("rot_3")};
  std::vector<const PlyProperty*> rest(n_rest);
  for (int k = 0; k < n_rest; ++k) rest[k] = need("f_rest_" + std::to_string(k));

  std::vector<WorldGaussian> out(e->count);
  for (size_t i = 0; i < e->count; ++i) {
    WorldGaussian& g = out[i];
    g.mean = {pos[0]->values[i], pos[1]->values[i], pos[2]->values[i]};
    g.rotation = quat_to_rotation(
        {rot[0]->values[i], rot[1]->values[i], rot[2]->values[i], rot[3]->values[i]});
    g.scales = {std::exp(scale[0]->values[i]), std::exp(scale[1]->values[i]),
                std::exp(scale[2]->values[i])};
    g.sh_degree = degree;
    for (int c = 0; c < 3; ++c) {
      g.sh[c] = dc[c]->values[i];
      for (int k = 1; k < nc; ++k)
        g.sh[size_t(k) * 3 + c] = rest[c * (nc - 1) + (k - 1)]->values[i];
    }
    g.opacity = fixed_opacity ? 1.0 : 1.0 / (1.0 + std::exp(-opacity->values[i]));
  }
  return out;
}

}  // namespace resim
