#include "resim/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <string>

#include "resim/error.hpp"
#include "resim/rng.hpp"

namespace resim {

namespace {

Vec3 face_cross(const TriangleMesh& m, int f) {
  const auto& [a, b, c] = m.faces[f];
  return cross(m.vertices[b] - m.vertices[a], m.vertices[c] - m.vertices[a]);
}

}  // namespace

TriangleMesh make_mesh(std::vector<Vec3> vertices, std::vector<std::array<int, 3>> faces) {
  TriangleMesh m;
  m.vertices = std::move(vertices);
  m.faces = std::move(faces);

  const int nv = m.vertex_count();
  std::vector<std::set<int>> adj(nv);
  for (size_t f = 0; f < m.faces.size(); ++f) {
    for (int k = 0; k < 3; ++k) {
      int i = m.faces[f][k];
      int j = m.faces[f][(k + 1) % 3];
      if (i < 0 || i >= nv || j < 0 || j >= nv)
        throw TopologyError("make_mesh: face " + std::to_string(f) + " references vertex out of range");
      adj[i].insert(j);
      adj[j].insert(i);
    }
    if (norm(face_cross(m, int(f))) <= 1e-12)
      throw DegenerateGeometryError("make_mesh: face " + std::to_string(f) + " has zero area");
  }
  m.adjacency.reserve(nv);
  for (auto& s : adj) m.adjacency.emplace_back(s.begin(), s.end());
  return m;
}

TriangleMesh make_icosphere(int subdivisions, double radius, Vec3 center) {
  if (subdivisions < 0 || subdivisions > 6)
    throw BoundError("make_icosphere: subdivisions must be in [0, 6]");
  if (!(radius > 0.0)) throw BoundError("make_icosphere: radius must be positive");

  const double phi = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Vec3> verts = {
      {-1, phi, 0}, {1, phi, 0}, {-1, -phi, 0}, {1, -phi, 0},
      {0, -1, phi}, {0, 1, phi}, {0, -1, -phi}, {0, 1, -phi},
      {phi, 0, -1}, {phi, 0, 1}, {-phi, 0, -1}, {-phi, 0, 1},
  };
  for (auto& v : verts) v = normalized(v);
  std::vector<std::array<int, 3>> faces = {
      {0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
      {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
      {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
      {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1},
  };

  for (int level = 0; level < subdivisions; ++level) {
    std::map<std::pair<int, int>, int> midpoint;
    auto mid = [&](int a, int b) {
      auto key = std::minmax(a, b);
      auto it = midpoint.find(key);
      if (it != midpoint.end()) return it->second;
      int idx = int(verts.size());
      verts.push_back(normalized(0.5 * (verts[a] + verts[b])));
      midpoint.emplace(key, idx);
      return idx;
    };
    std::vector<std::array<int, 3>> next;
    next.reserve(faces.size() * 4);
    for (const auto& [a, b, c] : faces) {
      int ab = mid(a, b), bc = mid(b, c), ca = mid(c, a);
      next.push_back({a, ab, ca});
      next.push_back({b, bc, ab});
      next.push_back({c, ca, bc});
      next.push_back({ab, bc, ca});
    }
    faces = std::move(next);
  }

  // Enforce outward orientation; on a sphere centered at the origin the
  // normal must point along the face centroid.
  for (auto& f : faces) {
    Vec3 centroid = (verts[f[0]] + verts[f[1]] + verts[f[2]]) / 3.0;
    Vec3 n = cross(verts[f[1]] - verts[f[0]], verts[f[2]] - verts[f[0]]);
    if (dot(n, centroid) < 0.0) std::swap(f[1], f[2]);
  }

  for (auto& v : verts) v = radius * v + center;
  return make_mesh(std::move(verts), std::move(faces));
}

TriangleMesh apply_deformation(const TriangleMesh& mesh, const MeshDeformation& d) {
  if (d.vertex_deltas.size() != mesh.vertices.size())
    throw ShapeError("apply_deformation: delta count does not match vertex count");
  TriangleMesh out;
  out.faces = mesh.faces;
  out.adjacency = mesh.adjacency;
  out.vertices.resize(mesh.vertices.size());
  for (size_t i = 0; i < mesh.vertices.size(); ++i)
    out.vertices[i] = mesh.vertices[i] + d.vertex_deltas[i] + d.global_translation;
  return out;
}

std::vector<Vec3> face_normals(const TriangleMesh& mesh) {
  std::vector<Vec3> normals(mesh.face_count());
  for (int f = 0; f < mesh.face_count(); ++f) {
    Vec3 c = face_cross(mesh, f);
    double area = 0.5 * norm(c);
    if (area < 1e-12)
      throw DegenerateGeometryError("face_normals: face " + std::to_string(f) + " is degenerate");
    normals[f] = c / norm(c);
  }
  return normals;
}

std::vector<double> face_areas(const TriangleMesh& mesh) {
  std::vector<double> areas(mesh.face_count());
  for (int f = 0; f < mesh.face_count(); ++f) areas[f] = 0.5 * norm(face_cross(mesh, f));
  return areas;
}

std::vector<std::pair<int, int>> mesh_edges(const TriangleMesh& mesh) {
  std::set<std::pair<int, int>> edges;
  for (const auto& [a, b, c] : mesh.faces) {
    edges.insert(std::minmax(a, b));
    edges.insert(std::minmax(b, c));
    edges.insert(std::minmax(c, a));
  }
  return {edges.begin(), edges.end()};
}

std::pair<double, std::vector<Vec3>> laplacian_loss(const TriangleMesh& mesh) {
  const int nv = mesh.vertex_count();
  double loss = 0.0;
  std::vector<Vec3> grad(nv);
  std::vector<Vec3> residual(nv);
  for (int i = 0; i < nv; ++i) {
    const auto& nbrs = mesh.adjacency[i];
    if (nbrs.empty())
      throw TopologyError("laplacian_loss: vertex " + std::to_string(i) + " has no neighbors");
    Vec3 centroid;
    for (int j : nbrs) centroid += mesh.vertices[j];
    centroid = centroid / double(nbrs.size());
    residual[i] = mesh.vertices[i] - centroid;
    loss += norm_sq(residual[i]);
  }
  for (int i = 0; i < nv; ++i) {
    grad[i] += 2.0 * residual[i];
    double w = -2.0 / double(mesh.adjacency[i].size());
    for (int j : mesh.adjacency[i]) grad[j] += w * residual[i];
  }
  return {loss, std::move(grad)};
}

std::pair<double, std::vector<Vec3>> edge_length_loss(const TriangleMesh& mesh) {
  auto edges = mesh_edges(mesh);
  if (edges.empty()) throw TopologyError("edge_length_loss: mesh has no edges");

  std::vector<double> lengths(edges.size());
  double mean = 0.0;
  for (size_t e = 0; e < edges.size(); ++e) {
    lengths[e] = norm(mesh.vertices[edges[e].first] - mesh.vertices[edges[e].second]);
    mean += lengths[e];
  }
  mean /= double(edges.size());

  double loss = 0.0;
  std::vector<Vec3> grad(mesh.vertex_count());
  for (size_t e = 0; e < edges.size(); ++e) {
    double r = lengths[e] - mean;
    loss += r * r;
    if (lengths[e] > 0.0) {
      Vec3 dir = (mesh.vertices[edges[e].first] - mesh.vertices[edges[e].second]) / lengths[e];
      grad[edges[e].first] += 2.0 * r * dir;
      grad[edges[e].second] -= 2.0 * r * dir;
    }
  }
  return {loss, std::move(grad)};
}

std::vector<int> allocate_gaussians(const TriangleMesh& mesh, double avg_per_face,
                                    uint64_t rng_seed) {
  if (avg_per_face < 1.0 || avg_per_face > 64.0)
    throw BoundError("allocate_gaussians: avg_per_face must be in [1, 64]");
  auto areas = face_areas(mesh);
  double total = 0.0;
  for (double a : areas) total += a;
  if (total <= 0.0) throw DegenerateGeometryError("allocate_gaussians: mesh has zero total area");

  const double budget = avg_per_face * double(mesh.face_count());
  std::vector<int> counts(mesh.face_count());
  for (int f = 0; f < mesh.face_count(); ++f) {
    double expected = budget * areas[f] / total;
    double fl = std::floor(expected);
    double frac = expected - fl;
    int n = int(fl);
    if (frac > 0.0 && Rng::keyed(rng_seed, uint64_t(f)).bernoulli(frac)) ++n;
    counts[f] = n;
  }
  return counts;
}

}  // namespace resim
