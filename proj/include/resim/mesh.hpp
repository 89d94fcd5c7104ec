#pragma once

#include <array>
#include <cstdint>
#include <utility>
#include <vector>

#include "resim/vec.hpp"

namespace resim {

// Fixed-topology triangle mesh. Faces and adjacency are immutable after
// construction; only vertex positions change (via apply_deformation).
struct TriangleMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 3>> faces;
  std::vector<std::vector<int>> adjacency;  // sorted edge-connected neighbors

  int vertex_count() const { return int(vertices.size()); }
  int face_count() const { return int(faces.size()); }
};

// Validates indices, builds symmetric adjacency, rejects zero-area faces.
TriangleMesh make_mesh(std::vector<Vec3> vertices, std::vector<std::array<int, 3>> faces);

// Subdivided icosahedron projected onto the sphere. V = 10*4^s + 2.
TriangleMesh make_icosphere(int subdivisions, double radius, Vec3 center = {});

struct MeshDeformation {
  std::vector<Vec3> vertex_deltas;
  Vec3 global_translation;

  static MeshDeformation zeros(int vertex_count) {
    return {std::vector<Vec3>(vertex_count), Vec3{}};
  }
};

// vertices' = vertices + deltas + global_translation; connectivity shared.
TriangleMesh apply_deformation(const TriangleMesh& mesh, const MeshDeformation& d);

// Unit normals by right-hand rule over (v2-v1) x (v3-v1).
std::vector<Vec3> face_normals(const TriangleMesh& mesh);

std::vector<double> face_areas(const TriangleMesh& mesh);

// Unique undirected edges, each as (i, j) with i < j, lexicographically sorted.
std::vector<std::pair<int, int>> mesh_edges(const TriangleMesh& mesh);

// L = sum_i || v_i - mean_{j in N(i)} v_j ||^2 and its exact vertex gradient.
std::pair<double, std::vector<Vec3>> laplacian_loss(const TriangleMesh& mesh);

// L = sum_edges (|e| - mean_edge_length)^2; the mean is treated as a constant
// for the gradient (which coincides with the full gradient since the
// residuals sum to zero).
std::pair<double, std::vector<Vec3>> edge_length_loss(const TriangleMesh& mesh);

// Per-face Gaussian counts: expected value avg_per_face * F * area_f / total,
// realized by floor + Bernoulli on the fractional part, keyed on
// (seed, face index) so counts are independent of iteration order.
std::vector<int> allocate_gaussians(const TriangleMesh& mesh, double avg_per_face,
                                    uint64_t rng_seed);

}  // namespace resim
