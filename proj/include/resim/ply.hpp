#pragma once

#include <string>
#include <vector>

#include "resim/mesh.hpp"

namespace resim {

// Minimal PLY model: scalar properties held as doubles, plus one optional
// list property per element (sufficient for mesh faces).
struct PlyProperty {
  enum class Type { kFloat, kDouble, kUchar, kInt, kUint };
  std::string name;
  Type type = Type::kFloat;
  bool is_list = false;
  Type count_type = Type::kUchar;
  std::vector<double> values;               // scalar payload, element-major
  std::vector<std::vector<double>> lists;   // list payload
};

struct PlyElement {
  std::string name;
  size_t count = 0;
  std::vector<PlyProperty> properties;

  const PlyProperty* find(const std::string& prop) const;
};

struct PlyFile {
  bool binary = true;  // binary_little_endian
  std::vector<std::string> comments;
  std::vector<PlyElement> elements;

  const PlyElement* find(const std::string& element) const;
};

PlyFile read_ply(const std::string& path);
void write_ply(const PlyFile& ply, const std::string& path);

// Mesh exchange: vertex x/y/z float32, optional uchar red/green/blue,
// faces as uchar-counted int32 vertex_indices.
void save_mesh_ply(const TriangleMesh& mesh, const std::string& path,
                   const std::vector<Vec3>* vertex_colors = nullptr, bool binary = true);
TriangleMesh load_mesh_ply(const std::string& path, std::vector<Vec3>* colors_out = nullptr);

}  // namespace resim
