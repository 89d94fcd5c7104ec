#include "resim/ply.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "resim/error.hpp"

namespace resim {

namespace {

using Type = PlyProperty::Type;

size_t type_size(Type t) {
  switch (t) {
    case Type::kFloat: return 4;
    case Type::kDouble: return 8;
    case Type::kUchar: return 1;
    case Type::kInt: return 4;
    case Type::kUint: return 4;
  }
  return 0;
}

const char* type_name(Type t) {
  switch (t) {
    case Type::kFloat: return "float";
    case Type::kDouble: return "double";
    case Type::kUchar: return "uchar";
    case Type::kInt: return "int";
    case Type::kUint: return "uint";
  }
  return "?";
}

Type parse_type(const std::string& s) {
  if (s == "float" || s == "float32") return Type::kFloat;
  if (s == "double" || s == "float64") return Type::kDouble;
  if (s == "uchar" || s == "uint8") return Type::kUchar;
  if (s == "int" || s == "int32") return Type::kInt;
  if (s == "uint" || s == "uint32") return Type::kUint;
  throw IoError("ply: unsupported property type " + s);
}

void write_scalar(std::ostream& os, Type t, double v, bool binary) {
  if (!binary) {
    if (t == Type::kUchar || t == Type::kInt || t == Type::kUint)
      os << (long long)(std::llround(v));
    else
      os << v;
    return;
  }
  switch (t) {
    case Type::kFloat: {
      float f = float(v);
      os.write(reinterpret_cast<const char*>(&f), 4);
      break;
    }
    case Type::kDouble:
      os.write(reinterpret_cast<const char*>(&v), 8);
      break;
    case Type::kUchar: {
      unsigned char b = (unsigned char)(std::llround(v));
      os.write(reinterpret_cast<const char*>(&b), 1);
      break;
    }
    case Type::kInt: {
      int32_t i = int32_t(std::llround(v));
      os.write(reinterpret_cast<const char*>(&i), 4);
      break;
    }
    case Type::kUint: {
      uint32_t u = uint32_t(std::llround(v));
      os.write(reinterpret_cast<const char*>(&u), 4);
      break;
    }
  }
}

double read_scalar_binary(std::istream& is, Type t) {
  char buf[8];
  is.read(buf, std::streamsize(type_size(t)));
  switch (t) {
    case Type::kFloat: {
      float f;
      std::memcpy(&f, buf, 4);
      return double(f);
    }
    case Type::kDouble: {
      double d;
      std::memcpy(&d, buf, 8);
      return d;
    }
    case Type::kUchar:
      return double((unsigned char)buf[0]);
    case Type::kInt: {
      int32_t i;
      std::memcpy(&i, buf, 4);
      return double(i);
    }
    case Type::kUint: {
      uint32_t u;
      std::memcpy(&u, buf, 4);
      return double(u);
    }
  }
  return 0.0;
}

}  // namespace

const PlyProperty* PlyElement::find(const std::string& prop) const {
  for (const auto& p : properties)
    if (p.name == prop) return &p;
  return nullptr;
}

const PlyElement* PlyFile::find(const std::string& element) const {
  for (const auto& e : elements)
    if (e.name == element) return &e;
  return nullptr;
}

PlyFile read_ply(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("read_ply: cannot open " + path);

  std::string line;
  if (!std::getline(in, line) || line.rfind("ply", 0) != 0)
    throw IoError("read_ply: " + path + " is not a PLY file");

  PlyFile ply;
  bool have_format = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ss(line);
    std::string tok;
    ss >> tok;
    if (tok == "comment") {
      ply.comments.push_back(line.size() > 8 ? line.substr(8) : "");
    } else if (tok == "format") {
      std::string fmt;
      ss >> fmt;
      if (fmt == "binary_little_endian") ply.binary = true;
      else if (fmt == "ascii") ply.binary = false;
      else throw IoError("read_ply: unsupported format " + fmt);
      have_format = true;
    } else if (tok == "element") {
      PlyElement e;
      ss >> e.name >> e.count;
      ply.elements.push_back(std::move(e));
    } else if (tok == "property") {
      if (ply.elements.empty()) throw IoError("read_ply: property before element");
      PlyProperty p;
      std::string t1;
      ss >> t1;
      if (t1 == "list") {
        std::string ct, vt;
        ss >> ct >> vt >> p.name;
        p.is_list = true;
        p.count_type = parse_type(ct);
        p.type = parse_type(vt);
      } else {
        p.type = parse_type(t1);
        ss >> p.name;
      }
      ply.elements.back().properties.push_back(std::move(p));
    } else if (tok == "end_header") {
      break;
    } else if (tok == "obj_info" || tok.empty()) {
      continue;
    } else {
      throw IoError("read_ply: unexpected header token " + tok);
    }
  }
  if (!have_format) throw IoError("read_ply: missing format line");

  for (auto& e : ply.elements) {
    for (auto& p : e.properties) {
      if (p.is_list) p.lists.reserve(e.count);
      else p.values.reserve(e.count);
    }
    for (size_t i = 0; i < e.count; ++i) {
      for (auto& p : e.properties) {
        if (ply.binary) {
          if (p.is_list) {
            size_t n = size_t(read_scalar_binary(in, p.count_type));
            std::vector<double> vals(n);
            for (size_t k = 0; k < n; ++k) vals[k] = read_scalar_binary(in, p.type);
            p.lists.push_back(std::move(vals));
          } else {
            p.values.push_back(read_scalar_binary(in, p.type));
          }
        } else {
          if (p.is_list) {
            size_t n = 0;
            in >> n;
            std::vector<double> vals(n);
            for (size_t k = 0; k < n; ++k) in >> vals[k];
            p.lists.push_back(std::move(vals));
          } else {
            double v = 0.0;
            in >> v;
            p.values.push_back(v);
          }
        }
      }
    }
    if (!in) throw IoError("read_ply: truncated payload in " + path);
  }
  return ply;
}

void write_ply(const PlyFile& ply, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("write_ply: cannot open " + path);

  os << "ply\n";
  os << "format " << (ply.binary ? "binary_little_endian" : "ascii") << " 1.0\n";
  for (const auto& c : ply.comments) os << "comment " << c << "\n";
  for (const auto& e : ply.elements) {
    os << "element " << e.name << " " << e.count << "\n";
    for (const auto& p : e.properties) {
      if (p.is_list)
        os << "property list " << type_name(p.count_type) << " " << type_name(p.type) << " "
           << p.name << "\n";
      else
        os << "property " << type_name(p.type) << " " << p.name << "\n";
    }
  }
  os << "end_header\n";

  if (!ply.binary) os.precision(9);
  for (const auto& e : ply.elements) {
    for (size_t i = 0; i < e.count; ++i) {
      bool first = true;
      for (const auto& p : e.properties) {
        if (!ply.binary && !first) os << " ";
        first = false;
        if (p.is_list) {
          const auto& vals = p.lists[i];
          write_scalar(os, p.count_type, double(vals.size()), ply.binary);
          for (double v : vals) {
            if (!ply.binary) os << " ";
            write_scalar(os, p.type, v, ply.binary);
          }
        } else {
          write_scalar(os, p.type, p.values[i], ply.binary);
        }
      }
      if (!ply.binary) os << "\n";
    }
  }
  if (!os) throw IoError("write_ply: failed writing " + path);
}

void save_mesh_ply(const TriangleMesh& mesh, const std::string& path,
                   const std::vector<Vec3>* vertex_colors, bool binary) {
  if (vertex_colors && vertex_colors->size() != mesh.vertices.size())
    throw ShapeError("save_mesh_ply: color count mismatch");

  PlyFile ply;
  ply.binary = binary;
  PlyElement verts;
  verts.name = "vertex";
  verts.count = mesh.vertices.size();
  const char* axes[3] = {"x", "y", "z"};
  for (int a = 0; a < 3; ++a) {
    PlyProperty p;
    p.name = axes[a];
    p.type = Type::kFloat;
    p.values.reserve(mesh.vertices.size());
    for (const auto& v : mesh.vertices) p.values.push_back(double(float(v[a])));
    verts.properties.push_back(std::move(p));
  }
  if (vertex_colors) {
    const char* chans[3] = {"red", "green", "blue"};
    for (int c = 0; c < 3; ++c) {
      PlyProperty p;
      p.name = chans[c];
      p.type = Type::kUchar;
      p.values.reserve(mesh.vertices.size());
      for (const auto& col : *vertex_colors) {
        double v = std::clamp(col[c], 0.0, 1.0);
        p.values.push_back(std::floor(v * 255.0 + 0.5));
      }
      verts.properties.push_back(std::move(p));
    }
  }
  ply.elements.push_back(std::move(verts));

  PlyElement faces;
  faces.name = "face";
  faces.count = mesh.faces.size();
  PlyProperty idx;
  idx.name = "vertex_indices";
  idx.is_list = true;
  idx.count_type = Type::kUchar;
  idx.type = Type::kInt;
  idx.lists.reserve(mesh.faces.size());
  for (const auto& f : mesh.faces)
    idx.lists.push_back({double(f[0]), double(f[1]), double(f[2])});
  faces.properties.push_back(std::move(idx));
  ply.elements.push_back(std::move(faces));

  write_ply(ply, path);
}

TriangleMesh load_mesh_ply(const std::string& path, std::vector<Vec3>* colors_out) {
  PlyFile ply = read_ply(path);
  const PlyElement* verts = ply.find("vertex");
  const PlyElement* faces = ply.find("face");
  if (!verts || !faces) throw IoError("load_mesh_ply: missing vertex or face element in " + path);

  const PlyProperty* x = verts->find("x");
  const PlyProperty* y = verts->find("y");
  const PlyProperty* z = verts->find("z");
  if (!x || !y || !z) throw IoError("load_mesh_ply: missing coordinates in " + path);

  std::vector<Vec3> vs(verts->count);
  for (size_t i = 0; i < verts->count; ++i) vs[i] = {x->values[i], y->values[i], z->values[i]};

  const PlyProperty* idx = faces->find("vertex_indices");
  if (!idx) idx = faces->find("vertex_index");
  if (!idx || !idx->is_list) throw IoError("load_mesh_ply: missing face indices in " + path);
  std::vector<std::array<int, 3>> fs;
  fs.reserve(faces->count);
  for (const auto& lst : idx->lists) {
    if (lst.size() != 3) throw IoError("load_mesh_ply: non-triangular face in " + path);
    fs.push_back({int(lst[0]), int(lst[1]), int(lst[2])});
  }

  if (colors_out) {
    const PlyProperty* r = verts->find("red");
    const PlyProperty* g = verts->find("green");
    const PlyProperty* b = verts->find("blue");
    colors_out->clear();
    if (r && g && b) {
      colors_out->resize(verts->count);
      for (size_t i = 0; i < verts->count; ++i)
        (*colors_out)[i] = {r->values[i] / 255.0, g->values[i] / 255.0, b->values[i] / 255.0};
    }
  }
  return make_mesh(std::move(vs), std::move(fs));
}

}  // namespace resim
