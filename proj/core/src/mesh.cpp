#include "hoa/mesh.hpp"

#include <algorithm>
#include <cstring>
#include <map>
#include <sstream>
#include <unordered_map>

#include "hoa/error.hpp"
#include "hoa/random.hpp"
#include "io_util.hpp"

namespace hoa {

void TriangleMesh::validate() const {
  const int n = static_cast<int>(vertices.size());
  for (const auto& tri : triangles) {
    for (int idx : tri) {
      if (idx < 0 || idx >= n) {
        throw Error(ErrorCode::kInvalidArgument,
                    "triangle index " + std::to_string(idx) +
                        " out of range for " + std::to_string(n) +
                        " vertices");
      }
    }
  }
  if (!colors.empty() && colors.size() != vertices.size()) {
    throw Error(ErrorCode::kInvalidArgument, "color count mismatch");
  }
}

std::size_t TriangleMesh::remove_degenerate_triangles(double min_area) {
  const std::size_t before = triangles.size();
  std::erase_if(triangles, [&](const Triangle& t) {
    if (t[0] == t[1] || t[1] == t[2] || t[0] == t[2]) return true;
    const Vec3 e1 = vertices[t[1]] - vertices[t[0]];
    const Vec3 e2 = vertices[t[2]] - vertices[t[0]];
    return 0.5 * e1.cross(e2).norm() <= min_area;
  });
  return before - triangles.size();
}

std::size_t TriangleMesh::boundary_edge_count() const {
  std::unordered_map<std::uint64_t, int> uses;
  uses.reserve(triangles.size() * 3);
  for (const auto& t : triangles) {
    for (int k = 0; k < 3; ++k) {
      const auto a = static_cast<std::uint32_t>(t[k]);
      const auto b = static_cast<std::uint32_t>(t[(k + 1) % 3]);
      const std::uint64_t key =
          (static_cast<std::uint64_t>(std::min(a, b)) << 32) | std::max(a, b);
      ++uses[key];
    }
  }
  return static_cast<std::size_t>(std::count_if(
      uses.begin(), uses.end(), [](const auto& kv) { return kv.second != 2; }));
}

double TriangleMesh::surface_area() const {
  double area = 0.0;
  for (const auto& t : triangles) {
    area += 0.5 * (vertices[t[1]] - vertices[t[0]])
                      .cross(vertices[t[2]] - vertices[t[0]])
                      .norm();
  }
  return area;
}

Vec3 TriangleMesh::triangle_normal(std::size_t t) const {
  const auto& tri = triangles[t];
  return (vertices[tri[1]] - vertices[tri[0]])
      .cross(vertices[tri[2]] - vertices[tri[0]])
      .normalized();
}

void TriangleMesh::bounds(Vec3& lo, Vec3& hi) const {
  lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  hi = -lo;
  for (const auto& v : vertices) {
    lo = lo.cwiseMin(v);
    hi = hi.cwiseMax(v);
  }
}

TriangleMesh TriangleMesh::transformed(const RigidTransform& transform) const {
  TriangleMesh out = *this;
  for (auto& v : out.vertices) v = transform * v;
  return out;
}

TriangleMesh make_icosphere(double radius, int subdivisions) {
  const double phi = (1.0 + std::sqrt(5.0)) / 2.0;
  TriangleMesh mesh;
  mesh.vertices = {{-1, phi, 0}, {1, phi, 0},   {-1, -phi, 0}, {1, -phi, 0},
                   {0, -1, phi}, {0, 1, phi},   {0, -1, -phi}, {0, 1, -phi},
                   {phi, 0, -1}, {phi, 0, 1},   {-phi, 0, -1}, {-phi, 0, 1}};
  mesh.triangles = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10},
                    {0, 10, 11}, {1, 5, 9}, {5, 11, 4},  {11, 10, 2},
                    {10, 7, 6}, {7, 1, 8},  {3, 9, 4},   {3, 4, 2},
                    {3, 2, 6},  {3, 6, 8},  {3, 8, 9},   {4, 9, 5},
                    {2, 4, 11}, {6, 2, 10}, {8, 6, 7},   {9, 8, 1}};
  for (auto& v : mesh.vertices) v.normalize();
  for (int s = 0; s < subdivisions; ++s) {
    std::map<std::pair<int, int>, int> midpoints;
    auto midpoint = [&](int a, int b) {
      const auto key = std::minmax(a, b);
      const auto it = midpoints.find(key);
      if (it != midpoints.end()) return it->second;
      mesh.vertices.push_back(
          (mesh.vertices[a] + mesh.vertices[b]).normalized());
      const int idx = static_cast<int>(mesh.vertices.size()) - 1;
      midpoints.emplace(key, idx);
      return idx;
    };
    std::vector<Triangle> next;
    next.reserve(mesh.triangles.size() * 4);
    for (const auto& t : mesh.triangles) {
      const int ab = midpoint(t[0], t[1]);
      const int bc = midpoint(t[1], t[2]);
      const int ca = midpoint(t[2], t[0]);
      next.push_back({t[0], ab, ca});
      next.push_back({t[1], bc, ab});
      next.push_back({t[2], ca, bc});
      next.push_back({ab, bc, ca});
    }
    mesh.triangles = std::move(next);
  }
  for (auto& v : mesh.vertices) v *= radius;
  return mesh;
}

TriangleMesh make_box(const Vec3& size) {
  const Vec3 h = 0.5 * size;
  TriangleMesh mesh;
  for (int i = 0; i < 8; ++i) {
    mesh.vertices.emplace_back((i & 1) ? h.x() : -h.x(),
                               (i & 2) ? h.y() : -h.y(),
                               (i & 4) ? h.z() : -h.z());
  }
  // Outward-facing quads split into two triangles each.
  const int quads[6][4] = {{0, 2, 3, 1}, {4, 5, 7, 6}, {0, 1, 5, 4},
                           {2, 6, 7, 3}, {0, 4, 6, 2}, {1, 3, 7, 5}};
  for (const auto& q : quads) {
    mesh.triangles.push_back({q[0], q[1], q[2]});
    mesh.triangles.push_back({q[0], q[2], q[3]});
  }
  return mesh;
}

std::vector<SurfaceSample> sample_surface(const TriangleMesh& mesh,
                                          std::size_t count, Rng& rng) {
  std::vector<double> cumulative(mesh.triangles.size());
  double total = 0.0;
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    const auto& tri = mesh.triangles[t];
    total += 0.5 * (mesh.vertices[tri[1]] - mesh.vertices[tri[0]])
                       .cross(mesh.vertices[tri[2]] - mesh.vertices[tri[0]])
                       .norm();
    cumulative[t] = total;
  }
  std::vector<SurfaceSample> out;
  if (mesh.triangles.empty() || total <= 0.0) return out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const double r = rng.uniform() * total;
    std::size_t t = static_cast<std::size_t>(
        std::upper_bound(cumulative.begin(), cumulative.end(), r) -
        cumulative.begin());
    t = std::min(t, mesh.triangles.size() - 1);
    double u = rng.uniform();
    double v = rng.uniform();
    if (u + v > 1.0) {
      u = 1.0 - u;
      v = 1.0 - v;
    }
    const auto& tri = mesh.triangles[t];
    const Vec3 p = mesh.vertices[tri[0]] +
                   u * (mesh.vertices[tri[1]] - mesh.vertices[tri[0]]) +
                   v * (mesh.vertices[tri[2]] - mesh.vertices[tri[0]]);
    out.push_back({p, mesh.triangle_normal(t), t});
  }
  return out;
}

// ---------------------------------------------------------------------------
// PLY

namespace {

enum class PlyType { kChar, kUChar, kShort, kUShort, kInt, kUInt, kFloat, kDouble };

PlyType parse_ply_type(const std::string& s) {
  if (s == "char" || s == "int8") return PlyType::kChar;
  if (s == "uchar" || s == "uint8") return PlyType::kUChar;
  if (s == "short" || s == "int16") return PlyType::kShort;
  if (s == "ushort" || s == "uint16") return PlyType::kUShort;
  if (s == "int" || s == "int32") return PlyType::kInt;
  if (s == "uint" || s == "uint32") return PlyType::kUInt;
  if (s == "float" || s == "float32") return PlyType::kFloat;
  if (s == "double" || s == "float64") return PlyType::kDouble;
  throw Error(ErrorCode::kFormat, "unknown PLY type '" + s + "'");
}

std::size_t ply_type_size(PlyType t) {
  switch (t) {
    case PlyType::kChar:
    case PlyType::kUChar: return 1;
    case PlyType::kShort:
    case PlyType::kUShort: return 2;
    case PlyType::kInt:
    case PlyType::kUInt:
    case PlyType::kFloat: return 4;
    case PlyType::kDouble: return 8;
  }
  return 0;
}

struct PlyProperty {
  std::string name;
  PlyType type = PlyType::kFloat;
  bool is_list = false;
  PlyType count_type = PlyType::kUChar;
};

struct PlyElement {
  std::string name;
  std::size_t count = 0;
  std::vector<PlyProperty> properties;
};

class PlyCursor {
 public:
  PlyCursor(const std::string& data, std::size_t offset, bool binary)
      : data_(data), pos_(offset), binary_(binary) {}

  double read(PlyType type) {
    if (!binary_) return next_ascii();
    const std::size_t size = ply_type_size(type);
    if (pos_ + size > data_.size()) {
      throw Error(ErrorCode::kFormat, "truncated binary PLY body");
    }
    const char* p = data_.data() + pos_;
    pos_ += size;
    switch (type) {
      case PlyType::kChar: { std::int8_t v; std::memcpy(&v, p, 1); return v; }
      case PlyType::kUChar: { std::uint8_t v; std::memcpy(&v, p, 1); return v; }
      case PlyType::kShort: { std::int16_t v; std::memcpy(&v, p, 2); return v; }
      case PlyType::kUShort: { std::uint16_t v; std::memcpy(&v, p, 2); return v; }
      case PlyType::kInt: { std::int32_t v; std::memcpy(&v, p, 4); return v; }
      case PlyType::kUInt: { std::uint32_t v; std::memcpy(&v, p, 4); return v; }
      case PlyType::kFloat: { float v; std::memcpy(&v, p, 4); return v; }
      case PlyType::kDouble: { double v; std::memcpy(&v, p, 8); return v; }
    }
    return 0.0;
  }

 private:
  double next_ascii() {
    while (pos_ < data_.size() && std::isspace(static_cast<unsigned char>(data_[pos_]))) ++pos_;
    const std::size_t start = pos_;
    while (pos_ < data_.size() && !std::isspace(static_cast<unsigned char>(data_[pos_]))) ++pos_;
    if (start == pos_) throw Error(ErrorCode::kFormat, "truncated ascii PLY body");
    return detail::parse_double(std::string_view(data_).substr(start, pos_ - start));
  }

  const std::string& data_;
  std::size_t pos_;
  bool binary_;
};

struct PlyContents {
  std::vector<Vec3> vertices;
  std::vector<Color> colors;
  std::vector<int> labels;
  std::vector<Triangle> triangles;
};

PlyContents read_ply(const std::filesystem::path& path) {
  const std::string data = detail::read_file(path);
  const std::size_t header_end = data.find("end_header");
  if (data.rfind("ply", 0) != 0 || header_end == std::string::npos) {
    throw Error(ErrorCode::kFormat, path.string() + ": not a PLY file");
  }
  std::size_t body = data.find('\n', header_end);
  body = body == std::string::npos ? data.size() : body + 1;

  std::istringstream header(data.substr(0, header_end));
  std::string line;
  bool binary = false;
  std::vector<PlyElement> elements;
  while (std::getline(header, line)) {
    std::istringstream ls(line);
    std::string keyword;
    ls >> keyword;
    if (keyword == "format") {
      std::string fmt;
      ls >> fmt;
      if (fmt == "binary_little_endian") {
        binary = true;
      } else if (fmt != "ascii") {
        throw Error(ErrorCode::kFormat,
                    path.string() + ": unsupported PLY format " + fmt);
      }
    } else if (keyword == "element") {
      PlyElement e;
      ls >> e.name >> e.count;
      elements.push_back(e);
    } else if (keyword == "property") {
      if (elements.empty()) {
        throw Error(ErrorCode::kFormat, path.string() + ": orphan property");
      }
      PlyProperty p;
      std::string type;
      ls >> type;
      if (type == "list") {
        std::string count_type, item_type;
        ls >> count_type >> item_type >> p.name;
        p.is_list = true;
        p.count_type = parse_ply_type(count_type);
        p.type = parse_ply_type(item_type);
      } else {
        p.type = parse_ply_type(type);
        ls >> p.name;
      }
      elements.back().properties.push_back(p);
    }
  }

  PlyContents out;
  PlyCursor cursor(data, body, binary);
  for (const auto& element : elements) {
    const bool is_vertex = element.name == "vertex";
    const bool is_face = element.name == "face";
    for (std::size_t i = 0; i < element.count; ++i) {
      Vec3 pos = Vec3::Zero();
      Color color{0, 0, 0};
      bool has_color = false;
      int label = 0;
      bool has_label = false;
      for (const auto& prop : element.properties) {
        if (prop.is_list) {
          const auto n = static_cast<std::size_t>(cursor.read(prop.count_type));
          std::vector<int> idx(n);
          for (auto& v : idx) v = static_cast<int>(cursor.read(prop.type));
          if (is_face && (prop.name == "vertex_indices" || prop.name == "vertex_index")) {
            for (std::size_t k = 1; k + 1 < n; ++k) {
              out.triangles.push_back({idx[0], idx[k], idx[k + 1]});
            }
          }
          continue;
        }
        const double value = cursor.read(prop.type);
        if (!is_vertex) continue;
        if (prop.name == "x") pos.x() = value;
        else if (prop.name == "y") pos.y() = value;
        else if (prop.name == "z") pos.z() = value;
        else if (prop.name == "red") { color[0] = static_cast<std::uint8_t>(value); has_color = true; }
        else if (prop.name == "green") color[1] = static_cast<std::uint8_t>(value);
        else if (prop.name == "blue") color[2] = static_cast<std::uint8_t>(value);
        else if (prop.name == "label") { label = static_cast<int>(value); has_label = true; }
      }
      if (is_vertex) {
        out.vertices.push_back(pos);
        if (has_color) out.colors.push_back(color);
        if (has_label) out.labels.push_back(label);
      }
    }
  }
  return out;
}

void append_raw(std::string& out, const void* p, std::size_t n) {
  out.append(static_cast<const char*>(p), n);
}

}  // namespace

TriangleMesh load_ply_mesh(const std::filesystem::path& path) {
  PlyContents ply = read_ply(path);
  TriangleMesh mesh;
  mesh.vertices = std::move(ply.vertices);
  mesh.triangles = std::move(ply.triangles);
  if (ply.colors.size() == mesh.vertices.size()) mesh.colors = std::move(ply.colors);
  mesh.validate();
  mesh.remove_degenerate_triangles();
  return mesh;
}

PointCloud load_ply_cloud(const std::filesystem::path& path) {
  PlyContents ply = read_ply(path);
  PointCloud cloud;
  cloud.points = std::move(ply.vertices);
  if (ply.labels.size() == cloud.points.size()) cloud.labels = std::move(ply.labels);
  return cloud;
}

std::string ply_mesh_bytes(const TriangleMesh& mesh) {
  const bool color = !mesh.colors.empty();
  std::ostringstream h;
  h << "ply\nformat binary_little_endian 1.0\n"
    << "element vertex " << mesh.vertices.size() << "\n"
    << "property float x\nproperty float y\nproperty float z\n";
  if (color) h << "property uchar red\nproperty uchar green\nproperty uchar blue\n";
  h << "element face " << mesh.triangles.size() << "\n"
    << "property list uchar int vertex_indices\nend_header\n";
  std::string out = h.str();
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
    for (int k = 0; k < 3; ++k) {
      const float f = static_cast<float>(mesh.vertices[i][k]);
      append_raw(out, &f, 4);
    }
    if (color) append_raw(out, mesh.colors[i].data(), 3);
  }
  for (const auto& t : mesh.triangles) {
    const std::uint8_t n = 3;
    append_raw(out, &n, 1);
    for (int k = 0; k < 3; ++k) {
      const std::int32_t idx = t[k];
      append_raw(out, &idx, 4);
    }
  }
  return out;
}

std::string ply_cloud_bytes(const PointCloud& cloud) {
  const bool labels = !cloud.labels.empty();
  std::ostringstream h;
  h << "ply\nformat binary_little_endian 1.0\n"
    << "element vertex " << cloud.points.size() << "\n"
    << "property float x\nproperty float y\nproperty float z\n";
  if (labels) h << "property int label\n";
  h << "end_header\n";
  std::string out = h.str();
  for (std::size_t i = 0; i < cloud.points.size(); ++i) {
    for (int k = 0; k < 3; ++k) {
      const float f = static_cast<float>(cloud.points[i][k]);
      append_raw(out, &f, 4);
    }
    if (labels) {
      const std::int32_t l = cloud.labels[i];
      append_raw(out, &l, 4);
    }
  }
  return out;
}

void save_ply_mesh(const std::filesystem::path& path, const TriangleMesh& mesh) {
  detail::write_file_atomic(path, ply_mesh_bytes(mesh));
}

void save_ply_cloud(const std::filesystem::path& path, const PointCloud& cloud) {
  detail::write_file_atomic(path, ply_cloud_bytes(cloud));
}

}  // namespace hoa
