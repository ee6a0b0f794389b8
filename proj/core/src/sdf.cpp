#include "hoa/sdf.hpp"

#include <cmath>
#include <cstring>

#include "hoa/error.hpp"
#include "hoa/mesh_query.hpp"
#include "io_util.hpp"

namespace hoa {

VoxelSdf::VoxelSdf(const Vec3& origin, double voxel_size,
                   const std::array<int, 3>& dims, std::vector<float> values)
    : origin_(origin), voxel_size_(voxel_size), dims_(dims),
      values_(std::move(values)) {
  if (!(voxel_size > 0.0) || dims[0] < 2 || dims[1] < 2 || dims[2] < 2) {
    throw Error(ErrorCode::kInvalidArgument,
                "sdf grid needs voxel_size > 0 and at least 2 nodes per axis");
  }
  const std::size_t expected =
      static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
  if (values_.size() != expected) {
    throw Error(ErrorCode::kInvalidArgument,
                "sdf value count " + std::to_string(values_.size()) +
                    " does not match dims (" + std::to_string(expected) + ")");
  }
}

Vec3 VoxelSdf::upper() const {
  return origin_ + voxel_size_ * Vec3(dims_[0] - 1, dims_[1] - 1, dims_[2] - 1);
}

Vec3 VoxelSdf::node_position(int i, int j, int k) const {
  return origin_ + voxel_size_ * Vec3(i, j, k);
}

bool VoxelSdf::contains(const Vec3& p, double margin) const {
  const Vec3 hi = upper();
  for (int a = 0; a < 3; ++a) {
    if (p[a] < origin_[a] + margin || p[a] > hi[a] - margin) return false;
  }
  return true;
}

double VoxelSdf::query(const Vec3& p) const { return query(p, nullptr); }

double VoxelSdf::query(const Vec3& p, Vec3* gradient) const {
  // Continuous grid coordinates, clamped into the box.
  std::array<double, 3> f{};
  std::array<bool, 3> clamped{};
  Vec3 inside = p;
  for (int a = 0; a < 3; ++a) {
    double g = (p[a] - origin_[a]) / voxel_size_;
    const double r = std::round(g);
    if (std::abs(g - r) < 1e-9) g = r;
    const double top = dims_[a] - 1;
    if (g < 0.0) {
      g = 0.0;
      clamped[a] = true;
    } else if (g > top) {
      g = top;
      clamped[a] = true;
    }
    f[a] = g;
    if (clamped[a]) inside[a] = origin_[a] + g * voxel_size_;
  }

  std::array<int, 3> i0{};
  std::array<double, 3> t{};
  for (int a = 0; a < 3; ++a) {
    i0[a] = std::min(static_cast<int>(std::floor(f[a])), dims_[a] - 2);
    t[a] = f[a] - i0[a];
  }
  auto v = [&](int dx, int dy, int dz) {
    return static_cast<double>(node_value(i0[0] + dx, i0[1] + dy, i0[2] + dz));
  };
  const double v000 = v(0, 0, 0), v100 = v(1, 0, 0), v010 = v(0, 1, 0),
               v110 = v(1, 1, 0), v001 = v(0, 0, 1), v101 = v(1, 0, 1),
               v011 = v(0, 1, 1), v111 = v(1, 1, 1);
  const double tx = t[0], ty = t[1], tz = t[2];
  const double c00 = v000 * (1.0 - tx) + v100 * tx;
  const double c10 = v010 * (1.0 - tx) + v110 * tx;
  const double c01 = v001 * (1.0 - tx) + v101 * tx;
  const double c11 = v011 * (1.0 - tx) + v111 * tx;
  const double c0 = c00 * (1.0 - ty) + c10 * ty;
  const double c1 = c01 * (1.0 - ty) + c11 * ty;
  double value = c0 * (1.0 - tz) + c1 * tz;

  const Vec3 outside = p - inside;
  const double out_dist = outside.norm();
  if (out_dist > 0.0) value += out_dist;

  if (gradient != nullptr) {
    const double dx = ((v100 - v000) * (1 - ty) * (1 - tz) +
                       (v110 - v010) * ty * (1 - tz) +
                       (v101 - v001) * (1 - ty) * tz + (v111 - v011) * ty * tz);
    const double dy = (c10 - c00) * (1 - tz) + (c11 - c01) * tz;
    const double dz = c1 - c0;
    Vec3 g(dx, dy, dz);
    g /= voxel_size_;
    for (int a = 0; a < 3; ++a) {
      if (clamped[a]) g[a] = 0.0;
    }
    if (out_dist > 0.0) g += outside / out_dist;
    *gradient = g;
  }
  return value;
}

VoxelSdf build_sdf_from_mesh(const TriangleMesh& mesh, double voxel_size,
                             double padding) {
  if (!(voxel_size > 0.0) || padding < 0.0) {
    throw Error(ErrorCode::kInvalidArgument, "voxel_size must be positive");
  }
  TriangleMesh clean = mesh;
  clean.validate();
  clean.remove_degenerate_triangles();
  if (clean.triangles.empty()) {
    throw Error(ErrorCode::kEmptyInput, "mesh has no triangles");
  }
  const std::size_t open_edges = clean.boundary_edge_count();
  if (open_edges != 0) {
    throw Error(ErrorCode::kOpenMesh,
                std::to_string(open_edges) + " boundary edges");
  }

  Vec3 lo, hi;
  clean.bounds(lo, hi);
  lo.array() -= padding;
  hi.array() += padding;
  // Origin and spacing are float-representable so the cache round-trips.
  const double h = static_cast<float>(voxel_size);
  Vec3 origin;
  std::array<int, 3> dims{};
  for (int a = 0; a < 3; ++a) {
    origin[a] = static_cast<float>(lo[a]);
    dims[a] = std::max(2, static_cast<int>(std::ceil((hi[a] - origin[a]) / h)) + 1);
  }

  const MeshIndex index(std::move(clean));
  std::vector<float> values(static_cast<std::size_t>(dims[0]) * dims[1] * dims[2]);
  std::size_t n = 0;
  for (int i = 0; i < dims[0]; ++i) {
    for (int j = 0; j < dims[1]; ++j) {
      for (int k = 0; k < dims[2]; ++k) {
        const Vec3 p = origin + h * Vec3(i, j, k);
        values[n++] = static_cast<float>(index.signed_distance(p));
      }
    }
  }
  return VoxelSdf(origin, h, dims, std::move(values));
}

Vec3 sdf_gradient(const VoxelSdf& sdf, const Vec3& point) {
  const double h = sdf.voxel_size();
  if (!sdf.contains(point, h)) {
    throw Error(ErrorCode::kGradientOutOfBand,
                "point is less than one voxel inside the grid");
  }
  Vec3 g;
  for (int a = 0; a < 3; ++a) {
    Vec3 step = Vec3::Zero();
    step[a] = h;
    g[a] = (sdf.query(point + step) - sdf.query(point - step)) / (2.0 * h);
  }
  return g;
}

namespace {

template <typename T>
void put(std::string& out, T value) {
  out.append(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T get(const std::string& in, std::size_t& pos) {
  if (pos + sizeof(T) > in.size()) {
    throw Error(ErrorCode::kFormat, "truncated sdf cache");
  }
  T value;
  std::memcpy(&value, in.data() + pos, sizeof(T));
  pos += sizeof(T);
  return value;
}

}  // namespace

std::string sdf_to_bytes(const VoxelSdf& sdf) {
  std::string out;
  out.reserve(28 + sdf.values().size() * 4);
  for (int d : sdf.dims()) put<std::int32_t>(out, d);
  for (int a = 0; a < 3; ++a) put<float>(out, static_cast<float>(sdf.origin()[a]));
  put<float>(out, static_cast<float>(sdf.voxel_size()));
  out.append(reinterpret_cast<const char*>(sdf.values().data()),
             sdf.values().size() * sizeof(float));
  return out;
}

VoxelSdf sdf_from_bytes(const std::string& bytes) {
  std::size_t pos = 0;
  std::array<int, 3> dims{};
  for (auto& d : dims) d = get<std::int32_t>(bytes, pos);
  Vec3 origin;
  for (int a = 0; a < 3; ++a) origin[a] = get<float>(bytes, pos);
  const double voxel = get<float>(bytes, pos);
  if (dims[0] < 2 || dims[1] < 2 || dims[2] < 2) {
    throw Error(ErrorCode::kFormat, "sdf cache has invalid dims");
  }
  const std::size_t n = static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
  if (bytes.size() - pos != n * sizeof(float)) {
    throw Error(ErrorCode::kFormat, "sdf cache size does not match dims");
  }
  std::vector<float> values(n);
  std::memcpy(values.data(), bytes.data() + pos, n * sizeof(float));
  return VoxelSdf(origin, voxel, dims, std::move(values));
}

void save_sdf(const std::filesystem::path& path, const VoxelSdf& sdf) {
  detail::write_file_atomic(path, sdf_to_bytes(sdf));
}

VoxelSdf load_sdf(const std::filesystem::path& path) {
  return sdf_from_bytes(detail::read_file(path));
}

}  // namespace hoa
