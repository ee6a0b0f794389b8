#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include "hoa/mesh.hpp"

namespace hoa {

inline constexpr double kDefaultVoxelSize = 0.002;
inline constexpr double kDefaultSdfPadding = 0.01;

/// Dense signed distance grid (meters, inside < 0). Node (i, j, k) sits at
/// origin + voxel_size * (i, j, k); values are stored x-major
/// (index = (i * ny + j) * nz + k) as 32-bit floats.
class VoxelSdf {
 public:
  VoxelSdf(const Vec3& origin, double voxel_size, const std::array<int, 3>& dims,
           std::vector<float> values);

  const Vec3& origin() const { return origin_; }
  double voxel_size() const { return voxel_size_; }
  const std::array<int, 3>& dims() const { return dims_; }
  const std::vector<float>& values() const { return values_; }
  Vec3 upper() const;
  Vec3 node_position(int i, int j, int k) const;
  float node_value(int i, int j, int k) const {
    return values_[(static_cast<std::size_t>(i) * dims_[1] + j) * dims_[2] + k];
  }

  /// Trilinear value inside the grid. Outside, the value at the nearest
  /// grid point plus the distance to it, a lower bound of the true distance
  /// that grows monotonically away from the grid.
  double query(const Vec3& p) const;

  /// Query together with the exact gradient of that piecewise-trilinear
  /// function (used by the pose solvers).
  double query(const Vec3& p, Vec3* gradient) const;

  /// True when p lies at least `margin` inside the grid box on every axis.
  bool contains(const Vec3& p, double margin = 0.0) const;

 private:
  Vec3 origin_;
  double voxel_size_;
  std::array<int, 3> dims_;
  std::vector<float> values_;
};

/// Voxelizes a watertight mesh: unsigned distance to the nearest triangle,
/// signed by the generalized winding number. Throws open-mesh when some
/// edge is not shared by exactly two triangles.
VoxelSdf build_sdf_from_mesh(const TriangleMesh& mesh,
                             double voxel_size = kDefaultVoxelSize,
                             double padding = kDefaultSdfPadding);

/// Trilinear signed distance at a point in the object frame.
inline double sdf_query(const VoxelSdf& sdf, const Vec3& point_object_frame) {
  return sdf.query(point_object_frame);
}

/// Central differences of sdf_query with step voxel_size (not normalized).
/// Throws gradient-out-of-band unless the point is a full voxel inside.
Vec3 sdf_gradient(const VoxelSdf& sdf, const Vec3& point);

/// Cache format: int32 dims[3], float32 origin[3], float32 voxel_size,
/// then float32 values in x-major order. Little-endian.
std::string sdf_to_bytes(const VoxelSdf& sdf);
VoxelSdf sdf_from_bytes(const std::string& bytes);
void save_sdf(const std::filesystem::path& path, const VoxelSdf& sdf);
VoxelSdf load_sdf(const std::filesystem::path& path);

}  // namespace hoa
