#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "hoa/geometry.hpp"

namespace hoa {

class Rng;

using Triangle = std::array<int, 3>;
using Color = std::array<std::uint8_t, 3>;

struct TriangleMesh {
  std::vector<Vec3> vertices;
  std::vector<Triangle> triangles;
  std::vector<Color> colors;  // empty or one per vertex

  /// Throws invalid-argument on out-of-range indices or a color count that
  /// does not match the vertex count.
  void validate() const;

  /// Drops zero-area triangles. Returns the number removed.
  std::size_t remove_degenerate_triangles(double min_area = 1e-16);

  /// Number of undirected edges not shared by exactly two triangles.
  std::size_t boundary_edge_count() const;

  double surface_area() const;
  Vec3 triangle_normal(std::size_t t) const;  // unit, right-hand winding
  void bounds(Vec3& lo, Vec3& hi) const;

  /// Returns a copy with every vertex mapped through `transform`.
  TriangleMesh transformed(const RigidTransform& transform) const;
};

/// Watertight unit-sphere subdivision scaled to `radius`.
TriangleMesh make_icosphere(double radius, int subdivisions);

/// Axis-aligned box centered at the origin with the given edge lengths.
TriangleMesh make_box(const Vec3& size);

/// Surface point with the normal of the triangle it was drawn from.
struct SurfaceSample {
  Vec3 point;
  Vec3 normal;
  std::size_t triangle;
};

/// Area-weighted uniform samples on the mesh surface.
std::vector<SurfaceSample> sample_surface(const TriangleMesh& mesh,
                                          std::size_t count, Rng& rng);

/// Point cloud with an optional per-point integer label.
struct PointCloud {
  std::vector<Vec3> points;
  std::vector<int> labels;  // empty or one per point
};

/// PLY reader for ascii and binary_little_endian files. Reads vertex x/y/z
/// (float or double), optional red/green/blue (uchar), optional `label`
/// (int/uchar) and a `vertex_indices`/`vertex_index` face list.
TriangleMesh load_ply_mesh(const std::filesystem::path& path);
PointCloud load_ply_cloud(const std::filesystem::path& path);

/// Binary little-endian PLY writers (float32 positions).
std::string ply_mesh_bytes(const TriangleMesh& mesh);
std::string ply_cloud_bytes(const PointCloud& cloud);
void save_ply_mesh(const std::filesystem::path& path, const TriangleMesh& mesh);
void save_ply_cloud(const std::filesystem::path& path, const PointCloud& cloud);

}  // namespace hoa
