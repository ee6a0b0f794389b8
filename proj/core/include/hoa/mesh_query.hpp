#pragma once

#include <array>
#include <vector>

#include "hoa/mesh.hpp"

namespace hoa {

struct ClosestPoint {
  double distance = 0.0;  // unsigned
  Vec3 point = Vec3::Zero();
  std::size_t triangle = 0;
  std::array<double, 3> barycentric{1.0, 0.0, 0.0};
};

/// Closest point on a single triangle (a, b, c) to p.
ClosestPoint closest_point_on_triangle(const Vec3& p, const Vec3& a,
                                       const Vec3& b, const Vec3& c);

/// Signed solid angle of triangle (a, b, c) seen from p, in steradians.
double triangle_solid_angle(const Vec3& p, const Vec3& a, const Vec3& b,
                            const Vec3& c);

/// Bounding-volume hierarchy over a triangle mesh answering nearest-surface
/// and generalized winding number queries. Holds its own copy of the mesh.
class MeshIndex {
 public:
  explicit MeshIndex(TriangleMesh mesh);

  const TriangleMesh& mesh() const { return mesh_; }

  ClosestPoint closest_point(const Vec3& p) const;
  double unsigned_distance(const Vec3& p) const {
    return closest_point(p).distance;
  }

  /// Generalized winding number: exact triangle solid angles for nearby
  /// nodes, a dipole expansion for nodes seen from far away.
  double winding_number(const Vec3& p) const;

  /// Brute-force sum over every triangle.
  double exact_winding_number(const Vec3& p) const;

  bool is_inside(const Vec3& p) const { return winding_number(p) > 0.5; }

  /// Unsigned distance with the sign of the winding number (inside < 0).
  double signed_distance(const Vec3& p, ClosestPoint* closest = nullptr) const;

 private:
  struct Node {
    Eigen::AlignedBox3d box;
    Vec3 centroid = Vec3::Zero();     // area-weighted
    Vec3 vector_area = Vec3::Zero();  // sum of 0.5 * (e1 x e2)
    double radius = 0.0;
    int left = -1;   // child index, or -1 for leaves
    int right = -1;
    int first = 0;   // leaf triangle range into order_
    int count = 0;
  };

  int build(int first, int count, std::vector<Vec3>& centroids);

  TriangleMesh mesh_;
  std::vector<int> order_;
  std::vector<Node> nodes_;
};

}  // namespace hoa
