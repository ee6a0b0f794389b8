#include "hoa/mesh_query.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace hoa {

ClosestPoint closest_point_on_triangle(const Vec3& p, const Vec3& a,
                                       const Vec3& b, const Vec3& c) {
  // Voronoi-region walk (Ericson, Real-Time Collision Detection 5.1.5).
  ClosestPoint out;
  auto finish = [&](double u, double v, double w) {
    out.barycentric = {u, v, w};
    out.point = u * a + v * b + w * c;
    out.distance = (p - out.point).norm();
    return out;
  };
  const Vec3 ab = b - a;
  const Vec3 ac = c - a;
  const Vec3 ap = p - a;
  const double d1 = ab.dot(ap);
  const double d2 = ac.dot(ap);
  if (d1 <= 0.0 && d2 <= 0.0) return finish(1.0, 0.0, 0.0);

  const Vec3 bp = p - b;
  const double d3 = ab.dot(bp);
  const double d4 = ac.dot(bp);
  if (d3 >= 0.0 && d4 <= d3) return finish(0.0, 1.0, 0.0);

  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) {
    const double v = d1 / (d1 - d3);
    return finish(1.0 - v, v, 0.0);
  }

  const Vec3 cp = p - c;
  const double d5 = ab.dot(cp);
  const double d6 = ac.dot(cp);
  if (d6 >= 0.0 && d5 <= d6) return finish(0.0, 0.0, 1.0);

  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) {
    const double w = d2 / (d2 - d6);
    return finish(1.0 - w, 0.0, w);
  }

  const double va = d3 * d6 - d5 * d4;
  if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
    const double w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
    return finish(0.0, 1.0 - w, w);
  }

  const double denom = 1.0 / (va + vb + vc);
  const double v = vb * denom;
  const double w = vc * denom;
  return finish(1.0 - v - w, v, w);
}

double triangle_solid_angle(const Vec3& p, const Vec3& a, const Vec3& b,
                            const Vec3& c) {
  // Van Oosterom & Strackee.
  const Vec3 ra = a - p;
  const Vec3 rb = b - p;
  const Vec3 rc = c - p;
  const double la = ra.norm();
  const double lb = rb.norm();
  const double lc = rc.norm();
  const double numer = ra.dot(rb.cross(rc));
  const double denom =
      la * lb * lc + ra.dot(rb) * lc + ra.dot(rc) * lb + rb.dot(rc) * la;
  return 2.0 * std::atan2(numer, denom);
}

namespace {
constexpr int kLeafSize = 4;
constexpr double kFarFieldRatio = 2.5;
}  // namespace

MeshIndex::MeshIndex(TriangleMesh mesh) : mesh_(std::move(mesh)) {
  mesh_.validate();
  const int n = static_cast<int>(mesh_.triangles.size());
  order_.resize(n);
  std::vector<Vec3> centroids(n);
  for (int i = 0; i < n; ++i) {
    order_[i] = i;
    const auto& t = mesh_.triangles[i];
    centroids[i] =
        (mesh_.vertices[t[0]] + mesh_.vertices[t[1]] + mesh_.vertices[t[2]]) /
        3.0;
  }
  nodes_.reserve(2 * n / kLeafSize + 2);
  if (n > 0) build(0, n, centroids);
}

int MeshIndex::build(int first, int count, std::vector<Vec3>& centroids) {
  const int index = static_cast<int>(nodes_.size());
  nodes_.emplace_back();
  Node node;
  node.first = first;
  node.count = count;
  double area_sum = 0.0;
  Vec3 weighted = Vec3::Zero();
  for (int i = first; i < first + count; ++i) {
    const auto& t = mesh_.triangles[order_[i]];
    const Vec3& a = mesh_.vertices[t[0]];
    const Vec3& b = mesh_.vertices[t[1]];
    const Vec3& c = mesh_.vertices[t[2]];
    node.box.extend(a);
    node.box.extend(b);
    node.box.extend(c);
    const Vec3 va = 0.5 * (b - a).cross(c - a);
    const double area = va.norm();
    node.vector_area += va;
    weighted += area * centroids[order_[i]];
    area_sum += area;
  }
  node.centroid = area_sum > 0.0 ? Vec3(weighted / area_sum)
                                 : Vec3(node.box.center());
  for (int k = 0; k < 8; ++k) {
    const Vec3 corner = node.box.corner(static_cast<Eigen::AlignedBox3d::CornerType>(k));
    node.radius = std::max(node.radius, (corner - node.centroid).norm());
  }

  if (count > kLeafSize) {
    Eigen::AlignedBox3d cbox;
    for (int i = first; i < first + count; ++i) cbox.extend(centroids[order_[i]]);
    int axis = 0;
    cbox.sizes().maxCoeff(&axis);
    const int mid = first + count / 2;
    std::nth_element(order_.begin() + first, order_.begin() + mid,
                     order_.begin() + first + count, [&](int a, int b) {
                       return centroids[a][axis] < centroids[b][axis];
                     });
    node.left = build(first, mid - first, centroids);
    node.right = build(mid, first + count - mid, centroids);
  }
  nodes_[index] = node;
  return index;
}

ClosestPoint MeshIndex::closest_point(const Vec3& p) const {
  ClosestPoint best;
  best.distance = std::numeric_limits<double>::infinity();
  if (nodes_.empty()) return best;
  double best_sq = std::numeric_limits<double>::infinity();
  std::vector<int> stack;
  stack.reserve(64);
  stack.push_back(0);
  while (!stack.empty()) {
    const Node& node = nodes_[stack.back()];
    stack.pop_back();
    if (node.box.squaredExteriorDistance(p) >= best_sq) continue;
    if (node.left < 0) {
      for (int i = node.first; i < node.first + node.count; ++i) {
        const auto& t = mesh_.triangles[order_[i]];
        ClosestPoint cp = closest_point_on_triangle(
            p, mesh_.vertices[t[0]], mesh_.vertices[t[1]], mesh_.vertices[t[2]]);
        const double sq = cp.distance * cp.distance;
        if (sq < best_sq ||
            (sq == best_sq && static_cast<std::size_t>(order_[i]) < best.triangle)) {
          best_sq = sq;
          best = cp;
          best.triangle = static_cast<std::size_t>(order_[i]);
        }
      }
      continue;
    }
    const double dl = nodes_[node.left].box.squaredExteriorDistance(p);
    const double dr = nodes_[node.right].box.squaredExteriorDistance(p);
    // Push the farther child first so the nearer one is explored next.
    if (dl < dr) {
      stack.push_back(node.right);
      stack.push_back(node.left);
    } else {
      stack.push_back(node.left);
      stack.push_back(node.right);
    }
  }
  return best;
}

double MeshIndex::exact_winding_number(const Vec3& p) const {
  double total = 0.0;
  for (const auto& t : mesh_.triangles) {
    total += triangle_solid_angle(p, mesh_.vertices[t[0]], mesh_.vertices[t[1]],
                                  mesh_.vertices[t[2]]);
  }
  return total / (4.0 * std::numbers::pi);
}

double MeshIndex::winding_number(const Vec3& p) const {
  if (nodes_.empty()) return 0.0;
  double total = 0.0;
  std::vector<int> stack;
  stack.reserve(64);
  stack.push_back(0);
  while (!stack.empty()) {
    const Node& node = nodes_[stack.back()];
    stack.pop_back();
    const Vec3 r = node.centroid - p;
    const double dist = r.norm();
    if (dist > kFarFieldRatio * node.radius) {
      total += r.dot(node.vector_area) / (dist * dist * dist);
      continue;
    }
    if (node.left < 0) {
      for (int i = node.first; i < node.first + node.count; ++i) {
        const auto& t = mesh_.triangles[order_[i]];
        total += triangle_solid_angle(p, mesh_.vertices[t[0]],
                                      mesh_.vertices[t[1]], mesh_.vertices[t[2]]);
      }
      continue;
    }
    stack.push_back(node.left);
    stack.push_back(node.right);
  }
  return total / (4.0 * std::numbers::pi);
}

double MeshIndex::signed_distance(const Vec3& p, ClosestPoint* closest) const {
  const ClosestPoint cp = closest_point(p);
  if (closest != nullptr) *closest = cp;
  return is_inside(p) ? -cp.distance : cp.distance;
}

}  // namespace hoa
