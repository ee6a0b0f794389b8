#include "hoa/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "hoa/error.hpp"

namespace hoa {

std::string_view entity_name(Entity entity) {
  switch (entity) {
    case Entity::kObject: return "object";
    case Entity::kLeftHand: return "left-hand";
    case Entity::kRightHand: return "right-hand";
  }
  return "object";
}

std::map<Entity, ErrorStats> reprojection_error(const std::vector<ReprojectionSample>& samples) {
  std::map<Entity, std::vector<double>> groups;
  for (const auto& s : samples) groups[s.entity].push_back((s.annotated - s.projected).norm());
  std::map<Entity, ErrorStats> out;
  for (const auto& [entity, errors] : groups) {
    ErrorStats st;
    st.count = errors.size();
    for (double e : errors) st.mean += e;
    st.mean /= static_cast<double>(st.count);
    double var = 0.0;
    for (double e : errors) var += (e - st.mean) * (e - st.mean);
    st.std = std::sqrt(var / static_cast<double>(st.count));
    out[entity] = st;
  }
  return out;
}

BoundingBox bounding_box(const std::vector<Vec2>& points) {
  if (points.empty()) throw Error(ErrorCode::kEmptyInput, "bounding box of no points");
  BoundingBox box{points.front(), points.front()};
  for (const Vec2& p : points) {
    box.min = box.min.cwiseMin(p);
    box.max = box.max.cwiseMax(p);
  }
  return box;
}

std::vector<double> pck(const std::vector<Vec2>& pred, const std::vector<Vec2>& gt,
                        const BoundingBox& bbox, const std::vector<double>& thresholds) {
  if (gt.empty()) throw Error(ErrorCode::kEmptyInput, "pck needs at least one joint");
  if (pred.size() != gt.size()) {
    throw Error(ErrorCode::kInvalidArgument, "pck: predicted and ground-truth joint counts differ");
  }
  const double size = bbox.size();
  std::vector<double> out;
  for (double alpha : thresholds) {
    std::size_t hit = 0;
    for (std::size_t i = 0; i < gt.size(); ++i) {
      if ((pred[i] - gt[i]).norm() <= alpha * size) ++hit;
    }
    out.push_back(100.0 * static_cast<double>(hit) / static_cast<double>(gt.size()));
  }
  return out;
}

double mpjpe_root_aligned(const JointArray& pred, const JointArray& gt) {
  const Vec3 offset = gt[0] - pred[0];
  double sum = 0.0;
  for (int i = 0; i < kHandJoints; ++i) sum += (pred[i] + offset - gt[i]).norm();
  return 1000.0 * sum / kHandJoints;
}

double add_distance(const RigidTransform& pred, const RigidTransform& gt,
                    const std::vector<Vec3>& vertices) {
  if (vertices.empty()) throw Error(ErrorCode::kEmptyInput, "ADD over an empty vertex set");
  double sum = 0.0;
  for (const Vec3& v : vertices) sum += (pred * v - gt * v).norm();
  return sum / static_cast<double>(vertices.size());
}

double adds_distance_bruteforce(const RigidTransform& pred, const RigidTransform& gt,
                                const std::vector<Vec3>& vertices) {
  if (vertices.empty()) throw Error(ErrorCode::kEmptyInput, "ADD-S over an empty vertex set");
  std::vector<Vec3> target(vertices.size());
  for (std::size_t i = 0; i < vertices.size(); ++i) target[i] = gt * vertices[i];
  double sum = 0.0;
  for (const Vec3& v : vertices) {
    const Vec3 p = pred * v;
    double best = std::numeric_limits<double>::infinity();
    for (const Vec3& q : target) best = std::min(best, (p - q).squaredNorm());
    sum += std::sqrt(best);
  }
  return sum / static_cast<double>(vertices.size());
}

namespace {

/// Uniform grid over a point set for exact nearest-neighbor queries.
class PointGrid {
 public:
  explicit PointGrid(const std::vector<Vec3>& points) : points_(points) {
    lo_ = hi_ = points.front();
    for (const Vec3& p : points) {
      lo_ = lo_.cwiseMin(p);
      hi_ = hi_.cwiseMax(p);
    }
    const Vec3 extent = hi_ - lo_;
    const double per_axis = std::max(1.0, std::cbrt(static_cast<double>(points.size()) / 2.0));
    cell_ = std::max(extent.maxCoeff() / per_axis, 1e-9);
    for (int a = 0; a < 3; ++a) dims_[a] = static_cast<int>(extent[a] / cell_) + 1;
    start_.assign(static_cast<std::size_t>(dims_[0]) * dims_[1] * dims_[2] + 1, 0);
    std::vector<std::size_t> cell_of(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) {
      const auto c = cell_coords(points[i]);
      cell_of[i] = flat(clamp_cell(c[0], 0), clamp_cell(c[1], 1), clamp_cell(c[2], 2));
      ++start_[cell_of[i] + 1];
    }
    for (std::size_t c = 1; c < start_.size(); ++c) start_[c] += start_[c - 1];
    items_.resize(points.size());
    std::vector<std::size_t> fill(start_.begin(), start_.end() - 1);
    for (std::size_t i = 0; i < points.size(); ++i) items_[fill[cell_of[i]]++] = i;
  }

  /// Smallest squared distance from p to any point.
  double nearest_sq(const Vec3& p) const {
    const auto c = cell_coords(p);
    double best = std::numeric_limits<double>::infinity();
    const int max_ring = std::max({dims_[0], dims_[1], dims_[2]}) +
                         std::max({std::abs(c[0]), std::abs(c[1]), std::abs(c[2])}) + 1;
    for (int ring = 0; ring <= max_ring; ++ring) {
      for (int x = c[0] - ring; x <= c[0] + ring; ++x) {
        if (x < 0 || x >= dims_[0]) continue;
        for (int y = c[1] - ring; y <= c[1] + ring; ++y) {
          if (y < 0 || y >= dims_[1]) continue;
          for (int z = c[2] - ring; z <= c[2] + ring; ++z) {
            if (z < 0 || z >= dims_[2]) continue;
            const int cheb = std::max({std::abs(x - c[0]), std::abs(y - c[1]), std::abs(z - c[2])});
            if (cheb != ring) continue;
            const std::size_t cell = flat(x, y, z);
            for (std::size_t k = start_[cell]; k < start_[cell + 1]; ++k) {
              best = std::min(best, (p - points_[items_[k]]).squaredNorm());
            }
          }
        }
      }
      // Cells beyond this ring are at least ring * cell_ away.
      const double reach = ring * cell_;
      if (best <= reach * reach) break;
    }
    return best;
  }

 private:
  std::array<int, 3> cell_coords(const Vec3& p) const {
    std::array<int, 3> c{};
    for (int a = 0; a < 3; ++a) {
      const double g = std::floor((p[a] - lo_[a]) / cell_);
      c[a] = static_cast<int>(std::clamp(g, -1e6, 1e6));
    }
    return c;
  }
  int clamp_cell(int v, int axis) const { return std::clamp(v, 0, dims_[axis] - 1); }
  std::size_t flat(int x, int y, int z) const {
    return (static_cast<std::size_t>(x) * dims_[1] + y) * dims_[2] + z;
  }

  const std::vector<Vec3>& points_;
  Vec3 lo_, hi_;
  double cell_ = 1.0;
  std::array<int, 3> dims_{};
  std::vector<std::size_t> start_;
  std::vector<std::size_t> items_;
};

}  // namespace

double adds_distance(const RigidTransform& pred, const RigidTransform& gt,
                     const std::vector<Vec3>& vertices) {
  if (vertices.empty()) throw Error(ErrorCode::kEmptyInput, "ADD-S over an empty vertex set");
  std::vector<Vec3> target(vertices.size());
  for (std::size_t i = 0; i < vertices.size(); ++i) target[i] = gt * vertices[i];
  const PointGrid grid(target);
  double sum = 0.0;
  for (const Vec3& v : vertices) sum += std::sqrt(grid.nearest_sq(pred * v));
  return sum / static_cast<double>(vertices.size());
}

double auc_percent(const std::vector<double>& distances, double max_threshold) {
  if (distances.empty()) throw Error(ErrorCode::kEmptyInput, "AUC of no distances");
  if (!(max_threshold > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "AUC threshold must be positive");
  }
  double area = 0.0;
  for (double d : distances) area += std::max(0.0, max_threshold - d);
  return 100.0 * area / (static_cast<double>(distances.size()) * max_threshold);
}

AddAucResult add_adds_auc(const std::vector<RigidTransform>& pred,
                          const std::vector<RigidTransform>& gt, const TriangleMesh& mesh,
                          double max_threshold) {
  if (mesh.vertices.empty()) throw Error(ErrorCode::kEmptyInput, "mesh has no vertices");
  if (pred.size() != gt.size() || pred.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "need matching, non-empty pose lists");
  }
  AddAucResult out;
  for (std::size_t f = 0; f < pred.size(); ++f) {
    out.add.push_back(add_distance(pred[f], gt[f], mesh.vertices));
    out.adds.push_back(adds_distance(pred[f], gt[f], mesh.vertices));
  }
  out.add_auc = auc_percent(out.add, max_threshold);
  out.adds_auc = auc_percent(out.adds, max_threshold);
  return out;
}

}  // namespace hoa
