#pragma once

#include <array>
#include <map>
#include <string_view>
#include <vector>

#include "hoa/geometry.hpp"
#include "hoa/hand_model.hpp"
#include "hoa/mesh.hpp"

namespace hoa {

enum class Entity { kObject, kLeftHand, kRightHand };

std::string_view entity_name(Entity entity);

struct ReprojectionSample {
  Vec2 annotated = Vec2::Zero();
  Vec2 projected = Vec2::Zero();
  Entity entity = Entity::kObject;
};

struct ErrorStats {
  double mean = 0.0;
  double std = 0.0;  // population standard deviation
  std::size_t count = 0;
};

/// Pixel distance statistics per entity; entities without samples are
/// absent from the map.
std::map<Entity, ErrorStats> reprojection_error(const std::vector<ReprojectionSample>& samples);

struct BoundingBox {
  Vec2 min = Vec2::Zero();
  Vec2 max = Vec2::Zero();
  double size() const { return (max - min).maxCoeff(); }
};

BoundingBox bounding_box(const std::vector<Vec2>& points);

inline constexpr std::array<double, 4> kPckThresholds = {0.05, 0.10, 0.15, 0.20};

/// Percentage of joints whose pixel error is at most alpha * bbox.size(),
/// one value per threshold. Throws empty-input for no joints and
/// invalid-argument for mismatched sizes.
std::vector<double> pck(const std::vector<Vec2>& pred, const std::vector<Vec2>& gt,
                        const BoundingBox& bbox,
                        const std::vector<double>& thresholds = {kPckThresholds.begin(),
                                                                 kPckThresholds.end()});

/// Mean joint distance in millimeters after moving pred's wrist onto gt's.
double mpjpe_root_aligned(const JointArray& pred, const JointArray& gt);

/// Mean distance between corresponding transformed vertices.
double add_distance(const RigidTransform& pred, const RigidTransform& gt,
                    const std::vector<Vec3>& vertices);

/// Mean distance from each pred-transformed vertex to the nearest
/// gt-transformed vertex, found through a uniform grid.
double adds_distance(const RigidTransform& pred, const RigidTransform& gt,
                     const std::vector<Vec3>& vertices);

/// Same quantity by exhaustive search; reference for adds_distance.
double adds_distance_bruteforce(const RigidTransform& pred, const RigidTransform& gt,
                                const std::vector<Vec3>& vertices);

inline constexpr double kDefaultAucThreshold = 0.10;  // meters

/// Area under the accuracy-versus-threshold curve on [0, max_threshold] in
/// percent. The curve is the empirical CDF of the distances, integrated
/// exactly.
double auc_percent(const std::vector<double>& distances, double max_threshold);

struct AddAucResult {
  std::vector<double> add;
  std::vector<double> adds;
  double add_auc = 0.0;
  double adds_auc = 0.0;
};

/// Per-frame ADD / ADD-S over the mesh vertices and their AUC. Throws
/// empty-input for an empty mesh and invalid-argument for mismatched pose
/// lists.
AddAucResult add_adds_auc(const std::vector<RigidTransform>& pred,
                          const std::vector<RigidTransform>& gt, const TriangleMesh& mesh,
                          double max_threshold = kDefaultAucThreshold);

}  // namespace hoa
