#pragma once

#include <optional>
#include <string>
#include <vector>

#include "hoa/hand_model.hpp"
#include "hoa/object_tracker.hpp"
#include "hoa/sdf.hpp"

namespace hoa {

inline constexpr double kDefaultHandSegmentation = 0.01;  // meters

struct SceneObject {
  std::string name;
  const VoxelSdf* sdf = nullptr;
  RigidTransform pose;
  std::vector<Vec3> cloud;  // world frame
  std::optional<RigidTransform> prev;
};

struct SceneHand {
  Handedness side = Handedness::kRight;
  const HandModelData* data = nullptr;
  HandShape shape;
  HandPose pose;
  std::vector<Vec3> cloud;  // world frame, already segmented
  std::optional<HandPose> prev;
};

struct SceneFrame {
  int frame = 0;
  std::vector<SceneObject> objects;
  std::vector<SceneHand> hands;  // at most two
};

struct HandSegmentation {
  std::vector<Vec3> points;
  bool empty_warning = false;
};

/// Points within `threshold` (unsigned distance) of the skinned hand mesh.
HandSegmentation segment_hand_points(const std::vector<Vec3>& cloud, const HandModelData& data,
                                     const HandShape& shape, const HandPose& pose,
                                     double threshold = kDefaultHandSegmentation);

/// (1/N_O) sum over objects of [sdf_loss + lambda1' smoothness] plus
/// (1/N_H) sum over hands of [mean squared hand signed distance +
/// lambda3' |articulation|^2 + lambda1' smoothness of the global transform],
/// with primed weights scaled by kWeightScale. Entities with an empty cloud
/// keep only their regularizer and smoothness terms.
double joint_loss(const SceneFrame& frame, double lambda3, double lambda1);

/// Gradient of joint_loss: 6 tangent coordinates per object followed by the
/// 51 pose parameters per hand.
Eigen::VectorXd joint_loss_gradient(const SceneFrame& frame, double lambda3, double lambda1);

/// Scene with every object tangent-updated and every hand pose vector
/// shifted by the matching slice of `delta` (layout of joint_loss_gradient).
SceneFrame perturb_scene(const SceneFrame& frame, const Eigen::VectorXd& delta);

/// Deepest hand-in-object penetration: max over hand mesh vertices and
/// objects of the negated object signed distance (meters; negative when
/// nothing penetrates). Returns -infinity without hands or objects.
double max_penetration(const SceneFrame& frame);

struct JointRefineOptions {
  double lambda1 = 10.0;
  double lambda3 = 1e-3;
  int sweeps = 10;
  int hand_iterations = 5;
  double max_translation = 0.05;  // trust region around the initialization
  double max_rotation_deg = 30.0;
  RefineOptions object;
};

struct JointRefineResult {
  std::vector<RigidTransform> object_poses;
  std::vector<HandPose> hand_poses;
  double loss_before = 0.0;
  double loss_after = 0.0;
  std::vector<double> sweep_losses;  // after each executed sweep (stops early once nothing moves)
  double penetration_before = 0.0;
  double penetration_after = 0.0;
};

/// Block-coordinate refinement: each sweep updates every object pose
/// (refine_pose_sdf) and then every hand pose (damped Gauss-Newton on its
/// signed-distance, regularizer and smoothness terms). A block update is
/// kept only when it lowers the loss and stays inside the trust region.
JointRefineResult refine_joint(const SceneFrame& frame, const JointRefineOptions& options = {});

}  // namespace hoa
