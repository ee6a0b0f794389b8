#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include "hoa/geometry.hpp"
#include "hoa/mesh.hpp"

namespace hoa {

inline constexpr int kHandJoints = 21;
inline constexpr int kArticulatedJoints = 15;
inline constexpr int kShapeParams = 10;
inline constexpr int kPoseParams = 51;

/// Offsets into the flat 51-vector: [3 global rotation | 45 articulation |
/// 3 global translation].
inline constexpr int kPoseGlobalRotation = 0;
inline constexpr int kPoseArticulation = 3;
inline constexpr int kPoseTranslation = 48;

using ShapeVector = Eigen::Matrix<double, kShapeParams, 1>;
using PoseVector = Eigen::Matrix<double, kPoseParams, 1>;
using ArticulationVector = Eigen::Matrix<double, 3 * kArticulatedJoints, 1>;
using JointArray = std::array<Vec3, kHandJoints>;

enum class Handedness { kRight = 0, kLeft = 1 };

std::string_view handedness_name(Handedness h);

struct HandShape {
  ShapeVector beta = ShapeVector::Zero();

  static HandShape zero() { return {}; }
  /// Throws invalid-argument on non-finite values or |beta_i| > 10.
  void validate() const;
};

/// Axis-angle articulation; joint rotations are expressed in the rest-pose
/// world axes and composed down the kinematic tree.
struct HandPose {
  Vec3 global_rotation = Vec3::Zero();
  ArticulationVector articulation = ArticulationVector::Zero();
  Vec3 global_translation = Vec3::Zero();

  PoseVector to_vector() const;
  static HandPose from_vector(const PoseVector& v);

  /// Global rotation and translation as a rigid transform (the wrist
  /// pivot is not included).
  RigidTransform global_transform() const;
  bool is_finite() const;
};

/// Reflects a pose across the x = 0 plane (right <-> left hand).
HandPose mirror_pose(const HandPose& pose);

/// Parametric hand: template mesh, joint regressor, skinning weights,
/// linear shape basis and kinematic tree.
class HandModelData {
 public:
  /// `template_vertices` V x 3, `joint_regressor` 21 x V, `skin_weights`
  /// V x 21, `shape_basis` 3V x 10 (vertex-major xyz rows), `parents` with
  /// parents[0] == -1 and parents[i] < i. Throws invalid-argument when an
  /// invariant fails.
  HandModelData(Eigen::MatrixX3d template_vertices, std::vector<Triangle> faces,
                Eigen::MatrixXd joint_regressor, Eigen::MatrixXd skin_weights,
                Eigen::MatrixXd shape_basis, std::array<int, kHandJoints> parents,
                Handedness handedness);

  int vertex_count() const { return static_cast<int>(template_vertices_.rows()); }
  const Eigen::MatrixX3d& template_vertices() const { return template_vertices_; }
  const std::vector<Triangle>& faces() const { return faces_; }
  const Eigen::MatrixXd& joint_regressor() const { return joint_regressor_; }
  const Eigen::MatrixXd& skin_weights() const { return skin_weights_; }
  const Eigen::MatrixXd& shape_basis() const { return shape_basis_; }
  const std::array<int, kHandJoints>& parents() const { return parents_; }
  Handedness handedness() const { return handedness_; }

  /// Rest joints at zero shape (regressor applied to the template).
  const JointArray& rest_joints() const { return rest_joints_; }

  /// Articulation slot (0..14) of a joint, or -1 for the wrist and leaves.
  int articulation_slot(int joint) const { return articulation_slot_[joint]; }

  /// Non-zero skinning influences per vertex.
  const std::vector<std::vector<std::pair<int, double>>>& influences() const {
    return influences_;
  }

  /// d(rest joints)/d(beta), 63 x 10 (joint-major xyz rows).
  const Eigen::MatrixXd& joint_shape_basis() const { return joint_shape_basis_; }

  /// Shape-blended template, V x 3.
  Eigen::MatrixX3d shaped_vertices(const HandShape& shape) const;
  JointArray shaped_joints(const HandShape& shape) const;

 private:
  Eigen::MatrixX3d template_vertices_;
  std::vector<Triangle> faces_;
  Eigen::MatrixXd joint_regressor_;
  Eigen::MatrixXd skin_weights_;
  Eigen::MatrixXd shape_basis_;
  std::array<int, kHandJoints> parents_;
  Handedness handedness_;
  JointArray rest_joints_;
  std::array<int, kHandJoints> articulation_slot_;
  std::vector<std::vector<std::pair<int, double>>> influences_;
  Eigen::MatrixXd joint_shape_basis_;
};

/// Left-hand model obtained by reflecting a model across x = 0.
HandModelData mirror_model(const HandModelData& data);

/// Posed kinematic state shared by FK, skinning and their Jacobians.
struct HandKinematics {
  JointArray rest_joints;                      // J_i at the given shape
  JointArray joints;                           // posed P_i
  std::array<Mat3, kHandJoints> rotations;     // accumulated A_i
  /// World-frame rotation axes of each joint's three axis-angle
  /// parameters (columns); a point rigidly attached below joint m moves by
  /// axes[m].col(k).cross(y - joints[m]) per unit of parameter k.
  std::array<Mat3, kHandJoints> axes;
  Vec3 translation = Vec3::Zero();
};

HandKinematics pose_hand(const HandModelData& data, const HandShape& shape,
                         const HandPose& pose);

/// 21 posed joints (MediaPipe order, wrist first).
JointArray forward_kinematics(const HandModelData& data, const HandShape& shape,
                              const HandPose& pose);

/// d(joints)/d(pose vector), 63 x 51.
Eigen::MatrixXd forward_kinematics_jacobian(const HandModelData& data,
                                            const HandKinematics& kin);

/// d(joints)/d(beta) at fixed pose, 63 x 10.
Eigen::MatrixXd forward_kinematics_shape_jacobian(const HandModelData& data,
                                                  const HandKinematics& kin);

/// Linear blend skinning of the shape-blended template.
TriangleMesh skin_mesh(const HandModelData& data, const HandShape& shape,
                       const HandPose& pose);

/// Skinned positions only (V x 3) for a precomputed kinematic state.
Eigen::MatrixX3d skinned_vertices(const HandModelData& data,
                                  const Eigen::MatrixX3d& shaped,
                                  const HandKinematics& kin);

/// d(skinned vertex)/d(pose vector), 3 x 51.
Eigen::Matrix<double, 3, kPoseParams> skinned_vertex_pose_jacobian(
    const HandModelData& data, const Eigen::MatrixX3d& shaped,
    const HandKinematics& kin, int vertex);

/// d(skinned vertex)/d(beta), 3 x 10. `joint_shape_jac` is the output of
/// forward_kinematics_shape_jacobian for the same state.
Eigen::Matrix<double, 3, kShapeParams> skinned_vertex_shape_jacobian(
    const HandModelData& data, const HandKinematics& kin,
    const Eigen::MatrixXd& joint_shape_jac, int vertex);

/// Procedural capsule-skeleton hand with valid regressor, weights and shape
/// basis. Every value is float-representable so the binary file round-trips.
HandModelData make_synthetic_hand_model(Handedness handedness = Handedness::kRight);

/// Binary container: magic "HOAHAND1", uint32 array count, then per array
/// {uint16 name length, name, uint8 dtype (0 = float32, 1 = int32),
/// uint32 ndim, uint32 dims[ndim], little-endian data}. Arrays:
/// template_verts, faces, joint_regressor, skin_weights, shape_basis,
/// parents, handedness.
std::string hand_model_to_bytes(const HandModelData& data);
HandModelData hand_model_from_bytes(const std::string& bytes);
void save_hand_model(const std::filesystem::path& path, const HandModelData& data);
HandModelData load_hand_model(const std::filesystem::path& path);

}  // namespace hoa
