#pragma once

#include <vector>

#include "hoa/hand_model.hpp"
#include "hoa/mesh_query.hpp"
#include "hoa/solver.hpp"

namespace hoa {

using PoseRow = Eigen::Matrix<double, 1, kPoseParams>;
using ShapeRow = Eigen::Matrix<double, 1, kShapeParams>;

/// Skinned hand mesh at one (shape, pose) with signed-distance queries and
/// their derivatives through the closest surface point.
class HandSurface {
 public:
  HandSurface(const HandModelData& data, const HandShape& shape, const HandPose& pose);

  const TriangleMesh& mesh() const { return index_.mesh(); }
  const MeshIndex& index() const { return index_; }
  const HandKinematics& kinematics() const { return kin_; }

  double signed_distance(const Vec3& p) const { return index_.signed_distance(p); }
  double unsigned_distance(const Vec3& p) const { return index_.unsigned_distance(p); }

  /// Signed distance of p and, optionally, its derivatives with respect to
  /// the pose vector and the shape coefficients. The closest point is held
  /// fixed in barycentric coordinates, so the derivative is
  /// -n^T d(closest point), n the outward direction from the surface to p.
  double residual(const Vec3& p, PoseRow* d_pose, ShapeRow* d_shape) const;

 private:
  const HandModelData* data_;
  Eigen::MatrixX3d shaped_;
  HandKinematics kin_;
  Eigen::MatrixXd joint_shape_jac_;
  MeshIndex index_;
};

struct CalibrationOptions {
  int max_rounds = 20;
  double beta_tolerance = 1e-4;
  /// Points farther than this from the initialized mesh are ignored.
  double gate = 0.02;
  std::size_t min_points = 500;
  int inner_iterations = 10;
};

struct CalibrationResult {
  HandShape shape;
  std::vector<HandPose> poses;
  int rounds = 0;
};

/// Alternating shape calibration: with beta fixed each pose is fitted to its
/// cloud by signed distance, then beta is fitted to all clouds with poses
/// fixed. Throws calibration-underconstrained unless some cloud has at least
/// `min_points` points within `gate` of its initialized mesh.
CalibrationResult calibrate_shape(const HandModelData& data,
                                  const std::vector<std::vector<Vec3>>& clouds,
                                  const std::vector<HandPose>& init_poses,
                                  const CalibrationOptions& options = {});

}  // namespace hoa
