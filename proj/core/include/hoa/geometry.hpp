#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace hoa {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat3 = Eigen::Matrix3d;
using Quat = Eigen::Quaterniond;

Mat3 skew(const Vec3& v);

/// Rodrigues map from an axis-angle vector (rad) to a rotation matrix.
/// Returns the identity bit-exactly for a zero vector.
Mat3 so3_exp(const Vec3& rotvec);
Vec3 so3_log(const Mat3& rotation);

/// Left Jacobian of SO(3): so3_exp(v + d) ~= so3_exp(J_l(v) d) so3_exp(v).
Mat3 so3_left_jacobian(const Vec3& rotvec);

/// Returns `q` or `-q`, whichever lies in the hemisphere of `reference`.
Quat hemisphere_aligned(const Quat& q, const Quat& reference);

/// Rigid motion x -> R x + t with R held as a unit quaternion (w-first in all
/// file formats).
class RigidTransform {
 public:
  RigidTransform() : rotation_(Quat::Identity()), translation_(Vec3::Zero()) {}
  RigidTransform(const Quat& rotation, const Vec3& translation);
  RigidTransform(const Mat3& rotation, const Vec3& translation);

  static RigidTransform identity() { return {}; }
  static RigidTransform from_axis_angle(const Vec3& rotvec,
                                        const Vec3& translation);

  const Quat& rotation() const { return rotation_; }
  const Vec3& translation() const { return translation_; }
  Mat3 rotation_matrix() const { return rotation_.toRotationMatrix(); }
  Eigen::Matrix4d matrix() const;

  Vec3 operator*(const Vec3& point) const {
    return rotation_ * point + translation_;
  }
  RigidTransform operator*(const RigidTransform& other) const;
  RigidTransform inverse() const;

  /// Tangent update used by all pose solvers: delta = (omega, v) gives
  /// rotation so3_exp(omega) * R and translation t + v.
  RigidTransform retract(const Vec6& delta) const;

  /// Same transform with the quaternion sign chosen to match `reference`.
  RigidTransform aligned_to(const RigidTransform& reference) const;

  bool is_finite() const;

 private:
  Quat rotation_;
  Vec3 translation_;
};

struct PoseDistance {
  double angle_deg = 0.0;
  double distance_m = 0.0;
};

/// Geodesic rotation angle (double-cover invariant) and translation distance.
PoseDistance pose_distance(const RigidTransform& a, const RigidTransform& b);

struct Ray {
  Vec3 origin;
  Vec3 direction;  // unit length

  static Ray through(const Vec3& origin, const Vec3& direction);
};

/// Rectified pinhole camera. `camera_to_world` maps camera-frame points
/// (x right, y down, z forward) into the world frame.
class CameraModel {
 public:
  CameraModel(std::string name, double fx, double fy, double cx, double cy,
              int width, int height, const RigidTransform& camera_to_world);

  const std::string& name() const { return name_; }
  double fx() const { return fx_; }
  double fy() const { return fy_; }
  double cx() const { return cx_; }
  double cy() const { return cy_; }
  int width() const { return width_; }
  int height() const { return height_; }
  const RigidTransform& camera_to_world() const { return camera_to_world_; }
  const RigidTransform& world_to_camera() const { return world_to_camera_; }
  Vec3 center() const { return camera_to_world_.translation(); }

  bool in_image(const Vec2& pixel) const;
  Ray back_project(const Vec2& pixel) const;

 private:
  std::string name_;
  double fx_, fy_, cx_, cy_;
  int width_, height_;
  RigidTransform camera_to_world_;
  RigidTransform world_to_camera_;
};

using CameraRig = std::vector<CameraModel>;

/// Pixel coordinates of a world point. Throws behind-camera for z <= 0.
Vec2 project(const CameraModel& camera, const Vec3& point_world);

/// As above; also writes d(pixel)/d(point_world) when `jacobian` is set.
Vec2 project(const CameraModel& camera, const Vec3& point_world,
             Eigen::Matrix<double, 2, 3>* jacobian);

/// Midpoint of the shortest segment between the two back-projected rays.
/// Throws degenerate-pair for coincident centers or near-parallel rays.
Vec3 triangulate_pair(const CameraModel& cam_a, const Vec2& pix_a,
                      const CameraModel& cam_b, const Vec2& pix_b);

/// cameras.json: array of {name, fx, fy, cx, cy, width, height,
/// qw, qx, qy, qz, tx, ty, tz} with camera-to-world extrinsics.
CameraRig parse_camera_rig(std::string_view json_text);
std::string camera_rig_to_json(const CameraRig& rig);
CameraRig load_camera_rig(const std::filesystem::path& path);

const CameraModel& find_camera(const CameraRig& rig, std::string_view name);

}  // namespace hoa
