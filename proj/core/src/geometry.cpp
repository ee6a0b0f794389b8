#include "hoa/geometry.hpp"

#include <cmath>
#include <numbers>

#include <nlohmann/json.hpp>

#include "hoa/error.hpp"
#include "io_util.hpp"

namespace hoa {

Mat3 skew(const Vec3& v) {
  Mat3 m;
  m << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
       -v.y(), v.x(), 0.0;
  return m;
}

Mat3 so3_exp(const Vec3& rotvec) {
  const double theta2 = rotvec.squaredNorm();
  if (theta2 == 0.0) return Mat3::Identity();
  const Mat3 k = skew(rotvec);
  double a, b;
  if (theta2 < 1e-12) {
    a = 1.0 - theta2 / 6.0;
    b = 0.5 - theta2 / 24.0;
  } else {
    const double theta = std::sqrt(theta2);
    a = std::sin(theta) / theta;
    b = (1.0 - std::cos(theta)) / theta2;
  }
  return Mat3::Identity() + a * k + b * k * k;
}

Vec3 so3_log(const Mat3& rotation) {
  const Eigen::AngleAxisd aa(rotation);
  return aa.angle() * aa.axis();
}

Mat3 so3_left_jacobian(const Vec3& rotvec) {
  const double theta2 = rotvec.squaredNorm();
  const Mat3 k = skew(rotvec);
  double a, b;
  if (theta2 < 1e-10) {
    a = 0.5 - theta2 / 24.0;
    b = 1.0 / 6.0 - theta2 / 120.0;
  } else {
    const double theta = std::sqrt(theta2);
    a = (1.0 - std::cos(theta)) / theta2;
    b = (theta - std::sin(theta)) / (theta2 * theta);
  }
  return Mat3::Identity() + a * k + b * k * k;
}

Quat hemisphere_aligned(const Quat& q, const Quat& reference) {
  if (q.coeffs().dot(reference.coeffs()) < 0.0) return Quat(-q.coeffs());
  return q;
}

RigidTransform::RigidTransform(const Quat& rotation, const Vec3& translation)
    : rotation_(rotation.normalized()), translation_(translation) {}

RigidTransform::RigidTransform(const Mat3& rotation, const Vec3& translation)
    : rotation_(Quat(rotation).normalized()), translation_(translation) {}

RigidTransform RigidTransform::from_axis_angle(const Vec3& rotvec,
                                               const Vec3& translation) {
  return RigidTransform(so3_exp(rotvec), translation);
}

Eigen::Matrix4d RigidTransform::matrix() const {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.topLeftCorner<3, 3>() = rotation_matrix();
  m.topRightCorner<3, 1>() = translation_;
  return m;
}

RigidTransform RigidTransform::operator*(const RigidTransform& other) const {
  return RigidTransform(rotation_ * other.rotation_,
                        rotation_ * other.translation_ + translation_);
}

RigidTransform RigidTransform::inverse() const {
  const Quat inv = rotation_.conjugate();
  return RigidTransform(inv, -(inv * translation_));
}

RigidTransform RigidTransform::retract(const Vec6& delta) const {
  const Vec3 omega = delta.head<3>();
  const double angle = omega.norm();
  Quat dq = Quat::Identity();
  if (angle > 0.0) dq = Quat(Eigen::AngleAxisd(angle, omega / angle));
  return RigidTransform(dq * rotation_, translation_ + delta.tail<3>());
}

RigidTransform RigidTransform::aligned_to(
    const RigidTransform& reference) const {
  RigidTransform out = *this;
  out.rotation_ = hemisphere_aligned(rotation_, reference.rotation_);
  return out;
}

bool RigidTransform::is_finite() const {
  return rotation_.coeffs().allFinite() && translation_.allFinite();
}

PoseDistance pose_distance(const RigidTransform& a, const RigidTransform& b) {
  const Quat rel = a.rotation().conjugate() * b.rotation();
  const double angle =
      2.0 * std::atan2(rel.vec().norm(), std::abs(rel.w()));
  return {angle * 180.0 / std::numbers::pi,
          (a.translation() - b.translation()).norm()};
}

Ray Ray::through(const Vec3& origin, const Vec3& direction) {
  return Ray{origin, direction.normalized()};
}

CameraModel::CameraModel(std::string name, double fx, double fy, double cx,
                         double cy, int width, int height,
                         const RigidTransform& camera_to_world)
    : name_(std::move(name)),
      fx_(fx),
      fy_(fy),
      cx_(cx),
      cy_(cy),
      width_(width),
      height_(height),
      camera_to_world_(camera_to_world),
      world_to_camera_(camera_to_world.inverse()) {
  if (!(fx > 0.0) || !(fy > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument,
                "camera " + name_ + ": focal lengths must be positive");
  }
  if (!(cx > 0.0 && cx < width) || !(cy > 0.0 && cy < height)) {
    throw Error(ErrorCode::kInvalidArgument,
                "camera " + name_ + ": principal point outside image");
  }
}

bool CameraModel::in_image(const Vec2& pixel) const {
  return pixel.x() >= 0.0 && pixel.y() >= 0.0 && pixel.x() <= width_ &&
         pixel.y() <= height_;
}

Ray CameraModel::back_project(const Vec2& pixel) const {
  const Vec3 dir_cam((pixel.x() - cx_) / fx_, (pixel.y() - cy_) / fy_, 1.0);
  return Ray::through(center(), camera_to_world_.rotation() * dir_cam);
}

Vec2 project(const CameraModel& camera, const Vec3& point_world) {
  return project(camera, point_world, nullptr);
}

Vec2 project(const CameraModel& camera, const Vec3& point_world,
             Eigen::Matrix<double, 2, 3>* jacobian) {
  const Vec3 p = camera.world_to_camera() * point_world;
  if (!(p.z() > 0.0)) {
    throw Error(ErrorCode::kBehindCamera,
                "point has depth " + detail::format_double(p.z()) +
                    " in camera " + camera.name());
  }
  const double inv_z = 1.0 / p.z();
  const Vec2 pixel(camera.fx() * p.x() * inv_z + camera.cx(),
                   camera.fy() * p.y() * inv_z + camera.cy());
  if (jacobian != nullptr) {
    Eigen::Matrix<double, 2, 3> d_cam;
    d_cam << camera.fx() * inv_z, 0.0, -camera.fx() * p.x() * inv_z * inv_z,
        0.0, camera.fy() * inv_z, -camera.fy() * p.y() * inv_z * inv_z;
    *jacobian = d_cam * camera.world_to_camera().rotation_matrix();
  }
  return pixel;
}

Vec3 triangulate_pair(const CameraModel& cam_a, const Vec2& pix_a,
                      const CameraModel& cam_b, const Vec2& pix_b) {
  const Ray ra = cam_a.back_project(pix_a);
  const Ray rb = cam_b.back_project(pix_b);
  const Vec3 w0 = ra.origin - rb.origin;
  if (w0.norm() < 1e-12) {
    throw Error(ErrorCode::kDegeneratePair,
                "cameras " + cam_a.name() + " and " + cam_b.name() +
                    " share a center");
  }
  const double b = ra.direction.dot(rb.direction);
  const double denom = 1.0 - b * b;
  // sin of the angle between the rays
  if (std::sqrt(std::max(denom, 0.0)) < 1e-8) {
    throw Error(ErrorCode::kDegeneratePair,
                "rays from " + cam_a.name() + " and " + cam_b.name() +
                    " are parallel");
  }
  const double d = ra.direction.dot(w0);
  const double e = rb.direction.dot(w0);
  const double s = (b * e - d) / denom;
  const double t = (e - b * d) / denom;
  const Vec3 pa = ra.origin + s * ra.direction;
  const Vec3 pb = rb.origin + t * rb.direction;
  return 0.5 * (pa + pb);
}

CameraRig parse_camera_rig(std::string_view json_text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kFormat, std::string("cameras.json: ") + e.what());
  }
  if (!doc.is_array()) {
    throw Error(ErrorCode::kFormat, "cameras.json: expected an array");
  }
  CameraRig rig;
  for (const auto& c : doc) {
    try {
      const Quat q(c.at("qw").get<double>(), c.at("qx").get<double>(),
                   c.at("qy").get<double>(), c.at("qz").get<double>());
      const Vec3 t(c.at("tx").get<double>(), c.at("ty").get<double>(),
                   c.at("tz").get<double>());
      rig.emplace_back(c.at("name").get<std::string>(),
                       c.at("fx").get<double>(), c.at("fy").get<double>(),
                       c.at("cx").get<double>(), c.at("cy").get<double>(),
                       c.at("width").get<int>(), c.at("height").get<int>(),
                       RigidTransform(q, t));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kFormat, std::string("cameras.json: ") + e.what());
    }
  }
  return rig;
}

std::string camera_rig_to_json(const CameraRig& rig) {
  nlohmann::ordered_json doc = nlohmann::ordered_json::array();
  for (const auto& c : rig) {
    const Quat& q = c.camera_to_world().rotation();
    const Vec3& t = c.camera_to_world().translation();
    doc.push_back({{"name", c.name()},
                   {"fx", c.fx()},
                   {"fy", c.fy()},
                   {"cx", c.cx()},
                   {"cy", c.cy()},
                   {"width", c.width()},
                   {"height", c.height()},
                   {"qw", q.w()},
                   {"qx", q.x()},
                   {"qy", q.y()},
                   {"qz", q.z()},
                   {"tx", t.x()},
                   {"ty", t.y()},
                   {"tz", t.z()}});
  }
  return doc.dump(2) + "\n";
}

CameraRig load_camera_rig(const std::filesystem::path& path) {
  return parse_camera_rig(detail::read_file(path));
}

const CameraModel& find_camera(const CameraRig& rig, std::string_view name) {
  for (const auto& c : rig) {
    if (c.name() == name) return c;
  }
  throw Error(ErrorCode::kMissingInput,
              "camera '" + std::string(name) + "' not in rig");
}

}  // namespace hoa
