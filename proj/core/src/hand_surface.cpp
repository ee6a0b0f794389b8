#include "hoa/hand_surface.hpp"

#include "hoa/error.hpp"
#include "lm.hpp"

namespace hoa {

namespace {

TriangleMesh build_mesh(const HandModelData& data, const Eigen::MatrixX3d& shaped,
                        const HandKinematics& kin) {
  const Eigen::MatrixX3d verts = skinned_vertices(data, shaped, kin);
  TriangleMesh mesh;
  mesh.vertices.resize(verts.rows());
  for (Eigen::Index v = 0; v < verts.rows(); ++v) mesh.vertices[v] = verts.row(v).transpose();
  mesh.triangles = data.faces();
  return mesh;
}

}  // namespace

HandSurface::HandSurface(const HandModelData& data, const HandShape& shape,
                         const HandPose& pose)
    : data_(&data),
      shaped_(data.shaped_vertices(shape)),
      kin_(pose_hand(data, shape, pose)),
      joint_shape_jac_(forward_kinematics_shape_jacobian(data, kin_)),
      index_(build_mesh(data, shaped_, kin_)) {}

double HandSurface::residual(const Vec3& p, PoseRow* d_pose, ShapeRow* d_shape) const {
  ClosestPoint cp;
  const double sd = index_.signed_distance(p, &cp);
  if (d_pose == nullptr && d_shape == nullptr) return sd;

  Vec3 n;
  if (cp.distance > 1e-12) {
    n = (p - cp.point) / cp.distance;
    if (sd < 0.0) n = -n;
  } else {
    n = index_.mesh().triangle_normal(cp.triangle);
  }
  const Triangle& tri = index_.mesh().triangles[cp.triangle];
  if (d_pose != nullptr) {
    Eigen::Matrix<double, 3, kPoseParams> dy = Eigen::Matrix<double, 3, kPoseParams>::Zero();
    for (int c = 0; c < 3; ++c) {
      if (cp.barycentric[c] == 0.0) continue;
      dy += cp.barycentric[c] * skinned_vertex_pose_jacobian(*data_, shaped_, kin_, tri[c]);
    }
    *d_pose = -n.transpose() * dy;
  }
  if (d_shape != nullptr) {
    Eigen::Matrix<double, 3, kShapeParams> dy = Eigen::Matrix<double, 3, kShapeParams>::Zero();
    for (int c = 0; c < 3; ++c) {
      if (cp.barycentric[c] == 0.0) continue;
      dy += cp.barycentric[c] *
            skinned_vertex_shape_jacobian(*data_, kin_, joint_shape_jac_, tri[c]);
    }
    *d_shape = -n.transpose() * dy;
  }
  return sd;
}

namespace {

double cloud_loss(const HandModelData& data, const HandShape& shape, const HandPose& pose,
                  const std::vector<Vec3>& points) {
  const HandSurface surface(data, shape, pose);
  double sum = 0.0;
  for (const Vec3& p : points) {
    const double r = surface.signed_distance(p);
    sum += r * r;
  }
  return sum / static_cast<double>(points.size());
}

HandPose fit_pose_to_cloud(const HandModelData& data, const HandShape& shape,
                           const HandPose& init, const std::vector<Vec3>& points,
                           int iterations) {
  const double inv_n = 1.0 / static_cast<double>(points.size());
  auto linearize = [&](const HandPose& pose) {
    const HandSurface surface(data, shape, pose);
    detail::NormalEquations ne;
    ne.hessian = Eigen::MatrixXd::Zero(kPoseParams, kPoseParams);
    ne.gradient = Eigen::VectorXd::Zero(kPoseParams);
    PoseRow j;
    for (const Vec3& p : points) {
      const double r = surface.residual(p, &j, nullptr);
      ne.hessian.selfadjointView<Eigen::Lower>().rankUpdate(j.transpose(), inv_n);
      ne.gradient += (inv_n * r) * j.transpose();
      ne.loss += inv_n * r * r;
    }
    ne.hessian = ne.hessian.selfadjointView<Eigen::Lower>();
    return ne;
  };
  auto loss = [&](const HandPose& pose) { return cloud_loss(data, shape, pose, points); };
  auto apply = [](const HandPose& pose, const Eigen::VectorXd& delta) {
    return HandPose::from_vector(pose.to_vector() + delta);
  };
  detail::LmOptions opts;
  opts.max_iterations = iterations;
  opts.step_tolerance = 1e-7;
  return detail::levenberg_marquardt(init, linearize, loss, apply, opts).state;
}

}  // namespace

CalibrationResult calibrate_shape(const HandModelData& data,
                                  const std::vector<std::vector<Vec3>>& clouds,
                                  const std::vector<HandPose>& init_poses,
                                  const CalibrationOptions& options) {
  if (clouds.size() != init_poses.size()) {
    throw Error(ErrorCode::kInvalidArgument, "one initial pose per cloud is required");
  }
  CalibrationResult result;
  result.poses = init_poses;

  // Gate each cloud against its initialized mesh once.
  std::vector<std::size_t> usable;
  std::vector<std::vector<Vec3>> gated(clouds.size());
  for (std::size_t c = 0; c < clouds.size(); ++c) {
    const HandSurface surface(data, result.shape, init_poses[c]);
    for (const Vec3& p : clouds[c]) {
      if (surface.unsigned_distance(p) <= options.gate) gated[c].push_back(p);
    }
    if (gated[c].size() >= options.min_points) usable.push_back(c);
  }
  if (usable.empty()) {
    throw Error(ErrorCode::kCalibrationUnderconstrained,
                "no cloud has " + std::to_string(options.min_points) +
                    " points within " + std::to_string(options.gate * 100.0) +
                    " cm of its initialized hand mesh");
  }

  auto shape_loss = [&](const HandShape& shape) {
    double total = 0.0;
    for (std::size_t c : usable) total += cloud_loss(data, shape, result.poses[c], gated[c]);
    return total / static_cast<double>(usable.size());
  };
  auto shape_linearize = [&](const HandShape& shape) {
    detail::NormalEquations ne;
    ne.hessian = Eigen::MatrixXd::Zero(kShapeParams, kShapeParams);
    ne.gradient = Eigen::VectorXd::Zero(kShapeParams);
    ShapeRow j;
    for (std::size_t c : usable) {
      const HandSurface surface(data, shape, result.poses[c]);
      const double w =
          1.0 / (static_cast<double>(gated[c].size()) * static_cast<double>(usable.size()));
      for (const Vec3& p : gated[c]) {
        const double r = surface.residual(p, nullptr, &j);
        ne.hessian += w * j.transpose() * j;
        ne.gradient += (w * r) * j.transpose();
        ne.loss += w * r * r;
      }
    }
    return ne;
  };
  auto shape_apply = [](const HandShape& shape, const Eigen::VectorXd& delta) {
    HandShape next;
    next.beta = shape.beta + delta;
    return next;
  };
  detail::LmOptions shape_opts;
  shape_opts.max_iterations = options.inner_iterations;
  shape_opts.step_tolerance = 1e-7;

  for (int round = 0; round < options.max_rounds; ++round) {
    for (std::size_t c : usable) {
      result.poses[c] = fit_pose_to_cloud(data, result.shape, result.poses[c], gated[c],
                                          options.inner_iterations);
    }
    const HandShape previous = result.shape;
    result.shape =
        detail::levenberg_marquardt(previous, shape_linearize, shape_loss, shape_apply,
                                    shape_opts)
            .state;
    result.rounds = round + 1;
    if ((result.shape.beta - previous.beta).norm() < options.beta_tolerance) break;
  }
  return result;
}

}  // namespace hoa
