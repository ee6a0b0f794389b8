#include "hoa/hand_model.hpp"

#include <cmath>

#include "hoa/error.hpp"

namespace hoa {

std::string_view handedness_name(Handedness h) {
  return h == Handedness::kLeft ? "left" : "right";
}

void HandShape::validate() const {
  if (!beta.allFinite() || beta.cwiseAbs().maxCoeff() > 10.0) {
    throw Error(ErrorCode::kInvalidArgument,
                "hand shape coefficients must be finite and within [-10, 10]");
  }
}

PoseVector HandPose::to_vector() const {
  PoseVector v;
  v.segment<3>(kPoseGlobalRotation) = global_rotation;
  v.segment<3 * kArticulatedJoints>(kPoseArticulation) = articulation;
  v.segment<3>(kPoseTranslation) = global_translation;
  return v;
}

HandPose HandPose::from_vector(const PoseVector& v) {
  HandPose p;
  p.global_rotation = v.segment<3>(kPoseGlobalRotation);
  p.articulation = v.segment<3 * kArticulatedJoints>(kPoseArticulation);
  p.global_translation = v.segment<3>(kPoseTranslation);
  return p;
}

RigidTransform HandPose::global_transform() const {
  return RigidTransform::from_axis_angle(global_rotation, global_translation);
}

bool HandPose::is_finite() const {
  return global_rotation.allFinite() && articulation.allFinite() &&
         global_translation.allFinite();
}

HandPose mirror_pose(const HandPose& pose) {
  HandPose m = pose;
  auto mirror_rot = [](Vec3 r) { return Vec3(r.x(), -r.y(), -r.z()); };
  m.global_rotation = mirror_rot(pose.global_rotation);
  for (int s = 0; s < kArticulatedJoints; ++s) {
    m.articulation.segment<3>(3 * s) =
        mirror_rot(pose.articulation.segment<3>(3 * s));
  }
  m.global_translation.x() = -pose.global_translation.x();
  return m;
}

HandModelData::HandModelData(Eigen::MatrixX3d template_vertices,
                             std::vector<Triangle> faces,
                             Eigen::MatrixXd joint_regressor,
                             Eigen::MatrixXd skin_weights,
                             Eigen::MatrixXd shape_basis,
                             std::array<int, kHandJoints> parents,
                             Handedness handedness)
    : template_vertices_(std::move(template_vertices)),
      faces_(std::move(faces)),
      joint_regressor_(std::move(joint_regressor)),
      skin_weights_(std::move(skin_weights)),
      shape_basis_(std::move(shape_basis)),
      parents_(parents),
      handedness_(handedness) {
  const Eigen::Index nv = template_vertices_.rows();
  auto fail = [](const std::string& what) {
    throw Error(ErrorCode::kInvalidArgument, "hand model: " + what);
  };
  if (nv == 0) fail("no template vertices");
  if (joint_regressor_.rows() != kHandJoints || joint_regressor_.cols() != nv) {
    fail("joint regressor must be 21 x V");
  }
  if (skin_weights_.rows() != nv || skin_weights_.cols() != kHandJoints) {
    fail("skin weights must be V x 21");
  }
  if (shape_basis_.rows() != 3 * nv || shape_basis_.cols() != kShapeParams) {
    fail("shape basis must be 3V x 10");
  }
  for (const auto& f : faces_) {
    for (int idx : f) {
      if (idx < 0 || idx >= nv) fail("face index out of range");
    }
  }
  for (int i = 0; i < kHandJoints; ++i) {
    if (std::abs(joint_regressor_.row(i).sum() - 1.0) > 1e-6) {
      fail("regressor row " + std::to_string(i) + " does not sum to 1");
    }
  }
  for (Eigen::Index v = 0; v < nv; ++v) {
    if (std::abs(skin_weights_.row(v).sum() - 1.0) > 1e-6) {
      fail("skin weights of vertex " + std::to_string(v) + " do not sum to 1");
    }
  }
  if (parents_[0] != -1) fail("joint 0 (wrist) must be the root");
  std::array<bool, kHandJoints> has_child{};
  for (int i = 1; i < kHandJoints; ++i) {
    if (parents_[i] < 0 || parents_[i] >= i) {
      fail("parent table must list parents before children");
    }
    has_child[parents_[i]] = true;
  }
  int slot = 0;
  for (int i = 0; i < kHandJoints; ++i) {
    articulation_slot_[i] = (i > 0 && has_child[i]) ? slot++ : -1;
  }
  if (slot != kArticulatedJoints) {
    fail("kinematic tree must have 15 articulated joints, found " +
         std::to_string(slot));
  }

  influences_.resize(nv);
  for (Eigen::Index v = 0; v < nv; ++v) {
    for (int j = 0; j < kHandJoints; ++j) {
      if (skin_weights_(v, j) != 0.0) influences_[v].emplace_back(j, skin_weights_(v, j));
    }
  }

  joint_shape_basis_ = Eigen::MatrixXd::Zero(3 * kHandJoints, kShapeParams);
  for (int i = 0; i < kHandJoints; ++i) {
    for (Eigen::Index v = 0; v < nv; ++v) {
      const double r = joint_regressor_(i, v);
      if (r == 0.0) continue;
      joint_shape_basis_.middleRows<3>(3 * i) += r * shape_basis_.middleRows<3>(3 * v);
    }
  }
  rest_joints_ = shaped_joints(HandShape::zero());
}

Eigen::MatrixX3d HandModelData::shaped_vertices(const HandShape& shape) const {
  const Eigen::VectorXd offsets = shape_basis_ * shape.beta;
  Eigen::MatrixX3d v = template_vertices_;
  for (Eigen::Index i = 0; i < v.rows(); ++i) {
    v(i, 0) += offsets(3 * i);
    v(i, 1) += offsets(3 * i + 1);
    v(i, 2) += offsets(3 * i + 2);
  }
  return v;
}

JointArray HandModelData::shaped_joints(const HandShape& shape) const {
  const Eigen::MatrixX3d verts = shaped_vertices(shape);
  const Eigen::Matrix<double, kHandJoints, 3> j = joint_regressor_ * verts;
  JointArray out;
  for (int i = 0; i < kHandJoints; ++i) out[i] = j.row(i).transpose();
  return out;
}

HandModelData mirror_model(const HandModelData& data) {
  Eigen::MatrixX3d verts = data.template_vertices();
  verts.col(0) = -verts.col(0);
  Eigen::MatrixXd basis = data.shape_basis();
  for (Eigen::Index v = 0; v < verts.rows(); ++v) basis.row(3 * v) *= -1.0;
  std::vector<Triangle> faces = data.faces();
  for (auto& f : faces) std::swap(f[1], f[2]);
  const Handedness flipped = data.handedness() == Handedness::kRight
                                 ? Handedness::kLeft
                                 : Handedness::kRight;
  return HandModelData(std::move(verts), std::move(faces), data.joint_regressor(),
                       data.skin_weights(), std::move(basis), data.parents(),
                       flipped);
}

HandKinematics pose_hand(const HandModelData& data, const HandShape& shape,
                         const HandPose& pose) {
  HandKinematics kin;
  kin.rest_joints = data.shaped_joints(shape);
  kin.translation = pose.global_translation;
  const auto& parents = data.parents();
  // Displacement of each joint relative to its rest position, before the
  // global translation; exactly zero for the identity pose.
  JointArray displacement;
  displacement[0] = Vec3::Zero();
  kin.rotations[0] = so3_exp(pose.global_rotation);
  kin.axes[0] = so3_left_jacobian(pose.global_rotation);
  kin.joints[0] = kin.rest_joints[0] + kin.translation;
  for (int i = 1; i < kHandJoints; ++i) {
    const int p = parents[i];
    const Vec3 d = kin.rest_joints[i] - kin.rest_joints[p];
    displacement[i] = displacement[p] + (kin.rotations[p] * d - d);
    kin.joints[i] = kin.rest_joints[i] + displacement[i] + kin.translation;
    const int slot = data.articulation_slot(i);
    if (slot >= 0) {
      const Vec3 r = pose.articulation.segment<3>(3 * slot);
      kin.rotations[i] = kin.rotations[p] * so3_exp(r);
      kin.axes[i] = kin.rotations[p] * so3_left_jacobian(r);
    } else {
      kin.rotations[i] = kin.rotations[p];
      kin.axes[i] = Mat3::Zero();
    }
  }
  return kin;
}

JointArray forward_kinematics(const HandModelData& data, const HandShape& shape,
                              const HandPose& pose) {
  return pose_hand(data, shape, pose).joints;
}

namespace {

/// Column of the first pose parameter owned by joint m, or -1.
int pose_column(const HandModelData& data, int m) {
  if (m == 0) return kPoseGlobalRotation;
  const int slot = data.articulation_slot(m);
  return slot >= 0 ? kPoseArticulation + 3 * slot : -1;
}

}  // namespace

Eigen::MatrixXd forward_kinematics_jacobian(const HandModelData& data,
                                            const HandKinematics& kin) {
  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(3 * kHandJoints, kPoseParams);
  const auto& parents = data.parents();
  for (int i = 0; i < kHandJoints; ++i) {
    jac.block<3, 3>(3 * i, kPoseTranslation).setIdentity();
    for (int m = parents[i]; m >= 0; m = parents[m]) {
      const int col = pose_column(data, m);
      if (col < 0) continue;
      const Vec3 lever = kin.joints[i] - kin.joints[m];
      for (int k = 0; k < 3; ++k) {
        jac.block<3, 1>(3 * i, col + k) = kin.axes[m].col(k).cross(lever);
      }
    }
  }
  return jac;
}

Eigen::MatrixXd forward_kinematics_shape_jacobian(const HandModelData& data,
                                                  const HandKinematics& kin) {
  const Eigen::MatrixXd& dj = data.joint_shape_basis();
  Eigen::MatrixXd out(3 * kHandJoints, kShapeParams);
  out.middleRows<3>(0) = dj.middleRows<3>(0);
  for (int i = 1; i < kHandJoints; ++i) {
    const int p = data.parents()[i];
    out.middleRows<3>(3 * i) =
        out.middleRows<3>(3 * p) +
        kin.rotations[p] * (dj.middleRows<3>(3 * i) - dj.middleRows<3>(3 * p));
  }
  return out;
}

Eigen::MatrixX3d skinned_vertices(const HandModelData& data,
                                  const Eigen::MatrixX3d& shaped,
                                  const HandKinematics& kin) {
  // G_j(x) = x + (A_j x - x) + c_j with c_j = P_j - A_j J_j; both correction
  // terms vanish exactly at the identity pose.
  std::array<Vec3, kHandJoints> offsets;
  for (int j = 0; j < kHandJoints; ++j) {
    offsets[j] = kin.joints[j] - kin.rotations[j] * kin.rest_joints[j];
  }
  Eigen::MatrixX3d out(shaped.rows(), 3);
  const auto& influences = data.influences();
  for (Eigen::Index v = 0; v < shaped.rows(); ++v) {
    const Vec3 x = shaped.row(v).transpose();
    Vec3 delta = Vec3::Zero();
    for (const auto& [j, w] : influences[v]) {
      delta += w * ((kin.rotations[j] * x - x) + offsets[j]);
    }
    out.row(v) = (x + delta).transpose();
  }
  return out;
}

TriangleMesh skin_mesh(const HandModelData& data, const HandShape& shape,
                       const HandPose& pose) {
  const HandKinematics kin = pose_hand(data, shape, pose);
  const Eigen::MatrixX3d verts =
      skinned_vertices(data, data.shaped_vertices(shape), kin);
  TriangleMesh mesh;
  mesh.vertices.resize(verts.rows());
  for (Eigen::Index v = 0; v < verts.rows(); ++v) {
    mesh.vertices[v] = verts.row(v).transpose();
  }
  mesh.triangles = data.faces();
  return mesh;
}

Eigen::Matrix<double, 3, kPoseParams> skinned_vertex_pose_jacobian(
    const HandModelData& data, const Eigen::MatrixX3d& shaped,
    const HandKinematics& kin, int vertex) {
  Eigen::Matrix<double, 3, kPoseParams> jac =
      Eigen::Matrix<double, 3, kPoseParams>::Zero();
  const Vec3 x = shaped.row(vertex).transpose();
  const auto& parents = data.parents();
  for (const auto& [j, w] : data.influences()[vertex]) {
    const Vec3 y = kin.rotations[j] * (x - kin.rest_joints[j]) + kin.joints[j];
    for (int m = j; m >= 0; m = parents[m]) {
      const int col = pose_column(data, m);
      if (col < 0) continue;
      const Vec3 lever = y - kin.joints[m];
      for (int k = 0; k < 3; ++k) {
        jac.col(col + k) += w * kin.axes[m].col(k).cross(lever);
      }
    }
    jac.block<3, 3>(0, kPoseTranslation) += w * Mat3::Identity();
  }
  return jac;
}

Eigen::Matrix<double, 3, kShapeParams> skinned_vertex_shape_jacobian(
    const HandModelData& data, const HandKinematics& kin,
    const Eigen::MatrixXd& joint_shape_jac, int vertex) {
  Eigen::Matrix<double, 3, kShapeParams> jac =
      Eigen::Matrix<double, 3, kShapeParams>::Zero();
  const Eigen::Matrix<double, 3, kShapeParams> sv =
      data.shape_basis().middleRows<3>(3 * vertex);
  const Eigen::MatrixXd& dj = data.joint_shape_basis();
  for (const auto& [j, w] : data.influences()[vertex]) {
    jac += w * (joint_shape_jac.middleRows<3>(3 * j) +
                kin.rotations[j] * (sv - dj.middleRows<3>(3 * j)));
  }
  return jac;
}

}  // namespace hoa
