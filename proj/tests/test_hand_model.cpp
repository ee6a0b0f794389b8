#include <gtest/gtest.h>

#include "hoa/error.hpp"
#include "hoa/hand_model.hpp"
#include "hoa/hand_surface.hpp"
#include "hoa/synthetic.hpp"
#include "test_support.hpp"

namespace hoa {
namespace {

const HandModelData& right_model() {
  static const HandModelData data = make_synthetic_hand_model(Handedness::kRight);
  return data;
}

HandShape random_shape(Rng& rng, double scale = 1.0) {
  HandShape s;
  for (int i = 0; i < kShapeParams; ++i) s.beta[i] = rng.uniform(-scale, scale);
  return s;
}

TEST(ForwardKinematics, RestPoseIsBitExact) {
  const JointArray joints = forward_kinematics(right_model(), HandShape::zero(), HandPose{});
  for (int j = 0; j < kHandJoints; ++j) EXPECT_EQ(joints[j], right_model().rest_joints()[j]);
}

TEST(ForwardKinematics, GlobalTranslationShiftsEveryJoint) {
  Rng rng(31);
  const HandPose pose = random_twist_free_pose(right_model(), rng, 0.5);
  HandPose moved = pose;
  moved.global_translation += Vec3(0.1, 0, 0);
  const JointArray a = forward_kinematics(right_model(), HandShape::zero(), pose);
  const JointArray b = forward_kinematics(right_model(), HandShape::zero(), moved);
  for (int j = 0; j < kHandJoints; ++j) {
    EXPECT_LT((b[j] - a[j] - Vec3(0.1, 0, 0)).cwiseAbs().maxCoeff(), 1e-15);
  }
}

TEST(ForwardKinematics, GlobalRotationAboutWrist) {
  HandPose pose;
  pose.global_rotation = Vec3(0, 0, M_PI / 2);
  const JointArray joints = forward_kinematics(right_model(), HandShape::zero(), pose);
  const auto& rest = right_model().rest_joints();
  const Mat3 rz = Eigen::AngleAxisd(M_PI / 2, Vec3::UnitZ()).toRotationMatrix();
  for (int j = 0; j < kHandJoints; ++j) {
    const Vec3 expected = rest[0] + rz * (rest[j] - rest[0]);
    EXPECT_LT((joints[j] - expected).norm(), 1e-9) << "joint " << j;
  }
}

TEST(ForwardKinematics, WristFollowsTranslation) {
  Rng rng(32);
  for (int i = 0; i < 20; ++i) {
    const HandShape shape = random_shape(rng);
    const HandPose pose = random_twist_free_pose(right_model(), rng, 1.0, 0.3);
    const JointArray joints = forward_kinematics(right_model(), shape, pose);
    const Vec3 rest_wrist = right_model().shaped_joints(shape)[0];
    EXPECT_LT((joints[0] - (rest_wrist + pose.global_translation)).norm(), 1e-12);
  }
}

TEST(ForwardKinematics, JacobianMatchesFiniteDifferences) {
  Rng rng(33);
  for (int trial = 0; trial < 100; ++trial) {
    const HandShape shape = random_shape(rng);
    PoseVector theta;
    for (int k = 0; k < kPoseParams; ++k) theta[k] = rng.uniform(-0.8, 0.8);
    const HandKinematics kin = pose_hand(right_model(), shape, HandPose::from_vector(theta));
    const Eigen::MatrixXd jac = forward_kinematics_jacobian(right_model(), kin);
    Eigen::MatrixXd fd(3 * kHandJoints, kPoseParams);
    for (int k = 0; k < kPoseParams; ++k) {
      PoseVector plus = theta, minus = theta;
      plus[k] += 1e-5;
      minus[k] -= 1e-5;
      const JointArray a = forward_kinematics(right_model(), shape, HandPose::from_vector(plus));
      const JointArray b = forward_kinematics(right_model(), shape, HandPose::from_vector(minus));
      for (int j = 0; j < kHandJoints; ++j) fd.block<3, 1>(3 * j, k) = (a[j] - b[j]) / 2e-5;
    }
    EXPECT_LT((jac - fd).norm() / fd.norm(), 1e-3) << "trial " << trial;

    const Eigen::MatrixXd sjac = forward_kinematics_shape_jacobian(right_model(), kin);
    Eigen::MatrixXd sfd(3 * kHandJoints, kShapeParams);
    for (int k = 0; k < kShapeParams; ++k) {
      HandShape plus = shape, minus = shape;
      plus.beta[k] += 1e-5;
      minus.beta[k] -= 1e-5;
      const HandPose pose = HandPose::from_vector(theta);
      const JointArray a = forward_kinematics(right_model(), plus, pose);
      const JointArray b = forward_kinematics(right_model(), minus, pose);
      for (int j = 0; j < kHandJoints; ++j) sfd.block<3, 1>(3 * j, k) = (a[j] - b[j]) / 2e-5;
    }
    EXPECT_LT((sjac - sfd).norm() / std::max(1e-12, sfd.norm()), 1e-3);
  }
}

TEST(SkinMesh, RestPoseIsTemplate) {
  const TriangleMesh mesh = skin_mesh(right_model(), HandShape::zero(), HandPose{});
  ASSERT_EQ(static_cast<int>(mesh.vertices.size()), right_model().vertex_count());
  for (int v = 0; v < right_model().vertex_count(); ++v) {
    EXPECT_EQ(mesh.vertices[v], Vec3(right_model().template_vertices().row(v).transpose()));
  }
  EXPECT_EQ(mesh.triangles, right_model().faces());
}

TEST(SkinMesh, GlobalOnlyPoseMovesRigidly) {
  HandPose pose;
  pose.global_rotation = Vec3(0.3, -0.7, 1.1);
  pose.global_translation = Vec3(0.2, -0.1, 0.05);
  const TriangleMesh mesh = skin_mesh(right_model(), HandShape::zero(), pose);
  const Vec3 wrist = right_model().rest_joints()[0];
  const Mat3 r = so3_exp(pose.global_rotation);
  for (int v = 0; v < right_model().vertex_count(); ++v) {
    const Vec3 t = right_model().template_vertices().row(v).transpose();
    const Vec3 expected = wrist + r * (t - wrist) + pose.global_translation;
    EXPECT_LT((mesh.vertices[v] - expected).norm(), 1e-9);
  }
}

TEST(SkinMesh, TopologyInvariant) {
  Rng rng(34);
  for (int i = 0; i < 5; ++i) {
    const TriangleMesh mesh = skin_mesh(right_model(), random_shape(rng),
                                        random_twist_free_pose(right_model(), rng, 1.0));
    EXPECT_EQ(mesh.triangles, right_model().faces());
  }
}

TEST(SkinMesh, RegressorTracksPosedJoints) {
  Rng rng(35);
  for (int i = 0; i < 10; ++i) {
    const HandShape shape = random_shape(rng, 0.5);
    const HandPose pose = random_twist_free_pose(right_model(), rng, 0.6);
    const TriangleMesh mesh = skin_mesh(right_model(), shape, pose);
    const JointArray joints = forward_kinematics(right_model(), shape, pose);
    Eigen::MatrixX3d verts(mesh.vertices.size(), 3);
    for (std::size_t v = 0; v < mesh.vertices.size(); ++v) verts.row(v) = mesh.vertices[v];
    const Eigen::MatrixX3d regressed = right_model().joint_regressor() * verts;
    for (int j = 0; j < kHandJoints; ++j) {
      EXPECT_LT((regressed.row(j).transpose() - joints[j]).norm(), 0.002) << "joint " << j;
    }
  }
}

TEST(SkinMesh, VertexJacobiansMatchFiniteDifferences) {
  Rng rng(36);
  const HandShape shape = random_shape(rng, 0.5);
  const PoseVector theta = random_twist_free_pose(right_model(), rng, 0.7).to_vector();
  const HandKinematics kin = pose_hand(right_model(), shape, HandPose::from_vector(theta));
  const Eigen::MatrixX3d shaped = right_model().shaped_vertices(shape);
  for (int v : {0, 17, right_model().vertex_count() / 2, right_model().vertex_count() - 1}) {
    const auto jac = skinned_vertex_pose_jacobian(right_model(), shaped, kin, v);
    for (int k = 0; k < kPoseParams; ++k) {
      PoseVector plus = theta, minus = theta;
      plus[k] += 1e-6;
      minus[k] -= 1e-6;
      const Vec3 a = skin_mesh(right_model(), shape, HandPose::from_vector(plus)).vertices[v];
      const Vec3 b = skin_mesh(right_model(), shape, HandPose::from_vector(minus)).vertices[v];
      EXPECT_LT(((a - b) / 2e-6 - jac.col(k)).norm(), 1e-6);
    }
  }
}

TEST(HandModel, MirrorReflectsJoints) {
  const HandModelData left = mirror_model(right_model());
  EXPECT_EQ(left.handedness(), Handedness::kLeft);
  Rng rng(37);
  const HandPose pose = random_twist_free_pose(right_model(), rng, 0.8);
  const JointArray r = forward_kinematics(right_model(), HandShape::zero(), pose);
  const JointArray l = forward_kinematics(left, HandShape::zero(), mirror_pose(pose));
  for (int j = 0; j < kHandJoints; ++j) {
    EXPECT_LT((l[j] - Vec3(-r[j].x(), r[j].y(), r[j].z())).norm(), 1e-12);
  }
}

TEST(HandModel, BinaryRoundTrip) {
  // Arrays are stored as float32, so values come back rounded once and then stay fixed.
  const std::string bytes = hand_model_to_bytes(right_model());
  const HandModelData back = hand_model_from_bytes(bytes);
  auto rounded = [](const auto& m) { return m.template cast<float>().template cast<double>().eval(); };
  EXPECT_EQ(back.template_vertices(), rounded(right_model().template_vertices()));
  EXPECT_EQ(back.joint_regressor(), rounded(right_model().joint_regressor()));
  EXPECT_EQ(back.skin_weights(), rounded(right_model().skin_weights()));
  EXPECT_EQ(back.shape_basis(), rounded(right_model().shape_basis()));
  EXPECT_EQ(back.parents(), right_model().parents());
  EXPECT_EQ(back.faces(), right_model().faces());
  EXPECT_EQ(hand_model_to_bytes(back), bytes);
  EXPECT_THROW(hand_model_from_bytes("HOAHAND0"), Error);
}

TEST(HandModel, RejectsBadShape) {
  HandShape s;
  s.beta[3] = 11.0;
  EXPECT_THROW(s.validate(), Error);
}

// Clouds of noiseless surface samples from a few poses.
std::vector<std::vector<Vec3>> hand_clouds(const HandShape& shape,
                                           const std::vector<HandPose>& poses, Rng& rng) {
  std::vector<std::vector<Vec3>> clouds;
  for (const auto& pose : poses) {
    std::vector<Vec3> pts;
    for (const auto& s : sample_surface(skin_mesh(right_model(), shape, pose), 1200, rng)) {
      pts.push_back(s.point);
    }
    clouds.push_back(std::move(pts));
  }
  return clouds;
}

std::vector<HandPose> calibration_poses() {
  return {grasp_pose(right_model(), 0.2), grasp_pose(right_model(), 0.6, 0.1),
          grasp_pose(right_model(), 0.9, -0.1)};
}

TEST(CalibrateShape, ZeroShapeStaysNearZero) {
  Rng rng(38);
  const auto poses = calibration_poses();
  const auto clouds = hand_clouds(HandShape::zero(), poses, rng);
  const CalibrationResult r = calibrate_shape(right_model(), clouds, poses);
  EXPECT_LT(r.shape.beta.norm(), 0.1);
}

TEST(CalibrateShape, ZeroRoundsReturnsInitialShape) {
  Rng rng(39);
  const auto poses = calibration_poses();
  HandShape truth;
  truth.beta[0] = 0.8;
  const auto clouds = hand_clouds(truth, poses, rng);
  CalibrationOptions opts;
  opts.max_rounds = 0;
  const CalibrationResult r = calibrate_shape(right_model(), clouds, poses, opts);
  EXPECT_EQ(r.shape.beta, ShapeVector::Zero());
  EXPECT_EQ(r.rounds, 0);
}

TEST(CalibrateShape, RecoversKnownShape) {
  Rng rng(40);
  ShapeVector dir;
  for (int i = 0; i < kShapeParams; ++i) dir[i] = rng.normal();
  HandShape truth;
  truth.beta = dir.normalized();
  const auto poses = calibration_poses();
  const auto clouds = hand_clouds(truth, poses, rng);
  const CalibrationResult r = calibrate_shape(right_model(), clouds, poses);
  // Mean per-vertex error of the recovered mesh against the true one.
  double worst_mean = 0.0;
  for (std::size_t i = 0; i < poses.size(); ++i) {
    const TriangleMesh expected = skin_mesh(right_model(), truth, poses[i]);
    const TriangleMesh got = skin_mesh(right_model(), r.shape, r.poses[i]);
    double sum = 0.0;
    for (std::size_t v = 0; v < got.vertices.size(); ++v) {
      sum += (got.vertices[v] - expected.vertices[v]).norm();
    }
    worst_mean = std::max(worst_mean, sum / static_cast<double>(got.vertices.size()));
  }
  EXPECT_LE(worst_mean, 0.002);
}

TEST(CalibrateShape, TooFewPointsIsUnderconstrained) {
  Rng rng(41);
  const auto poses = calibration_poses();
  auto clouds = hand_clouds(HandShape::zero(), poses, rng);
  for (auto& c : clouds) c.resize(100);
  try {
    calibrate_shape(right_model(), clouds, poses);
    FAIL() << "expected calibration-underconstrained";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kCalibrationUnderconstrained);
  }
}

TEST(HandSurface, ResidualDerivativesMatchFiniteDifferences) {
  Rng rng(42);
  const HandShape shape = random_shape(rng, 0.3);
  const PoseVector theta = random_twist_free_pose(right_model(), rng, 0.5).to_vector();
  const HandSurface surface(right_model(), shape, HandPose::from_vector(theta));
  int agree = 0, total = 0;
  for (const auto& s : sample_surface(surface.mesh(), 40, rng)) {
    const Vec3 p = s.point + s.normal * rng.uniform(-0.003, 0.006);
    PoseRow d_pose;
    surface.residual(p, &d_pose, nullptr);
    for (int k : {0, 2, 5, 20, 48}) {
      PoseVector plus = theta, minus = theta;
      plus[k] += 1e-7;
      minus[k] -= 1e-7;
      const double a =
          HandSurface(right_model(), shape, HandPose::from_vector(plus)).signed_distance(p);
      const double b =
          HandSurface(right_model(), shape, HandPose::from_vector(minus)).signed_distance(p);
      const double fd = (a - b) / 2e-7;
      ++total;
      if (std::abs(fd - d_pose[k]) < 1e-4 * std::max(1.0, std::abs(fd))) ++agree;
    }
  }
  // A closest point that jumps between triangles under the perturbation
  // breaks the finite difference at a few samples.
  EXPECT_GE(agree, 0.95 * total);
}

}  // namespace
}  // namespace hoa
