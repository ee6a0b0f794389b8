#include <gtest/gtest.h>

#include "hoa/error.hpp"
#include "hoa/geometry.hpp"
#include "test_support.hpp"

namespace hoa {
namespace {

using test::identity_camera;
using test::random_pose;

CameraModel camera_at(const std::string& name, const Vec3& center,
                      const Mat3& rotation = Mat3::Identity()) {
  return CameraModel(name, 600, 600, 320, 240, 640, 480, RigidTransform(rotation, center));
}

TEST(Project, OpticalAxisHitsPrincipalPoint) {
  const Vec2 px = project(identity_camera(), Vec3(0, 0, 1));
  EXPECT_EQ(px, Vec2(320, 240));
}

TEST(Project, LateralOffsetScalesWithFocalLength) {
  const Vec2 px = project(identity_camera(), Vec3(0.1, 0, 1));
  EXPECT_NEAR(px.x(), 380.0, 1e-12);
  EXPECT_NEAR(px.y(), 240.0, 1e-12);
}

TEST(Project, BehindCameraThrows) {
  try {
    project(identity_camera(), Vec3(0, 0, -1));
    FAIL() << "expected behind-camera";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kBehindCamera);
  }
  EXPECT_THROW(project(identity_camera(), Vec3(0.2, 0.1, 0.0)), Error);
}

TEST(Project, JacobianMatchesFiniteDifferences) {
  Rng rng(3);
  const CameraModel cam("c", 610, 590, 300, 250, 640, 480, random_pose(rng, 0.5, 0.2));
  for (int trial = 0; trial < 20; ++trial) {
    const Vec3 p = cam.camera_to_world() *
                   Vec3(rng.uniform(-0.2, 0.2), rng.uniform(-0.2, 0.2), rng.uniform(0.5, 2.0));
    Eigen::Matrix<double, 2, 3> jac;
    project(cam, p, &jac);
    for (int k = 0; k < 3; ++k) {
      Vec3 d = Vec3::Zero();
      d[k] = 1e-6;
      const Vec2 fd = (project(cam, p + d) - project(cam, p - d)) / 2e-6;
      EXPECT_NEAR((fd - jac.col(k)).norm(), 0.0, 1e-3 * std::max(1.0, fd.norm()));
    }
  }
}

TEST(Project, ExtrinsicsAreCameraToWorld) {
  // Camera one meter behind the origin along -z, looking down +z.
  const CameraModel cam = camera_at("c", Vec3(0, 0, -1));
  EXPECT_EQ(project(cam, Vec3::Zero()), Vec2(320, 240));
  EXPECT_TRUE(cam.world_to_camera().translation().isApprox(Vec3(0, 0, 1)));
}

TEST(TriangulatePair, ExactProjectionsRecoverPoint) {
  const CameraModel a = camera_at("a", Vec3(-0.5, 0, 0));
  const CameraModel b = camera_at("b", Vec3(0.5, 0, 0));
  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const Vec3 p(rng.uniform(-0.2, 0.2), rng.uniform(-0.2, 0.2), rng.uniform(0.8, 1.2));
    const Vec3 q = triangulate_pair(a, project(a, p), b, project(b, p));
    EXPECT_LT((q - p).norm(), 1e-9);
    EXPECT_LT((project(a, q) - project(a, p)).norm(), 1e-6);
  }
}

TEST(TriangulatePair, CoincidentCentersAreDegenerate) {
  const CameraModel a = camera_at("a", Vec3(0.1, 0.2, 0.3));
  const CameraModel b = camera_at("b", Vec3(0.1, 0.2, 0.3), so3_exp(Vec3(0, 0.3, 0)));
  try {
    triangulate_pair(a, Vec2(320, 240), b, Vec2(300, 200));
    FAIL() << "expected degenerate-pair";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDegeneratePair);
  }
}

TEST(TriangulatePair, ParallelRaysAreDegenerate) {
  const CameraModel a = camera_at("a", Vec3(-0.5, 0, 0));
  const CameraModel b = camera_at("b", Vec3(0.5, 0, 0));
  EXPECT_THROW(triangulate_pair(a, Vec2(320, 240), b, Vec2(320, 240)), Error);
}

// Least-squares reference: coarse-to-fine grid search of the summed squared
// reprojection error in a 5 mm box around the truth.
Vec3 dense_search(const CameraModel& a, const Vec2& pa, const CameraModel& b, const Vec2& pb,
                  const Vec3& center) {
  auto cost = [&](const Vec3& x) {
    return (project(a, x) - pa).squaredNorm() + (project(b, x) - pb).squaredNorm();
  };
  Vec3 best = center;
  double half = 0.005;
  for (int level = 0; level < 5; ++level) {
    const int n = 20;
    const double step = half / n;
    const Vec3 c = best;
    double best_cost = cost(best);
    for (int i = -n; i <= n; ++i) {
      for (int j = -n; j <= n; ++j) {
        for (int k = -n; k <= n; ++k) {
          const Vec3 x = c + step * Vec3(i, j, k);
          const double v = cost(x);
          if (v < best_cost) {
            best_cost = v;
            best = x;
          }
        }
      }
    }
    half = 2.0 * step;
  }
  return best;
}

TEST(TriangulatePair, NoisyPixelsStayWithinTwiceLeastSquaresError) {
  const CameraModel a = camera_at("a", Vec3(-0.5, 0, 0));
  const CameraModel b = camera_at("b", Vec3(0.5, 0, 0));
  Rng rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    const Vec3 p(rng.uniform(-0.05, 0.05), rng.uniform(-0.05, 0.05), 1.0);
    const Vec2 pa = project(a, p) + Vec2(rng.normal(), rng.normal());
    const Vec2 pb = project(b, p) + Vec2(rng.normal(), rng.normal());
    const Vec3 oracle = dense_search(a, pa, b, pb, p);
    const Vec3 mid = triangulate_pair(a, pa, b, pb);
    EXPECT_LE((mid - p).norm(), 2.0 * (oracle - p).norm() + 1e-6) << "trial " << trial;
  }
}

TEST(PoseDistance, Identical) {
  Rng rng(1);
  const RigidTransform a = random_pose(rng);
  const PoseDistance d = pose_distance(a, a);
  EXPECT_NEAR(d.angle_deg, 0.0, 1e-6);
  EXPECT_EQ(d.distance_m, 0.0);
}

TEST(PoseDistance, QuarterTurnAboutZ) {
  Rng rng(2);
  const RigidTransform a = random_pose(rng);
  const RigidTransform rz = RigidTransform::from_axis_angle(Vec3(0, 0, M_PI / 2), Vec3::Zero());
  const RigidTransform b(Quat(rz.rotation() * a.rotation()), a.translation());
  const PoseDistance d = pose_distance(a, b);
  EXPECT_NEAR(d.angle_deg, 90.0, 1e-9);
  EXPECT_NEAR(d.distance_m, 0.0, 1e-15);
}

TEST(PoseDistance, DoubleCover) {
  Rng rng(3);
  const RigidTransform a = random_pose(rng);
  const Quat neg(-a.rotation().w(), -a.rotation().x(), -a.rotation().y(), -a.rotation().z());
  const RigidTransform b(neg, a.translation());
  const PoseDistance d = pose_distance(a, b);
  EXPECT_NEAR(d.angle_deg, 0.0, 1e-6);
  EXPECT_EQ(d.distance_m, 0.0);
}

TEST(PoseDistance, SymmetricAndComposeStable) {
  Rng rng(4);
  for (int i = 0; i < 200; ++i) {
    const RigidTransform a = random_pose(rng);
    const RigidTransform b = random_pose(rng);
    const PoseDistance ab = pose_distance(a, b);
    const PoseDistance ba = pose_distance(b, a);
    EXPECT_NEAR(ab.angle_deg, ba.angle_deg, 1e-9);
    EXPECT_NEAR(ab.distance_m, ba.distance_m, 1e-12);
    EXPECT_LE(ab.angle_deg, 180.0 + 1e-9);
    // Composition never flips the reported angle.
    const RigidTransform c = a * a.inverse();
    EXPECT_NEAR(pose_distance(c, RigidTransform::identity()).angle_deg, 0.0, 1e-6);
  }
}

TEST(So3, ExpLogRoundTrip) {
  EXPECT_EQ(so3_exp(Vec3::Zero()), Mat3::Identity());
  Rng rng(6);
  for (int i = 0; i < 200; ++i) {
    const Vec3 v = test::random_unit(rng) * rng.uniform(0.0, 3.1);
    EXPECT_LT((so3_log(so3_exp(v)) - v).norm(), 1e-9);
  }
}

TEST(So3, LeftJacobianFirstOrder) {
  Rng rng(7);
  for (int i = 0; i < 20; ++i) {
    const Vec3 v = test::random_unit(rng) * rng.uniform(0.1, 2.5);
    const Vec3 d = test::random_unit(rng) * 1e-6;
    const Mat3 lhs = so3_exp(v + d);
    const Mat3 rhs = so3_exp(so3_left_jacobian(v) * d) * so3_exp(v);
    EXPECT_LT((lhs - rhs).norm(), 1e-10);
  }
}

TEST(RigidTransform, RetractAndInverse) {
  Rng rng(8);
  const RigidTransform a = random_pose(rng);
  EXPECT_TRUE((a * a.inverse()).matrix().isApprox(Eigen::Matrix4d::Identity(), 1e-12));
  Vec6 delta;
  delta << 0.1, -0.2, 0.05, 0.01, 0.02, -0.03;
  const RigidTransform r = a.retract(delta);
  EXPECT_TRUE(r.rotation_matrix().isApprox(so3_exp(delta.head<3>()) * a.rotation_matrix(), 1e-12));
  EXPECT_TRUE(r.translation().isApprox(a.translation() + delta.tail<3>(), 1e-12));
}

TEST(RigidTransform, HemisphereAlignment) {
  Rng rng(9);
  const RigidTransform a = random_pose(rng);
  const Quat neg(-a.rotation().w(), -a.rotation().x(), -a.rotation().y(), -a.rotation().z());
  const RigidTransform b(neg, a.translation());
  EXPECT_GE(b.aligned_to(a).rotation().dot(a.rotation()), 0.0);
  EXPECT_GE(hemisphere_aligned(neg, a.rotation()).dot(a.rotation()), 0.0);
}

TEST(CameraRig, JsonRoundTrip) {
  Rng rng(10);
  CameraRig rig;
  for (int i = 0; i < 3; ++i) {
    rig.emplace_back("cam" + std::to_string(i), 600 + i, 601, 320, 240, 640, 480,
                     random_pose(rng));
  }
  const CameraRig back = parse_camera_rig(camera_rig_to_json(rig));
  ASSERT_EQ(back.size(), rig.size());
  for (std::size_t i = 0; i < rig.size(); ++i) {
    EXPECT_EQ(back[i].name(), rig[i].name());
    EXPECT_EQ(back[i].fx(), rig[i].fx());
    EXPECT_TRUE(back[i].camera_to_world().matrix().isApprox(rig[i].camera_to_world().matrix(),
                                                            1e-15));
  }
  EXPECT_EQ(&find_camera(rig, "cam2"), &rig[2]);
  EXPECT_THROW(find_camera(rig, "nope"), Error);
  EXPECT_THROW(parse_camera_rig("{not json"), Error);
}

TEST(Errors, WhatStartsWithKebabName) {
  const Error e(ErrorCode::kBehindCamera, "z = -1");
  EXPECT_EQ(std::string(e.what()).rfind("behind-camera", 0), 0u);
}

}  // namespace
}  // namespace hoa
