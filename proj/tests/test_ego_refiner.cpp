#include <gtest/gtest.h>

#include "hoa/ego_refiner.hpp"
#include "hoa/error.hpp"
#include "hoa/synthetic.hpp"
#include "test_support.hpp"

namespace hoa {
namespace {

using test::random_pose;

TEST(MergedObjectPose, AnchorSelection) {
  Rng rng(101);
  const RigidTransform a = random_pose(rng), b = random_pose(rng);
  EXPECT_EQ(merged_object_pose({a}).matrix(), a.matrix());
  EXPECT_EQ(merged_object_pose({a, b}, 0).matrix(), a.matrix());
  EXPECT_EQ(merged_object_pose({a, b}, 1).matrix(), b.matrix());
  EXPECT_THROW(merged_object_pose({a, b}, 2), Error);
  try {
    merged_object_pose({});
    FAIL() << "expected no-objects";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNoObjects);
  }
}

TEST(ObjectInCamera, Examples) {
  Rng rng(102);
  const RigidTransform w = random_pose(rng);
  EXPECT_TRUE(object_in_camera(w, RigidTransform::identity()).matrix().isApprox(w.matrix(), 1e-15));
  EXPECT_TRUE(object_in_camera(w, w).matrix().isApprox(Eigen::Matrix4d::Identity(), 1e-12));
}

TEST(RefineCameraPose, Examples) {
  Rng rng(103);
  for (int i = 0; i < 100; ++i) {
    const RigidTransform w = random_pose(rng), t = random_pose(rng);
    const RigidTransform back = refine_camera_pose(w, object_in_camera(w, t));
    EXPECT_LT((back.matrix() - t.matrix()).cwiseAbs().maxCoeff(), 1e-10);
  }
  const RigidTransform r = random_pose(rng);
  EXPECT_TRUE(refine_camera_pose(RigidTransform::identity(), r)
                  .matrix()
                  .isApprox(r.inverse().matrix(), 1e-14));
}

TEST(RefineCameraPose, EquivariantUnderWorldChange) {
  Rng rng(104);
  for (int i = 0; i < 50; ++i) {
    const RigidTransform w = random_pose(rng), obs = random_pose(rng), g = random_pose(rng);
    const RigidTransform lhs = refine_camera_pose(g * w, obs);
    const RigidTransform rhs = g * refine_camera_pose(w, obs);
    EXPECT_LT((lhs.matrix() - rhs.matrix()).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(RefineCameraPose, ReducesJitter) {
  Rng rng(105);
  const RigidTransform object = RigidTransform::from_axis_angle(Vec3(0, 0, 0.3), Vec3(0, 0, 0.03));
  std::vector<RigidTransform> raw, refined, truth;
  for (int f = 0; f < 60; ++f) {
    const double s = f / 59.0;
    const RigidTransform device =
        look_at(Vec3(0.1 * s, -0.45 + 0.05 * s, 0.45), Vec3(0.02 * s, 0, 0));
    truth.push_back(device);
    const RigidTransform jittered = device.retract(
        (Vec6() << rng.normal(test::rad(0.8)), rng.normal(test::rad(0.8)),
         rng.normal(test::rad(0.8)), rng.normal(0.004), rng.normal(0.004), rng.normal(0.004))
            .finished());
    raw.push_back(jittered);
    refined.push_back(refine_camera_pose(object, object_in_camera(object, device)));
  }
  const PoseDistance r = mean_step(raw), q = mean_step(refined), t = mean_step(truth);
  EXPECT_LT(q.distance_m, r.distance_m);
  EXPECT_LT(q.angle_deg, r.angle_deg);
  EXPECT_NEAR(q.distance_m, t.distance_m, 1e-9);
}

TEST(MeanStep, ShortTrajectories) {
  EXPECT_EQ(mean_step({}).distance_m, 0.0);
  EXPECT_EQ(mean_step({RigidTransform::identity()}).distance_m, 0.0);
  const PoseDistance d = mean_step({RigidTransform::identity(),
                                    RigidTransform(Quat::Identity(), Vec3(0.01, 0, 0)),
                                    RigidTransform(Quat::Identity(), Vec3(0.03, 0, 0))});
  EXPECT_NEAR(d.distance_m, 0.015, 1e-15);
}

}  // namespace
}  // namespace hoa
