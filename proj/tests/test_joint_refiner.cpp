#include <gtest/gtest.h>

#include "hoa/error.hpp"
#include "hoa/joint_refiner.hpp"
#include "hoa/synthetic.hpp"
#include "test_support.hpp"

namespace hoa {
namespace {

const HandModelData& right_model() {
  static const HandModelData data = make_synthetic_hand_model(Handedness::kRight);
  return data;
}

const TriangleMesh& box_mesh() {
  static const TriangleMesh mesh = make_box(Vec3(0.1, 0.07, 0.05));
  return mesh;
}

const VoxelSdf& box_sdf() {
  static const VoxelSdf sdf = build_sdf_from_mesh(box_mesh());
  return sdf;
}

std::vector<Vec3> samples_of(const TriangleMesh& mesh, int n, Rng& rng) {
  std::vector<Vec3> pts;
  for (const auto& s : sample_surface(mesh, static_cast<std::size_t>(n), rng)) {
    pts.push_back(s.point);
  }
  return pts;
}

SceneObject box_object(const RigidTransform& pose, Rng& rng, int n = 400) {
  SceneObject o;
  o.name = "box";
  o.sdf = &box_sdf();
  o.pose = pose;
  o.cloud = samples_of(box_mesh().transformed(pose), n, rng);
  o.prev = pose;
  return o;
}

// Flat hand resting on the top face of the box at the origin; `sink`
// pushes it into the box.
HandPose resting_hand(double sink) {
  HandPose pose;
  pose.global_translation = Vec3(0.0, -0.1, 0.025 + 0.011 - sink);
  return pose;
}

SceneHand hand_at(const HandPose& truth, const HandPose& init, Rng& rng, int n = 300) {
  SceneHand h;
  h.side = Handedness::kRight;
  h.data = &right_model();
  h.pose = init;
  h.cloud = samples_of(skin_mesh(right_model(), h.shape, truth), n, rng);
  h.prev = init;
  return h;
}

TEST(SegmentHand, SurfacePointsKept) {
  Rng rng(81);
  const HandPose pose = grasp_pose(right_model(), 0.4, 0.1);
  const auto pts = samples_of(skin_mesh(right_model(), HandShape::zero(), pose), 500, rng);
  const HandSegmentation seg = segment_hand_points(pts, right_model(), HandShape::zero(), pose);
  EXPECT_EQ(seg.points.size(), pts.size());
  EXPECT_FALSE(seg.empty_warning);
}

TEST(SegmentHand, DistantPointsRemoved) {
  Rng rng(82);
  const HandPose pose = grasp_pose(right_model(), 0.4, 0.1);
  std::vector<Vec3> pts;
  for (const auto& s : sample_surface(skin_mesh(right_model(), HandShape::zero(), pose), 300, rng)) {
    pts.push_back(s.point + 0.05 * s.normal);
  }
  // Offsetting along a normal can land near another finger; keep only points
  // truly 5 cm from the whole mesh.
  const TriangleMesh mesh = skin_mesh(right_model(), HandShape::zero(), pose);
  std::erase_if(pts, [&](const Vec3& p) { return test::mesh_distance_bruteforce(mesh, p) < 0.049; });
  ASSERT_FALSE(pts.empty());
  const HandSegmentation seg = segment_hand_points(pts, right_model(), HandShape::zero(), pose);
  EXPECT_TRUE(seg.points.empty());
  EXPECT_TRUE(seg.empty_warning);
}

TEST(SegmentHand, MixedCloudMatchesBruteForce) {
  Rng rng(83);
  const HandPose pose = grasp_pose(right_model(), 0.6, 0.0);
  const TriangleMesh mesh = skin_mesh(right_model(), HandShape::zero(), pose);
  Vec3 lo, hi;
  mesh.bounds(lo, hi);
  std::vector<Vec3> pts = samples_of(mesh, 200, rng);
  for (int i = 0; i < 400; ++i) {
    pts.emplace_back(rng.uniform(lo.x() - 0.03, hi.x() + 0.03),
                     rng.uniform(lo.y() - 0.03, hi.y() + 0.03),
                     rng.uniform(lo.z() - 0.03, hi.z() + 0.03));
  }
  const HandSegmentation seg = segment_hand_points(pts, right_model(), HandShape::zero(), pose, 0.01);
  std::vector<Vec3> expected;
  for (const auto& p : pts) {
    if (test::mesh_distance_bruteforce(mesh, p) <= 0.01) expected.push_back(p);
  }
  ASSERT_EQ(seg.points.size(), expected.size());
  for (std::size_t i = 0; i < expected.size(); ++i) EXPECT_EQ(seg.points[i], expected[i]);
}

TEST(JointLoss, ConsistentSceneIsNearZero) {
  Rng rng(84);
  SceneFrame frame;
  frame.objects.push_back(box_object(RigidTransform::identity(), rng));
  const HandPose pose = resting_hand(0.0);
  frame.hands.push_back(hand_at(pose, pose, rng));
  EXPECT_LE(joint_loss(frame, 0.0, 10.0), box_sdf().voxel_size() * box_sdf().voxel_size());
}

TEST(JointLoss, ObjectsOnlyIsMeanOfObjectTerms) {
  Rng rng(85);
  SceneFrame frame;
  const RigidTransform a = RigidTransform::from_axis_angle(Vec3(0, 0, 0.1), Vec3(0.003, 0, 0));
  const RigidTransform b = RigidTransform::from_axis_angle(Vec3(0.2, 0, 0), Vec3(0.3, 0, 0));
  frame.objects.push_back(box_object(a, rng));
  frame.objects.push_back(box_object(b, rng));
  frame.objects[0].pose = a.retract((Vec6() << 0.01, 0, 0, 0.002, 0, 0).finished());
  frame.objects[1].prev = b.retract((Vec6() << 0, 0.02, 0, 0, 0.001, 0).finished());
  const double expected =
      0.5 * (object_objective(box_sdf(), frame.objects[0].pose, frame.objects[0].cloud,
                              frame.objects[0].prev, 10.0) +
             object_objective(box_sdf(), frame.objects[1].pose, frame.objects[1].cloud,
                              frame.objects[1].prev, 10.0));
  EXPECT_NEAR(joint_loss(frame, 1e-3, 10.0), expected, 1e-18);
}

TEST(JointLoss, SingleSphereEqualsSdfLoss) {
  Rng rng(86);
  SceneObject o;
  o.sdf = &test::sphere_sdf();
  o.pose = RigidTransform(Quat::Identity(), Vec3(0.005, 0, 0));
  for (int i = 0; i < 500; ++i) o.cloud.push_back(test::random_unit(rng) * 0.05);
  SceneFrame frame;
  frame.objects.push_back(o);
  EXPECT_EQ(joint_loss(frame, 1e-3, 10.0), sdf_loss(*o.sdf, o.pose, o.cloud));
}

SceneFrame contact_scene(Rng& rng, double sink) {
  SceneFrame frame;
  frame.objects.push_back(box_object(RigidTransform::identity(), rng));
  frame.hands.push_back(hand_at(resting_hand(0.0), resting_hand(sink), rng));
  return frame;
}

TEST(JointLoss, GradientMatchesFiniteDifferences) {
  Rng rng(87);
  for (int trial = 0; trial < 10; ++trial) {
    SceneFrame frame = contact_scene(rng, 0.004);
    frame.objects[0].pose = frame.objects[0].pose.retract(
        (Vec6() << rng.normal(0.02), rng.normal(0.02), rng.normal(0.02), rng.normal(0.002),
         rng.normal(0.002), rng.normal(0.002))
            .finished());
    HandPose& hp = frame.hands[0].pose;
    for (int k = 0; k < kPoseParams; ++k) {
      PoseVector v = hp.to_vector();
      v[k] += rng.normal(0.02);
      hp = HandPose::from_vector(v);
    }
    const Eigen::VectorXd g = joint_loss_gradient(frame, 1e-3, 10.0);
    ASSERT_EQ(g.size(), 6 + kPoseParams);
    Eigen::VectorXd fd(g.size());
    for (int k = 0; k < g.size(); ++k) {
      Eigen::VectorXd d = Eigen::VectorXd::Zero(g.size());
      d[k] = 1e-7;
      fd[k] = (joint_loss(perturb_scene(frame, d), 1e-3, 10.0) -
               joint_loss(perturb_scene(frame, -d), 1e-3, 10.0)) /
              2e-7;
    }
    EXPECT_LT((g - fd).norm() / fd.norm(), 1e-3) << "trial " << trial;
  }
}

TEST(MaxPenetration, MatchesVertexScan) {
  Rng rng(88);
  const SceneFrame frame = contact_scene(rng, 0.004);
  const TriangleMesh mesh = skin_mesh(right_model(), HandShape::zero(), frame.hands[0].pose);
  double worst = -INFINITY;
  for (const auto& v : mesh.vertices) worst = std::max(worst, -box_sdf().query(v));
  EXPECT_EQ(max_penetration(frame), worst);
  EXPECT_NEAR(worst, 0.004, 0.001);
  EXPECT_EQ(max_penetration(SceneFrame{}), -INFINITY);
}

TEST(RefineJoint, PerfectNonContactSceneStays) {
  Rng rng(89);
  SceneFrame frame;
  frame.objects.push_back(box_object(RigidTransform::identity(), rng));
  HandPose pose = grasp_pose(right_model(), 0.3, 0.1);
  pose.global_translation = Vec3(0.0, -0.1, 0.15);
  frame.hands.push_back(hand_at(pose, pose, rng));
  // The articulation prior would pull a bent hand toward the flat pose.
  JointRefineOptions opts;
  opts.lambda3 = 0.0;
  const JointRefineResult r = refine_joint(frame, opts);
  EXPECT_LT(pose_distance(r.object_poses[0], RigidTransform::identity()).distance_m, 1e-5);
  EXPECT_LT(test::rad(pose_distance(r.object_poses[0], RigidTransform::identity()).angle_deg), 1e-5);
  EXPECT_LT((r.hand_poses[0].to_vector() - pose.to_vector()).cwiseAbs().maxCoeff(), 1e-5);
}

TEST(RefineJoint, PenetrationShrinksAndLossNeverRises) {
  Rng rng(90);
  const SceneFrame frame = contact_scene(rng, 0.004);
  const JointRefineResult r = refine_joint(frame);
  EXPECT_GT(r.penetration_before, 0.003);
  EXPECT_LT(r.penetration_after, r.penetration_before);
  double last = r.loss_before;
  for (double l : r.sweep_losses) {
    EXPECT_LE(l, last);
    last = l;
  }
  EXPECT_EQ(r.loss_after, last);
}

TEST(RefineJoint, HeavyHandRegularizerDecouplesObjects) {
  Rng rng(91);
  SceneFrame frame = contact_scene(rng, 0.004);
  frame.objects[0].pose = RigidTransform(Quat::Identity(), Vec3(0.004, -0.003, 0.002));
  JointRefineOptions opts;
  opts.lambda3 = 1e9;
  const JointRefineResult r = refine_joint(frame, opts);
  const RefineResult alone = refine_pose_sdf(box_sdf(), frame.objects[0].cloud,
                                             frame.objects[0].pose, frame.objects[0].prev,
                                             opts.lambda1, opts.object);
  const PoseDistance d = pose_distance(r.object_poses[0], alone.pose);
  EXPECT_LT(d.distance_m, 1e-3);
  EXPECT_LT(test::rad(d.angle_deg), 1e-3);
  // The articulation is held near zero by the regularizer.
  EXPECT_LT(r.hand_poses[0].articulation.norm(), 1e-3);
}

TEST(RefineJoint, WithoutHandsMatchesPerObjectRefinement) {
  Rng rng(92);
  SceneFrame frame;
  frame.objects.push_back(box_object(RigidTransform::identity(), rng));
  frame.objects.push_back(box_object(RigidTransform::from_axis_angle(Vec3(0, 0, 0.5),
                                                                     Vec3(0.3, 0.1, 0)), rng));
  frame.objects[0].pose = RigidTransform(Quat::Identity(), Vec3(0.003, 0, 0.001));
  frame.objects[1].pose = frame.objects[1].pose.retract((Vec6() << 0.02, 0, 0, 0, 0.004, 0).finished());
  JointRefineOptions opts;
  opts.sweeps = 1;
  const JointRefineResult r = refine_joint(frame, opts);
  for (std::size_t o = 0; o < 2; ++o) {
    const RefineResult alone = refine_pose_sdf(box_sdf(), frame.objects[o].cloud,
                                               frame.objects[o].pose, frame.objects[o].prev,
                                               opts.lambda1, opts.object);
    EXPECT_LT((r.object_poses[o].matrix() - alone.pose.matrix()).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(RefineJoint, TrustRegionCapsMotion) {
  Rng rng(93);
  SceneFrame frame;
  frame.objects.push_back(box_object(RigidTransform::identity(), rng));
  // Initialized 8 cm away: the solver may not move it more than 5 cm.
  frame.objects[0].pose = RigidTransform(Quat::Identity(), Vec3(0.08, 0, 0));
  frame.objects[0].prev.reset();
  const JointRefineResult r = refine_joint(frame);
  const PoseDistance d = pose_distance(r.object_poses[0], frame.objects[0].pose);
  EXPECT_LE(d.distance_m, 0.05 + 1e-12);
  EXPECT_LE(d.angle_deg, 30.0 + 1e-9);
}

}  // namespace
}  // namespace hoa
