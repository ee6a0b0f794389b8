#include <benchmark/benchmark.h>

#include "hoa/hand_model.hpp"
#include "hoa/hand_surface.hpp"
#include "hoa/hand_tracker.hpp"
#include "hoa/metrics.hpp"
#include "hoa/object_tracker.hpp"
#include "hoa/sdf.hpp"
#include "hoa/synthetic.hpp"

namespace {

using namespace hoa;

const TriangleMesh& box() {
  static const TriangleMesh mesh = make_box(Vec3(0.1, 0.07, 0.05));
  return mesh;
}

const VoxelSdf& box_sdf() {
  static const VoxelSdf sdf = build_sdf_from_mesh(box());
  return sdf;
}

const HandModelData& hand() {
  static const HandModelData data = make_synthetic_hand_model(Handedness::kRight);
  return data;
}

std::vector<Vec3> box_points(int n) {
  Rng rng(5);
  std::vector<Vec3> pts;
  for (const auto& s : sample_surface(box(), n, rng)) pts.push_back(s.point);
  return pts;
}

void BM_SdfBuild(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(build_sdf_from_mesh(box()));
}
BENCHMARK(BM_SdfBuild)->Unit(benchmark::kMillisecond);

void BM_SdfQueryWithGradient(benchmark::State& state) {
  const VoxelSdf& sdf = box_sdf();
  const auto pts = box_points(1024);
  Vec3 g;
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(sdf.query(pts[i++ & 1023], &g));
  }
}
BENCHMARK(BM_SdfQueryWithGradient);

void BM_RefinePoseSdf(benchmark::State& state) {
  const auto pts = box_points(static_cast<int>(state.range(0)));
  const RigidTransform init(Quat::Identity(), Vec3(0.003, -0.002, 0.001));
  box_sdf();
  for (auto _ : state) {
    benchmark::DoNotOptimize(refine_pose_sdf(box_sdf(), pts, init, std::nullopt, 10.0));
  }
}
BENCHMARK(BM_RefinePoseSdf)->Arg(400)->Arg(3200)->Unit(benchmark::kMicrosecond);

void BM_ForwardKinematics(benchmark::State& state) {
  Rng rng(6);
  const HandPose pose = random_twist_free_pose(hand(), rng, 0.6);
  for (auto _ : state) benchmark::DoNotOptimize(forward_kinematics(hand(), HandShape::zero(), pose));
}
BENCHMARK(BM_ForwardKinematics);

void BM_SkinMesh(benchmark::State& state) {
  Rng rng(7);
  const HandPose pose = random_twist_free_pose(hand(), rng, 0.6);
  for (auto _ : state) benchmark::DoNotOptimize(skin_mesh(hand(), HandShape::zero(), pose));
}
BENCHMARK(BM_SkinMesh)->Unit(benchmark::kMicrosecond);

void BM_HandSurfaceResidual(benchmark::State& state) {
  Rng rng(8);
  const HandPose pose = random_twist_free_pose(hand(), rng, 0.6);
  const HandSurface surface(hand(), HandShape::zero(), pose);
  std::vector<Vec3> pts;
  for (const auto& s : sample_surface(surface.mesh(), 256, rng)) pts.push_back(s.point + 0.003 * s.normal);
  PoseRow row;
  std::size_t i = 0;
  for (auto _ : state) benchmark::DoNotOptimize(surface.residual(pts[i++ & 255], &row, nullptr));
}
BENCHMARK(BM_HandSurfaceResidual)->Unit(benchmark::kMicrosecond);

void BM_FitHandPose(benchmark::State& state) {
  Rng rng(9);
  const JointArray kp =
      forward_kinematics(hand(), HandShape::zero(), random_twist_free_pose(hand(), rng, 0.6));
  for (auto _ : state) {
    benchmark::DoNotOptimize(fit_hand_pose(hand(), HandShape::zero(), kp, HandPose{}, 1e-3));
  }
}
BENCHMARK(BM_FitHandPose)->Unit(benchmark::kMillisecond);

void BM_TriangulateJoint(benchmark::State& state) {
  static const CameraRig rig = generate_rig(RigSpec{});
  Rng rng(10);
  const Vec3 p(0.02, -0.03, 0.08);
  JointViews views;
  for (const auto& cam : rig) views.emplace_back(cam.name(), project(cam, p) + Vec2(rng.normal(), rng.normal()));
  for (auto _ : state) benchmark::DoNotOptimize(triangulate_joint_ransac(views, rig));
}
BENCHMARK(BM_TriangulateJoint)->Unit(benchmark::kMicrosecond);

void BM_AddS(benchmark::State& state) {
  Rng rng(11);
  std::vector<Vec3> verts;
  for (int i = 0; i < state.range(0); ++i) verts.emplace_back(rng.normal(0.05), rng.normal(0.04), rng.normal(0.03));
  const RigidTransform gt = RigidTransform::identity();
  const RigidTransform pred = RigidTransform::from_axis_angle(Vec3(0.1, 0.2, 0.0), Vec3(0.01, 0, 0));
  for (auto _ : state) benchmark::DoNotOptimize(adds_distance(pred, gt, verts));
}
BENCHMARK(BM_AddS)->Arg(1000)->Arg(10000)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
