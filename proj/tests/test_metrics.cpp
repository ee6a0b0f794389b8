#include <gtest/gtest.h>

#include <algorithm>

#include "hoa/error.hpp"
#include "hoa/metrics.hpp"
#include "test_support.hpp"

namespace hoa {
namespace {

using test::random_pose;

TEST(ReprojectionError, ExactProjections) {
  std::vector<ReprojectionSample> s;
  for (int i = 0; i < 10; ++i) s.push_back({Vec2(i, 2 * i), Vec2(i, 2 * i), Entity::kObject});
  const auto stats = reprojection_error(s);
  ASSERT_EQ(stats.size(), 1u);
  EXPECT_EQ(stats.at(Entity::kObject).mean, 0.0);
  EXPECT_EQ(stats.at(Entity::kObject).std, 0.0);
  EXPECT_EQ(stats.at(Entity::kObject).count, 10u);
}

TEST(ReprojectionError, ConstantFivePixelOffsets) {
  std::vector<ReprojectionSample> s;
  for (int i = 0; i < 12; ++i) {
    const double a = 0.5 * i;
    s.push_back({Vec2(100, 100), Vec2(100 + 3, 100 + 4), Entity::kLeftHand});
    s.push_back({Vec2(10, 10), Vec2(10 + 5 * std::cos(a), 10 + 5 * std::sin(a)), Entity::kRightHand});
  }
  const auto stats = reprojection_error(s);
  EXPECT_EQ(stats.count(Entity::kObject), 0u);
  for (Entity e : {Entity::kLeftHand, Entity::kRightHand}) {
    EXPECT_NEAR(stats.at(e).mean, 5.0, 1e-12);
    EXPECT_NEAR(stats.at(e).std, 0.0, 1e-6);
  }
}

TEST(Pck, Examples) {
  std::vector<Vec2> gt;
  for (int j = 0; j < 20; ++j) gt.emplace_back(10 * j, 5 * j);
  const BoundingBox box = bounding_box(gt);
  EXPECT_EQ(box.size(), 190.0);
  for (double v : pck(gt, gt, box)) EXPECT_EQ(v, 100.0);

  std::vector<Vec2> far = gt;
  for (auto& p : far) p += Vec2(0.2 * box.size() + 1.0, 0.0);
  for (double v : pck(far, gt, box)) EXPECT_EQ(v, 0.0);

  std::vector<Vec2> half = gt;
  for (std::size_t j = 0; j < half.size(); j += 2) half[j] += Vec2(500, 0);
  for (double v : pck(half, gt, box)) EXPECT_EQ(v, 50.0);
}

TEST(Pck, ErrorsAndMonotonicity) {
  EXPECT_THROW(pck({}, {}, BoundingBox{}), Error);
  EXPECT_THROW(pck({Vec2::Zero()}, {Vec2::Zero(), Vec2::Ones()}, BoundingBox{}), Error);
  Rng rng(111);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<Vec2> gt, pred;
    for (int j = 0; j < 21; ++j) {
      gt.emplace_back(rng.uniform(0, 200), rng.uniform(0, 200));
      pred.push_back(gt.back() + Vec2(rng.normal(15), rng.normal(15)));
    }
    const auto v = pck(pred, gt, bounding_box(gt));
    EXPECT_TRUE(std::is_sorted(v.begin(), v.end()));
  }
}

TEST(Mpjpe, Examples) {
  Rng rng(112);
  JointArray gt;
  for (auto& j : gt) j = Vec3(rng.normal(0.05), rng.normal(0.05), rng.normal(0.05));
  EXPECT_EQ(mpjpe_root_aligned(gt, gt), 0.0);
  JointArray shifted = gt;
  for (auto& j : shifted) j += Vec3(0.3, -0.2, 0.1);
  EXPECT_NEAR(mpjpe_root_aligned(shifted, gt), 0.0, 1e-12);
  JointArray one = gt;
  one[9] += Vec3(0, 0, 0.021);
  EXPECT_NEAR(mpjpe_root_aligned(one, gt), 1.0, 1e-9);
}

TEST(Add, TranslationOffsetIsItsLength) {
  Rng rng(113);
  std::vector<Vec3> verts;
  for (int i = 0; i < 50; ++i) verts.emplace_back(rng.normal(0.05), rng.normal(0.05), rng.normal(0.05));
  const RigidTransform gt = random_pose(rng);
  const RigidTransform pred(gt.rotation(), gt.translation() + Vec3(0.003, 0.004, 0));
  EXPECT_NEAR(add_distance(pred, gt, verts), 0.005, 1e-12);
}

TEST(Adds, MatchesBruteForceBitExact) {
  Rng rng(114);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 1 + static_cast<int>(rng.below(200));
    std::vector<Vec3> verts;
    for (int i = 0; i < n; ++i) verts.emplace_back(rng.normal(0.05), rng.normal(0.03), rng.normal(0.02));
    const RigidTransform gt = random_pose(rng, M_PI, 0.5);
    const RigidTransform pred = gt.retract(
        (Vec6() << rng.normal(0.3), rng.normal(0.3), rng.normal(0.3), rng.normal(0.02),
         rng.normal(0.02), rng.normal(0.02))
            .finished());
    const double fast = adds_distance(pred, gt, verts);
    EXPECT_EQ(fast, adds_distance_bruteforce(pred, gt, verts));
    EXPECT_LE(fast, add_distance(pred, gt, verts));
    std::vector<Vec3> shuffled = verts;
    std::reverse(shuffled.begin(), shuffled.end());
    EXPECT_NEAR(adds_distance(pred, gt, shuffled), fast, 1e-15);
  }
}

TEST(Auc, ExactCdfArea) {
  EXPECT_EQ(auc_percent({0.0, 0.0}, 0.1), 100.0);
  EXPECT_EQ(auc_percent({0.2}, 0.1), 0.0);
  EXPECT_NEAR(auc_percent({0.05}, 0.1), 50.0, 1e-12);
  EXPECT_NEAR(auc_percent({0.025, 0.2}, 0.1), 37.5, 1e-12);
}

TEST(Auc, MonotoneInEachDistance) {
  Rng rng(115);
  std::vector<double> d;
  for (int i = 0; i < 30; ++i) d.push_back(rng.uniform(0.0, 0.15));
  double last = auc_percent(d, 0.1);
  for (int step = 0; step < 20; ++step) {
    d[7] += 0.01;
    const double now = auc_percent(d, 0.1);
    EXPECT_LE(now, last);
    last = now;
  }
}

TEST(AddAdsAuc, IdenticalPosesScoreFull) {
  Rng rng(116);
  const TriangleMesh mesh = make_box(Vec3(0.1, 0.07, 0.05));
  std::vector<RigidTransform> poses;
  for (int i = 0; i < 5; ++i) poses.push_back(random_pose(rng));
  const AddAucResult r = add_adds_auc(poses, poses, mesh);
  for (double v : r.add) EXPECT_EQ(v, 0.0);
  for (double v : r.adds) EXPECT_EQ(v, 0.0);
  EXPECT_EQ(r.add_auc, 100.0);
  EXPECT_EQ(r.adds_auc, 100.0);
}

TEST(AddAdsAuc, Errors) {
  const std::vector<RigidTransform> one(1), two(2);
  EXPECT_THROW(add_adds_auc(one, one, TriangleMesh{}), Error);
  EXPECT_THROW(add_adds_auc(one, two, make_box(Vec3::Ones())), Error);
}

}  // namespace
}  // namespace hoa
