#include <gtest/gtest.h>

#include <nlohmann/json.hpp>

#include "hoa/error.hpp"
#include "hoa/mesh_query.hpp"
#include "hoa/sequence_store.hpp"
#include "hoa/synthetic.hpp"
#include "test_support.hpp"

namespace hoa {
namespace {

namespace fs = std::filesystem;

const HandModelData& right_model() {
  static const HandModelData data = make_synthetic_hand_model(Handedness::kRight);
  return data;
}

double azimuth(const CameraModel& cam) { return std::atan2(cam.center().y(), cam.center().x()); }

TEST(GenerateRig, EvenSpacing) {
  const CameraRig rig = generate_rig(RigSpec{});
  ASSERT_EQ(rig.size(), 8u);
  for (std::size_t k = 0; k < rig.size(); ++k) {
    double step = azimuth(rig[(k + 1) % rig.size()]) - azimuth(rig[k]);
    if (step < 0) step += 2 * M_PI;
    EXPECT_NEAR(step, M_PI / 4, 1e-9);
    EXPECT_EQ(rig[k].name(), "cam" + std::to_string(k));
  }
}

TEST(GenerateRig, TwoCamerasAreAntipodal) {
  RigSpec spec;
  spec.count = 2;
  const CameraRig rig = generate_rig(spec);
  ASSERT_EQ(rig.size(), 2u);
  const Vec3 a = rig[0].center(), b = rig[1].center();
  EXPECT_NEAR(a.x(), -b.x(), 1e-12);
  EXPECT_NEAR(a.y(), -b.y(), 1e-12);
  EXPECT_NEAR(a.z(), b.z(), 1e-12);
  spec.count = 1;
  EXPECT_THROW(generate_rig(spec), Error);
}

TEST(GenerateRig, TargetAtPrincipalPointAndUpIsUp) {
  RigSpec spec;
  spec.look_at = Vec3(0.01, -0.02, 0.03);
  for (const auto& cam : generate_rig(spec)) {
    const Vec2 px = project(cam, spec.look_at);
    EXPECT_NEAR(px.x(), spec.cx, 1e-6);
    EXPECT_NEAR(px.y(), spec.cy, 1e-6);
    // World +z appears toward the top of the image.
    EXPECT_LT(project(cam, spec.look_at + Vec3(0, 0, 0.05)).y(), px.y());
  }
}

TEST(Interpolate, PoseKeyframes) {
  const RigidTransform a = RigidTransform::from_axis_angle(Vec3::Zero(), Vec3(0, 0, 0));
  const RigidTransform b = RigidTransform::from_axis_angle(Vec3(0, 0, 1.0), Vec3(1, 0, 0));
  const std::vector<Keyframe<RigidTransform>> keys = {{0, a}, {10, b}};
  const RigidTransform mid = interpolate_pose(keys, 5);
  EXPECT_NEAR(mid.translation().x(), 0.5, 1e-12);
  EXPECT_NEAR(pose_distance(mid, a).angle_deg, test::deg(0.5), 1e-9);
  EXPECT_EQ(interpolate_pose(keys, -3).matrix(), a.matrix());
  EXPECT_EQ(interpolate_pose(keys, 30).matrix(), b.matrix());
}

ScenarioSpec static_scene(double pixel_sigma, double point_sigma) {
  ScenarioSpec s = default_scenario(7, 4);
  for (auto& o : s.objects) o.keys.resize(1);
  for (auto& h : s.hands) h.keys.resize(1);
  s.noise = NoiseSpec{};
  s.noise.pixel_sigma = pixel_sigma;
  s.noise.point_sigma = point_sigma;
  s.surface_samples = 200;
  return s;
}

TEST(GenerateSequence, ZeroNoiseLandmarksAreExact) {
  const CameraRig rig = generate_rig(RigSpec{});
  const SyntheticSequence seq = generate_sequence(rig, static_scene(0.0, 0.0), right_model());
  for (const auto& hand : seq.hands) {
    ASSERT_EQ(hand.landmarks.size(), hand.clean_landmarks.size());
    for (std::size_t i = 0; i < hand.landmarks.size(); ++i) {
      for (int j = 0; j < kHandJoints; ++j) {
        EXPECT_EQ(hand.landmarks[i].joints[j].pixel, hand.clean_landmarks[i].joints[j].pixel);
      }
    }
  }
}

TEST(GenerateSequence, GroundTruthReprojectsOntoCleanLandmarks) {
  const CameraRig rig = generate_rig(RigSpec{});
  const SyntheticSequence seq = generate_sequence(rig, default_scenario(8, 6), right_model());
  for (const auto& hand : seq.hands) {
    for (const auto& obs : hand.clean_landmarks) {
      const CameraModel& cam = find_camera(rig, obs.camera);
      for (int j = 0; j < kHandJoints; ++j) {
        if (!obs.joints[j].valid) continue;
        EXPECT_LT((project(cam, hand.gt_joints[obs.frame][j]) - obs.joints[j].pixel).norm(), 1e-6);
      }
    }
  }
}

TEST(GenerateSequence, PixelNoiseHasRequestedSigma) {
  const CameraRig rig = generate_rig(RigSpec{});
  ScenarioSpec s = static_scene(1.5, 0.0);
  s.frame_count = 40;
  const SyntheticSequence seq = generate_sequence(rig, s, right_model());
  double sum = 0.0, sum2 = 0.0;
  std::size_t n = 0;
  for (const auto& hand : seq.hands) {
    for (std::size_t i = 0; i < hand.landmarks.size(); ++i) {
      for (int j = 0; j < kHandJoints; ++j) {
        if (!hand.clean_landmarks[i].joints[j].valid) continue;
        const Vec2 d = hand.landmarks[i].joints[j].pixel - hand.clean_landmarks[i].joints[j].pixel;
        for (double v : {d.x(), d.y()}) {
          sum += v;
          sum2 += v * v;
          ++n;
        }
      }
    }
  }
  ASSERT_GE(n, 10000u);
  const double mean = sum / n;
  const double sigma = std::sqrt(sum2 / n - mean * mean);
  EXPECT_NEAR(sigma, 1.5, 0.15);
  EXPECT_NEAR(mean, 0.0, 0.05);
}

TEST(GenerateSequence, CloudPointsNearSurface) {
  const CameraRig rig = generate_rig(RigSpec{});
  const double sigma = 0.001;
  const SyntheticSequence seq = generate_sequence(rig, static_scene(0.0, sigma), right_model());
  std::vector<MeshIndex> objects;
  for (const auto& o : seq.objects) objects.emplace_back(o.mesh.transformed(o.gt[0]));
  std::map<int, MeshIndex> hands;
  const HandModelData left = mirror_model(right_model());
  for (const auto& h : seq.hands) {
    const HandModelData& data = h.side == Handedness::kLeft ? left : right_model();
    hands.emplace(hand_label(h.side), MeshIndex(skin_mesh(data, seq.shape, h.gt[0])));
  }
  std::size_t n = 0;
  for (const auto& cloud : seq.clouds[0]) {
    ASSERT_EQ(cloud.labels.size(), cloud.points.size());
    for (std::size_t i = 0; i < cloud.points.size(); ++i) {
      const int label = cloud.labels[i];
      const MeshIndex& index =
          label >= kLeftHandLabel ? hands.at(label) : objects.at(static_cast<std::size_t>(label));
      EXPECT_LE(index.unsigned_distance(cloud.points[i]), 4.0 * sigma + 1e-9);
      ++n;
    }
  }
  EXPECT_GT(n, 1000u);
}

std::map<std::string, std::string> tree(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) files[fs::relative(e.path(), root).string()] = test::read_text(e.path());
  }
  return files;
}

TEST(WriteSequence, SameSeedSameBytes) {
  test::TempDir a("synth_a"), b("synth_b");
  const CameraRig rig = generate_rig(RigSpec{});
  const ScenarioSpec s = default_scenario(42, 3);
  write_sequence(generate_sequence(rig, s, right_model()), right_model(), a.path());
  write_sequence(generate_sequence(rig, s, right_model()), right_model(), b.path());
  const auto ta = tree(a.path()), tb = tree(b.path());
  EXPECT_GT(ta.size(), 50u);
  EXPECT_TRUE(ta == tb);

  const auto manifest = nlohmann::json::parse(ta.at("manifest.json"));
  EXPECT_EQ(manifest["rng"], Rng::kAlgorithm);
  EXPECT_EQ(manifest["seed"], 42);

  const SequenceStore store(a.path());
  EXPECT_EQ(store.info().frame_count, 3);
  EXPECT_EQ(store.rig().size(), rig.size());
  EXPECT_EQ(store.info().objects, (std::vector<std::string>{"box", "egg"}));
}

TEST(WriteSequence, DifferentSeedDifferentClouds) {
  const CameraRig rig = generate_rig(RigSpec{});
  const SyntheticSequence a = generate_sequence(rig, default_scenario(1, 2), right_model());
  const SyntheticSequence b = generate_sequence(rig, default_scenario(2, 2), right_model());
  EXPECT_NE(a.clouds[0][0].points.front(), b.clouds[0][0].points.front());
}

}  // namespace
}  // namespace hoa
