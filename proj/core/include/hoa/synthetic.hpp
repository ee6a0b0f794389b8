#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hoa/geometry.hpp"
#include "hoa/hand_model.hpp"
#include "hoa/hand_tracker.hpp"
#include "hoa/mesh.hpp"
#include "hoa/random.hpp"

namespace hoa {

struct RigSpec {
  int count = 8;
  double radius = 0.8;  // meters
  double height = 0.6;
  Vec3 look_at = Vec3::Zero();
  double fx = 600.0, fy = 600.0, cx = 320.0, cy = 240.0;
  int width = 640, height_px = 480;
};

/// Camera-to-world pose of a camera at `eye` looking at `target`; the image
/// y axis points away from `up`.
RigidTransform look_at(const Vec3& eye, const Vec3& target, const Vec3& up = Vec3::UnitZ());

/// Cameras evenly spaced in azimuth on a horizontal ring, each looking at
/// `look_at` with the world z axis pointing up in the image.
CameraRig generate_rig(const RigSpec& spec);

template <typename T>
struct Keyframe {
  int frame = 0;
  T value;
};

/// Slerp/lerp between keyframes (held constant outside the key range).
RigidTransform interpolate_pose(const std::vector<Keyframe<RigidTransform>>& keys, int frame);
/// Componentwise linear interpolation of the pose vector.
HandPose interpolate_hand_pose(const std::vector<Keyframe<HandPose>>& keys, int frame);

/// Fingers flexed by `curl` radians per joint and spread by `spread`
/// radians at the knuckles; every rotation axis is perpendicular to the
/// rest direction of the bone it moves, so the pose has no twist.
HandPose grasp_pose(const HandModelData& data, double curl, double spread = 0.0);

/// Twist-free articulation with per-joint angles up to `max_angle`,
/// global rotation up to `max_angle` and translation within `max_offset`.
HandPose random_twist_free_pose(const HandModelData& data, Rng& rng, double max_angle,
                                double max_offset = 0.05);

struct ObjectScenario {
  std::string name;
  TriangleMesh mesh;
  std::vector<Keyframe<RigidTransform>> keys;
};

struct HandScenario {
  Handedness side = Handedness::kRight;
  std::vector<Keyframe<HandPose>> keys;
};

struct NoiseSpec {
  double pixel_sigma = 1.0;       // landmark noise (px)
  double point_sigma = 0.001;     // depth noise along the viewing ray (m)
  double view_dropout = 0.0;      // P(camera misses a hand in a frame)
  double outlier_view = 0.0;      // P(a landmark view is corrupted)
  int landmark_outliers_per_joint = 0;  // corrupted views per joint per frame
  double frame_dropout = 0.0;     // P(no camera sees a hand in a frame)
  double landmark_outlier_px = 100.0;
  double pose_sigma_m = 0.002;    // per-camera initial pose noise
  double pose_sigma_deg = 1.0;
  int pose_outliers_per_frame = 0;
  double pose_outlier_probability = 0.0;
  double pose_outlier_m = 0.5;    // minimum outlier offset
  double pose_dropout = 0.0;      // P(a camera has no pose for a frame)
  std::vector<int> pose_blackout_frames;  // frames with no camera poses at all
  double device_jitter_m = 0.004; // ego device pose jitter
  double device_jitter_deg = 0.8;
};

struct EgoScenario {
  bool enabled = true;
  std::vector<Keyframe<RigidTransform>> keys;  // device camera -> world
};

struct ScenarioSpec {
  int frame_count = 100;
  double frame_rate = 30.0;
  std::vector<ObjectScenario> objects;
  std::vector<HandScenario> hands;
  HandShape shape;
  NoiseSpec noise;
  EgoScenario ego;
  int surface_samples = 1500;  // per entity per frame, shared by all cameras
  std::uint64_t seed = 0;
};

/// Benchmark scenario: two objects moving on the table and both hands
/// reaching toward them, observed by the default ring.
ScenarioSpec default_scenario(std::uint64_t seed = 0, int frame_count = 60);

inline constexpr int kLeftHandLabel = 200;
inline constexpr int kRightHandLabel = 201;

inline int hand_label(Handedness side) {
  return side == Handedness::kLeft ? kLeftHandLabel : kRightHandLabel;
}

struct SyntheticObject {
  std::string name;
  TriangleMesh mesh;
  std::vector<RigidTransform> gt;  // world pose per frame
  /// Per camera, per frame: noisy object-in-camera pose or nothing.
  std::map<std::string, std::vector<std::optional<RigidTransform>>> camera_poses;
};

struct SyntheticHand {
  Handedness side = Handedness::kRight;
  std::vector<HandPose> gt;
  std::vector<JointArray> gt_joints;
  std::vector<LandmarkObservation> landmarks;        // noisy, per camera and frame
  std::vector<LandmarkObservation> clean_landmarks;  // exact projections
};

struct SyntheticSequence {
  CameraRig rig;
  int frame_count = 0;
  double frame_rate = 30.0;
  std::uint64_t seed = 0;
  HandShape shape;
  std::vector<SyntheticObject> objects;
  std::vector<SyntheticHand> hands;
  /// clouds[frame][camera index], labels: object index or hand label.
  std::vector<std::vector<PointCloud>> clouds;
  std::vector<RigidTransform> ego_gt;
  std::vector<RigidTransform> ego_device;         // jittered
  std::vector<RigidTransform> ego_object_refined; // anchor object in the true device camera
};

/// Deterministic for a given scenario (including its seed). Cloud points
/// are surface samples facing the camera, displaced along the viewing ray
/// by Gaussian noise truncated at four sigma. Occlusion between entities is
/// not modeled.
SyntheticSequence generate_sequence(const CameraRig& rig, const ScenarioSpec& scenario,
                                    const HandModelData& right_hand_model);

/// Writes the sequence as a store directory (see sequence_store.hpp) with a
/// ground_truth/ folder and a manifest naming the RNG algorithm and seed.
void write_sequence(const SyntheticSequence& sequence, const HandModelData& right_hand_model,
                    const std::filesystem::path& root);

}  // namespace hoa
