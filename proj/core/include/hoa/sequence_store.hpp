#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "hoa/geometry.hpp"
#include "hoa/hand_model.hpp"
#include "hoa/hand_tracker.hpp"
#include "hoa/object_tracker.hpp"

namespace hoa {

/// sequence.json: what the store contains.
struct SequenceInfo {
  int frame_count = 0;
  double frame_rate = 30.0;
  std::vector<std::string> objects;  // first entry is the ego anchor
  std::vector<Handedness> hands;
  bool has_ego = false;
};

std::string sequence_info_to_json(const SequenceInfo& info);
SequenceInfo parse_sequence_info(std::string_view json_text);

/// Directory layout of one capture:
///
///   cameras.json  sequence.json  config.json
///   meshes/<object>.ply
///   clouds/frame_<frame:06>_<camera>.ply    world frame; labels: object index, 200 left, 201 right
///   poses_<camera>_<object>.csv             per-camera object-in-camera poses
///   landmarks_<camera>_<side>.csv
///   hands/<side>.bin  hands/shape.json
///   ego_device.csv  ego_object_in_camera.csv
///   output/...                              pipeline products
class SequenceStore {
 public:
  explicit SequenceStore(std::filesystem::path root) : root_(std::move(root)) {}

  const std::filesystem::path& root() const { return root_; }
  std::filesystem::path cameras_path() const { return root_ / "cameras.json"; }
  std::filesystem::path info_path() const { return root_ / "sequence.json"; }
  std::filesystem::path config_path() const { return root_ / "config.json"; }
  std::filesystem::path mesh_path(std::string_view object) const;
  std::filesystem::path cloud_path(int frame, std::string_view camera) const;
  std::filesystem::path camera_pose_path(std::string_view camera, std::string_view object) const;
  std::filesystem::path landmarks_path(std::string_view camera, Handedness side) const;
  std::filesystem::path hand_model_path(Handedness side) const;
  std::filesystem::path hand_shape_path() const { return root_ / "hands" / "shape.json"; }
  std::filesystem::path ego_device_path() const { return root_ / "ego_device.csv"; }
  std::filesystem::path ego_observation_path() const { return root_ / "ego_object_in_camera.csv"; }
  std::filesystem::path output_dir() const { return root_ / "output"; }
  std::filesystem::path ground_truth_dir() const { return root_ / "ground_truth"; }

  /// Loaders throw missing-input when a file is absent.
  SequenceInfo info() const;
  CameraRig rig() const;
  TriangleMesh mesh(std::string_view object) const;
  PointCloud cloud(int frame, std::string_view camera) const;

 private:
  std::filesystem::path root_;
};

/// Throws missing-input naming the path when it does not exist.
void require_file(const std::filesystem::path& path);

/// One row of a per-camera pose file; an absent pose is written valid=0.
struct CameraPoseRow {
  int frame = 0;
  std::optional<RigidTransform> pose;
};

// CSV files carry a header row; parse errors raise format with the line number.

/// frame,qw,qx,qy,qz,tx,ty,tz,valid
std::string camera_poses_to_csv(const std::vector<CameraPoseRow>& rows);
std::vector<CameraPoseRow> parse_camera_poses(std::string_view csv);

/// frame,qw,qx,qy,qz,tx,ty,tz,status
std::string pose_track_to_csv(const PoseTrack& track);
PoseTrack parse_pose_track(std::string_view csv);

/// frame,joint,u,v,valid (one row per joint).
std::string landmarks_to_csv(const std::vector<LandmarkObservation>& observations);
std::vector<LandmarkObservation> parse_landmarks(std::string_view csv, const std::string& camera);

/// frame,p0..p50 in HandPose::to_vector order.
std::string hand_poses_to_csv(const std::vector<HandPose>& poses);
std::vector<HandPose> parse_hand_poses(std::string_view csv);

/// frame,joint,x,y,z,source; missing joints are omitted.
std::string keypoints_to_csv(const Keypoint3DTrack& track);
Keypoint3DTrack parse_keypoints(std::string_view csv, int frame_count);

std::string hand_shape_to_json(const HandShape& shape);
HandShape parse_hand_shape(std::string_view json_text);

Handedness parse_handedness(std::string_view name);

}  // namespace hoa
