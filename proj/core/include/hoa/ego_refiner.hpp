#pragma once

#include <vector>

#include "hoa/geometry.hpp"

namespace hoa {

struct EgoPoseSample {
  int frame = 0;
  RigidTransform device_camera;     // camera -> world, as published by the device
  RigidTransform refined_in_camera; // externally refined object-in-camera pose
};

/// World pose of the merged object group: the anchor object's pose (the
/// group's meshes are expressed in the anchor frame). Throws no-objects for
/// an empty list and invalid-argument for a bad anchor.
RigidTransform merged_object_pose(const std::vector<RigidTransform>& object_poses,
                                  std::size_t anchor = 0);

/// device_camera^-1 * world_object.
RigidTransform object_in_camera(const RigidTransform& world_object,
                                const RigidTransform& device_camera);

/// world_object * refined_obj_in_cam^-1 (camera -> world).
RigidTransform refine_camera_pose(const RigidTransform& world_object,
                                  const RigidTransform& refined_obj_in_cam);

/// Mean frame-to-frame pose_distance along a trajectory.
PoseDistance mean_step(const std::vector<RigidTransform>& trajectory);

}  // namespace hoa
