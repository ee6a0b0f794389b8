#include "hoa/ego_refiner.hpp"

#include "hoa/error.hpp"

namespace hoa {

RigidTransform merged_object_pose(const std::vector<RigidTransform>& object_poses,
                                  std::size_t anchor) {
  if (object_poses.empty()) throw Error(ErrorCode::kNoObjects, "no object poses to merge");
  if (anchor >= object_poses.size()) {
    throw Error(ErrorCode::kInvalidArgument,
                "anchor " + std::to_string(anchor) + " out of range for " +
                    std::to_string(object_poses.size()) + " objects");
  }
  return object_poses[anchor];
}

RigidTransform object_in_camera(const RigidTransform& world_object,
                                const RigidTransform& device_camera) {
  return device_camera.inverse() * world_object;
}

RigidTransform refine_camera_pose(const RigidTransform& world_object,
                                  const RigidTransform& refined_obj_in_cam) {
  return world_object * refined_obj_in_cam.inverse();
}

PoseDistance mean_step(const std::vector<RigidTransform>& trajectory) {
  PoseDistance mean;
  if (trajectory.size() < 2) return mean;
  for (std::size_t i = 1; i < trajectory.size(); ++i) {
    const PoseDistance d = pose_distance(trajectory[i - 1], trajectory[i]);
    mean.angle_deg += d.angle_deg;
    mean.distance_m += d.distance_m;
  }
  const double n = static_cast<double>(trajectory.size() - 1);
  mean.angle_deg /= n;
  mean.distance_m /= n;
  return mean;
}

}  // namespace hoa
