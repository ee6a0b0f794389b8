#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "hoa/geometry.hpp"
#include "hoa/sdf.hpp"
#include "hoa/solver.hpp"

namespace hoa {

class Rng;

/// Per-component threshold on a pose difference.
struct PoseGate {
  double distance_m = 0.0;
  double angle_deg = 0.0;

  bool admits(const PoseDistance& d) const {
    return d.distance_m <= distance_m && d.angle_deg <= angle_deg;
  }
};

struct FusionConfig {
  PoseGate pairwise_spread_max{0.05, 15.0};
  PoseGate prev_pose_gate{0.02, 10.0};
  PoseGate ransac_inlier_tol{0.02, 10.0};
  int ransac_iters = 64;

  /// Throws invalid-argument unless every threshold is positive.
  void validate() const;
};

/// Object pose observed in each camera's frame at one frame index.
struct MultiViewPoseSet {
  int frame = 0;
  std::vector<std::pair<std::string, RigidTransform>> views;  // camera name, pose
};

enum class TrackStatus { kFused, kCarriedForward, kRefined };

std::string_view track_status_name(TrackStatus status);
TrackStatus parse_track_status(std::string_view name);

struct TrackedPose {
  int frame = 0;
  RigidTransform pose;
  TrackStatus status = TrackStatus::kFused;
};

/// World-frame track with strictly increasing frames; every quaternion is
/// stored in the hemisphere of its predecessor.
class PoseTrack {
 public:
  /// Throws invalid-argument when `frame` does not increase.
  void push(int frame, const RigidTransform& pose, TrackStatus status);
  const std::vector<TrackedPose>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  const TrackedPose& operator[](std::size_t i) const { return entries_[i]; }
  const TrackedPose& back() const { return entries_.back(); }

 private:
  std::vector<TrackedPose> entries_;
};

struct FusionResult {
  RigidTransform pose;
  TrackStatus status = TrackStatus::kFused;
  std::vector<std::string> inlier_cameras;  // sorted; "prev" when used
};

/// Spread of a pose set: for each pose the median distance to the others
/// (per component), minimized over poses. Zero for fewer than two poses.
PoseDistance pose_set_spread(const std::vector<RigidTransform>& poses);

/// World-frame consensus of per-camera object poses. Views are processed
/// in camera-name order, so the result does not depend on input order. When
/// there are no more candidates than `ransac_iters` every candidate is
/// tried; otherwise hypotheses are drawn from `rng`.
FusionResult fuse_poses_ransac(const MultiViewPoseSet& views, const CameraRig& rig,
                               const std::optional<RigidTransform>& prev,
                               const FusionConfig& cfg, Rng* rng = nullptr);

/// Mean of squared SDF values of world points mapped into the object frame.
/// Throws empty-cloud for an empty point set.
double sdf_loss(const VoxelSdf& sdf, const RigidTransform& pose,
                const std::vector<Vec3>& points_world);

/// Gradient of sdf_loss with respect to the tangent update (omega, v) of
/// RigidTransform::retract, using the analytic trilinear gradient.
Vec6 sdf_loss_gradient(const VoxelSdf& sdf, const RigidTransform& pose,
                       const std::vector<Vec3>& points_world);

/// Squared quaternion difference (after hemisphere alignment) plus squared
/// translation difference.
double smoothness_loss(const RigidTransform& curr, const RigidTransform& prev);

/// Residuals [q - q_prev; t - t_prev] (q hemisphere-aligned to q_prev) and
/// their Jacobian with respect to the tangent update of curr.
void smoothness_residuals(const RigidTransform& curr, const RigidTransform& prev,
                          Eigen::Matrix<double, 7, 1>& residual,
                          Eigen::Matrix<double, 7, 6>& jacobian);

/// Gradient of smoothness_loss with respect to the tangent update of curr.
Vec6 smoothness_loss_gradient(const RigidTransform& curr, const RigidTransform& prev);

struct RefineOptions {
  int max_iterations = 50;
  double step_tolerance = 1e-6;
  std::size_t min_points = 50;
};

struct RefineResult {
  RigidTransform pose;
  SolverStatus status = SolverStatus::kConverged;
  double initial_loss = 0.0;
  double final_loss = 0.0;
  int iterations = 0;
};

/// Total objective: sdf_loss + lambda1 * kWeightScale * smoothness_loss.
double object_objective(const VoxelSdf& sdf, const RigidTransform& pose,
                        const std::vector<Vec3>& points_world,
                        const std::optional<RigidTransform>& prev, double lambda1);

/// Damped Gauss-Newton on the 6-dim tangent space around `init`. Returns
/// `init` with status too-few-points below `min_points` points.
RefineResult refine_pose_sdf(const VoxelSdf& sdf, const std::vector<Vec3>& points_world,
                             const RigidTransform& init,
                             const std::optional<RigidTransform>& prev, double lambda1,
                             const RefineOptions& options = {});

struct ObjectTrackResult {
  PoseTrack fused;    // fusion output (fused / carried-forward)
  PoseTrack refined;  // after SDF refinement (refined / carried-forward)
  std::vector<RefineResult> diagnostics;
};

/// Per frame: fuse the camera views (seeded by the previous refined pose),
/// then refine against that frame's cloud. Throws untracked-frame when the
/// first frame has no views.
ObjectTrackResult track_object(const VoxelSdf& sdf, const std::vector<MultiViewPoseSet>& frames,
                               const std::vector<std::vector<Vec3>>& clouds,
                               const CameraRig& rig, const FusionConfig& cfg, double lambda1,
                               Rng& rng, const RefineOptions& options = {});

/// Fusion alone, each frame gated against the previous fused pose.
PoseTrack fuse_track(const std::vector<MultiViewPoseSet>& frames, const CameraRig& rig,
                     const FusionConfig& cfg, Rng& rng);

struct RefinedTrack {
  PoseTrack track;
  std::vector<RefineResult> diagnostics;
};

/// Refines every fused pose against its frame's cloud, smoothing toward the
/// previous refined pose. Carried-forward frames keep their status.
RefinedTrack refine_track(const VoxelSdf& sdf, const PoseTrack& fused,
                          const std::vector<std::vector<Vec3>>& clouds, double lambda1,
                          const RefineOptions& options = {});

/// World pose re-expressed in a camera's frame (feedback for per-view
/// trackers).
inline RigidTransform pose_in_camera(const CameraModel& camera, const RigidTransform& world) {
  return camera.world_to_camera() * world;
}

}  // namespace hoa
