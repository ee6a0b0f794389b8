#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "hoa/geometry.hpp"
#include "hoa/hand_model.hpp"
#include "hoa/solver.hpp"

namespace hoa {

inline constexpr double kDefaultLandmarkGate = 20.0;  // pixels
inline constexpr double kMaxJointStep = 0.3;          // meters per frame

struct Landmark {
  Vec2 pixel = Vec2::Zero();
  bool valid = false;
};

/// 2D detections of the 21 hand joints in one camera at one frame.
struct LandmarkObservation {
  int frame = 0;
  std::string camera;
  std::array<Landmark, kHandJoints> joints{};
};

enum class KeypointSource { kMissing, kTriangulated, kInterpolated, kSplined };

std::string_view keypoint_source_name(KeypointSource source);
KeypointSource parse_keypoint_source(std::string_view name);

struct KeypointFrame {
  int frame = 0;
  std::array<std::optional<Vec3>, kHandJoints> joints{};
  std::array<KeypointSource, kHandJoints> source{};
};

/// Per-frame 3D joints, frames in increasing order.
struct Keypoint3DTrack {
  std::vector<KeypointFrame> frames;

  /// Frames where some joint moved more than kMaxJointStep since the
  /// previous frame.
  std::vector<int> flagged_jumps() const;
};

struct TriangulationResult {
  Vec3 point = Vec3::Zero();
  std::vector<std::string> inlier_cameras;  // sorted
  double loss = 0.0;  // summed squared reprojection error over inliers (px^2)
};

/// One joint seen by several cameras: (camera name, pixel).
using JointViews = std::vector<std::pair<std::string, Vec2>>;

/// Sum over views of squared reprojection error (px^2). A view behind its
/// camera contributes `gate`^2 when `truncate` is set, infinity otherwise.
double projection_loss(const CameraRig& rig, const JointViews& views, const Vec3& point,
                       double gate = kDefaultLandmarkGate, bool truncate = false);

/// Every valid pair is triangulated; each candidate is scored by the
/// projection loss with per-view errors truncated at the gate, the best
/// candidate with at least two views inside the gate wins and is polished
/// by Gauss-Newton over its inlier views. Throws joint-unobserved for fewer
/// than two views and joint-inconsistent when no candidate has two inliers.
TriangulationResult triangulate_joint_ransac(const JointViews& views, const CameraRig& rig,
                                             double gate = kDefaultLandmarkGate);

/// Interior gaps filled linearly, leading/trailing gaps held at the nearest
/// observed value. Throws joint-empty for a joint that is never observed.
Keypoint3DTrack fill_gaps_linear(const Keypoint3DTrack& track);

struct SplineOutcome {
  Keypoint3DTrack track;
  bool warning = false;  // fewer than four knots for some joint
};

/// Natural cubic spline per joint coordinate through the frames that carry
/// measured (triangulated or splined) values; frames between the first and
/// last such frame that were only gap-filled are replaced by spline values.
SplineOutcome smooth_cubic_spline(const Keypoint3DTrack& track, double frame_rate);

/// Mean over the 21 joints of squared distance between model joints and
/// keypoints (m^2).
double keypoint_loss(const HandModelData& data, const HandShape& shape, const HandPose& pose,
                     const JointArray& keypoints);

/// keypoint_loss + lambda2 * kWeightScale * |articulation|^2.
double hand_fit_objective(const HandModelData& data, const HandShape& shape,
                          const HandPose& pose, const JointArray& keypoints, double lambda2);

/// Analytic gradient of hand_fit_objective with respect to the pose vector.
PoseVector hand_fit_gradient(const HandModelData& data, const HandShape& shape,
                             const HandPose& pose, const JointArray& keypoints, double lambda2);

/// Same joints, but every articulated rotation replaced by the shortest
/// rotation taking its rest child bone onto the posed one. Rotations about
/// a bone's own axis cannot be seen from joint positions, so this picks the
/// twist-free member of each family of equivalent poses.
HandPose twist_free_articulation(const HandModelData& data, const HandShape& shape,
                                 const HandPose& pose);

struct HandFitOptions {
  int max_iterations = 100;
  double step_tolerance = 1e-7;
};

struct HandFitResult {
  HandPose pose;
  SolverStatus status = SolverStatus::kConverged;
  double initial_loss = 0.0;
  double final_loss = 0.0;
};

/// Levenberg-Marquardt on hand_fit_objective with the analytic FK Jacobian.
/// The start is the better of `init` and `init` with its global transform
/// replaced by a rigid alignment of the palm joints to the keypoints.
HandFitResult fit_hand_pose(const HandModelData& data, const HandShape& shape,
                            const JointArray& keypoints, const HandPose& init, double lambda2,
                            const HandFitOptions& options = {});

struct HandTrackResult {
  Keypoint3DTrack triangulated;
  Keypoint3DTrack smoothed;
  std::vector<HandPose> poses;
  std::vector<HandFitResult> fits;
  bool spline_warning = false;
};

/// Landmarks of one hand for all frames (any number of cameras per frame)
/// -> per-joint triangulation -> gap fill -> spline -> per-frame fit seeded
/// by the previous frame. `frame_count` frames are produced, 0..count-1.
HandTrackResult track_hand(const std::vector<LandmarkObservation>& observations,
                           int frame_count, const CameraRig& rig, const HandModelData& data,
                           const HandShape& shape, double lambda2, double frame_rate = 30.0,
                           double gate = kDefaultLandmarkGate);

}  // namespace hoa
