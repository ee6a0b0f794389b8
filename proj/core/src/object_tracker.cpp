#include "hoa/object_tracker.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

#include "hoa/error.hpp"
#include "hoa/random.hpp"
#include "lm.hpp"

namespace hoa {

void FusionConfig::validate() const {
  const bool ok = pairwise_spread_max.distance_m > 0 && pairwise_spread_max.angle_deg > 0 &&
                  prev_pose_gate.distance_m > 0 && prev_pose_gate.angle_deg > 0 &&
                  ransac_inlier_tol.distance_m > 0 && ransac_inlier_tol.angle_deg > 0 &&
                  ransac_iters > 0;
  if (!ok) throw Error(ErrorCode::kInvalidArgument, "fusion thresholds must be positive");
}

std::string_view track_status_name(TrackStatus status) {
  switch (status) {
    case TrackStatus::kFused: return "fused";
    case TrackStatus::kCarriedForward: return "carried-forward";
    case TrackStatus::kRefined: return "refined";
  }
  return "fused";
}

TrackStatus parse_track_status(std::string_view name) {
  if (name == "fused") return TrackStatus::kFused;
  if (name == "carried-forward") return TrackStatus::kCarriedForward;
  if (name == "refined") return TrackStatus::kRefined;
  throw Error(ErrorCode::kFormat, "unknown track status '" + std::string(name) + "'");
}

void PoseTrack::push(int frame, const RigidTransform& pose, TrackStatus status) {
  if (!entries_.empty() && frame <= entries_.back().frame) {
    throw Error(ErrorCode::kInvalidArgument, "track frames must be strictly increasing");
  }
  const RigidTransform aligned =
      entries_.empty() ? pose : pose.aligned_to(entries_.back().pose);
  entries_.push_back({frame, aligned, status});
}

PoseDistance pose_set_spread(const std::vector<RigidTransform>& poses) {
  const std::size_t n = poses.size();
  if (n < 2) return {};
  std::vector<std::vector<PoseDistance>> d(n, std::vector<PoseDistance>(n));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) d[i][j] = d[j][i] = pose_distance(poses[i], poses[j]);
  }
  PoseDistance best{std::numeric_limits<double>::infinity(),
                    std::numeric_limits<double>::infinity()};
  std::vector<double> angles, dists;
  for (std::size_t i = 0; i < n; ++i) {
    angles.clear();
    dists.clear();
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      angles.push_back(d[i][j].angle_deg);
      dists.push_back(d[i][j].distance_m);
    }
    const std::size_t mid = (angles.size() - 1) / 2;
    std::nth_element(angles.begin(), angles.begin() + mid, angles.end());
    std::nth_element(dists.begin(), dists.begin() + mid, dists.end());
    best.angle_deg = std::min(best.angle_deg, angles[mid]);
    best.distance_m = std::min(best.distance_m, dists[mid]);
  }
  return best;
}

namespace {

RigidTransform average_poses(const std::vector<RigidTransform>& poses,
                             const std::vector<std::size_t>& members) {
  const Quat& ref = poses[members.front()].rotation();
  Eigen::Vector4d q = Eigen::Vector4d::Zero();
  Vec3 t = Vec3::Zero();
  for (std::size_t m : members) {
    const Quat a = hemisphere_aligned(poses[m].rotation(), ref);
    q += Eigen::Vector4d(a.w(), a.x(), a.y(), a.z());
    t += poses[m].translation();
  }
  q.normalize();
  return RigidTransform(Quat(q[0], q[1], q[2], q[3]),
                        t / static_cast<double>(members.size()));
}

}  // namespace

FusionResult fuse_poses_ransac(const MultiViewPoseSet& views, const CameraRig& rig,
                               const std::optional<RigidTransform>& prev,
                               const FusionConfig& cfg, Rng* rng) {
  cfg.validate();
  auto sorted = views.views;
  std::sort(sorted.begin(), sorted.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });

  FusionResult result;
  if (sorted.empty()) {
    if (!prev) {
      throw Error(ErrorCode::kUntrackedFrame,
                  "frame " + std::to_string(views.frame) + " has no views and no previous pose");
    }
    result.pose = *prev;
    result.status = TrackStatus::kCarriedForward;
    return result;
  }

  std::vector<RigidTransform> candidates;
  std::vector<std::string> names;
  for (const auto& [camera, pose] : sorted) {
    candidates.push_back(find_camera(rig, camera).camera_to_world() * pose);
    names.push_back(camera);
  }

  const PoseDistance spread = pose_set_spread(candidates);
  if (prev && !cfg.pairwise_spread_max.admits(spread)) {
    result.pose = *prev;
    result.status = TrackStatus::kCarriedForward;
    return result;
  }
  if (prev && std::all_of(candidates.begin(), candidates.end(), [&](const RigidTransform& c) {
        return cfg.prev_pose_gate.admits(pose_distance(c, *prev));
      })) {
    candidates.push_back(*prev);
    names.push_back("prev");
  }

  const std::size_t n = candidates.size();
  std::vector<std::size_t> hypotheses;
  if (n <= static_cast<std::size_t>(cfg.ransac_iters)) {
    hypotheses.resize(n);
    std::iota(hypotheses.begin(), hypotheses.end(), std::size_t{0});
  } else {
    Rng fallback(0);
    Rng& r = rng != nullptr ? *rng : fallback;
    for (int i = 0; i < cfg.ransac_iters; ++i) hypotheses.push_back(r.below(n));
  }

  const PoseGate& tol = cfg.ransac_inlier_tol;
  std::vector<std::size_t> best;
  double best_score = std::numeric_limits<double>::infinity();
  for (std::size_t h : hypotheses) {
    std::vector<std::size_t> inliers;
    double score = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const PoseDistance d = pose_distance(candidates[h], candidates[j]);
      if (!tol.admits(d)) continue;
      inliers.push_back(j);
      score += d.distance_m / tol.distance_m + d.angle_deg / tol.angle_deg;
    }
    score /= static_cast<double>(inliers.size());
    if (inliers.size() > best.size() || (inliers.size() == best.size() && score < best_score)) {
      best = std::move(inliers);
      best_score = score;
    }
  }

  result.pose = average_poses(candidates, best);
  result.status = TrackStatus::kFused;
  for (std::size_t m : best) result.inlier_cameras.push_back(names[m]);
  return result;
}

namespace {

struct PointTerm {
  double residual;
  Eigen::Matrix<double, 1, 6> jacobian;
};

PointTerm linearize_point(const VoxelSdf& sdf, const Mat3& rt, const Vec3& t, const Vec3& x) {
  const Vec3 y = x - t;
  Vec3 grad;
  PointTerm term;
  term.residual = sdf.query(rt * y, &grad);
  const Eigen::RowVector3d gr = grad.transpose() * rt;
  term.jacobian.head<3>() = gr * skew(y);
  term.jacobian.tail<3>() = -gr;
  return term;
}

}  // namespace

void smoothness_residuals(const RigidTransform& curr, const RigidTransform& prev,
                          Eigen::Matrix<double, 7, 1>& r, Eigen::Matrix<double, 7, 6>& j) {
  const Quat q = hemisphere_aligned(curr.rotation(), prev.rotation());
  const Quat& p = prev.rotation();
  r << q.w() - p.w(), q.x() - p.x(), q.y() - p.y(), q.z() - p.z(),
      curr.translation() - prev.translation();
  j.setZero();
  const Vec3 u = q.vec();
  for (int k = 0; k < 3; ++k) {
    const Vec3 e = Vec3::Unit(k);
    // d q / d omega_k = 0.5 * (0, e_k) (x) q
    j(0, k) = -0.5 * e.dot(u);
    j.block<3, 1>(1, k) = 0.5 * (q.w() * e + e.cross(u));
  }
  j.block<3, 3>(4, 3).setIdentity();
}

double sdf_loss(const VoxelSdf& sdf, const RigidTransform& pose,
                const std::vector<Vec3>& points_world) {
  if (points_world.empty()) throw Error(ErrorCode::kEmptyCloud, "no points for sdf loss");
  const RigidTransform inv = pose.inverse();
  double sum = 0.0;
  for (const Vec3& x : points_world) {
    const double r = sdf.query(inv * x);
    sum += r * r;
  }
  return sum / static_cast<double>(points_world.size());
}

Vec6 sdf_loss_gradient(const VoxelSdf& sdf, const RigidTransform& pose,
                       const std::vector<Vec3>& points_world) {
  if (points_world.empty()) throw Error(ErrorCode::kEmptyCloud, "no points for sdf loss");
  const Mat3 rt = pose.rotation_matrix().transpose();
  Vec6 g = Vec6::Zero();
  for (const Vec3& x : points_world) {
    const PointTerm term = linearize_point(sdf, rt, pose.translation(), x);
    g += term.residual * term.jacobian.transpose();
  }
  return g * (2.0 / static_cast<double>(points_world.size()));
}

double smoothness_loss(const RigidTransform& curr, const RigidTransform& prev) {
  const Quat q = hemisphere_aligned(curr.rotation(), prev.rotation());
  return (q.coeffs() - prev.rotation().coeffs()).squaredNorm() +
         (curr.translation() - prev.translation()).squaredNorm();
}

Vec6 smoothness_loss_gradient(const RigidTransform& curr, const RigidTransform& prev) {
  Eigen::Matrix<double, 7, 1> r;
  Eigen::Matrix<double, 7, 6> j;
  smoothness_residuals(curr, prev, r, j);
  return 2.0 * j.transpose() * r;
}

double object_objective(const VoxelSdf& sdf, const RigidTransform& pose,
                        const std::vector<Vec3>& points_world,
                        const std::optional<RigidTransform>& prev, double lambda1) {
  double loss = sdf_loss(sdf, pose, points_world);
  if (prev && lambda1 > 0.0) loss += lambda1 * kWeightScale * smoothness_loss(pose, *prev);
  return loss;
}

RefineResult refine_pose_sdf(const VoxelSdf& sdf, const std::vector<Vec3>& points_world,
                             const RigidTransform& init,
                             const std::optional<RigidTransform>& prev, double lambda1,
                             const RefineOptions& options) {
  if (lambda1 < 0.0) throw Error(ErrorCode::kInvalidArgument, "lambda1 must be >= 0");
  RefineResult result;
  result.pose = init;
  if (points_world.size() < options.min_points) {
    result.status = SolverStatus::kTooFewPoints;
    if (!points_world.empty()) {
      result.initial_loss = result.final_loss =
          object_objective(sdf, init, points_world, prev, lambda1);
    }
    return result;
  }

  const double inv_n = 1.0 / static_cast<double>(points_world.size());
  const double w = prev ? lambda1 * kWeightScale : 0.0;
  auto linearize = [&](const RigidTransform& pose) {
    detail::NormalEquations ne;
    Eigen::Matrix<double, 6, 6> h = Eigen::Matrix<double, 6, 6>::Zero();
    Vec6 g = Vec6::Zero();
    const Mat3 rt = pose.rotation_matrix().transpose();
    for (const Vec3& x : points_world) {
      const PointTerm term = linearize_point(sdf, rt, pose.translation(), x);
      h.noalias() += term.jacobian.transpose() * term.jacobian;
      g += term.residual * term.jacobian.transpose();
    }
    h *= inv_n;
    g *= inv_n;
    // Loss recomputed through the same path as the accept test.
    ne.loss = object_objective(sdf, pose, points_world, prev, lambda1);
    if (w > 0.0) {
      Eigen::Matrix<double, 7, 1> r;
      Eigen::Matrix<double, 7, 6> j;
      smoothness_residuals(pose, *prev, r, j);
      h += w * j.transpose() * j;
      g += w * j.transpose() * r;
    }
    ne.hessian = h;
    ne.gradient = g;
    return ne;
  };
  auto loss = [&](const RigidTransform& pose) {
    return object_objective(sdf, pose, points_world, prev, lambda1);
  };
  auto apply = [](const RigidTransform& pose, const Eigen::VectorXd& delta) {
    return pose.retract(Vec6(delta));
  };
  detail::LmOptions opts;
  opts.max_iterations = options.max_iterations;
  opts.step_tolerance = options.step_tolerance;
  const auto lm = detail::levenberg_marquardt(init, linearize, loss, apply, opts);
  result.pose = lm.state;
  result.status = lm.status;
  result.initial_loss = lm.initial_loss;
  result.final_loss = lm.final_loss;
  result.iterations = lm.iterations;
  return result;
}

ObjectTrackResult track_object(const VoxelSdf& sdf, const std::vector<MultiViewPoseSet>& frames,
                               const std::vector<std::vector<Vec3>>& clouds,
                               const CameraRig& rig, const FusionConfig& cfg, double lambda1,
                               Rng& rng, const RefineOptions& options) {
  if (clouds.size() != frames.size()) {
    throw Error(ErrorCode::kInvalidArgument, "one cloud per frame is required");
  }
  ObjectTrackResult out;
  std::optional<RigidTransform> prev;
  for (std::size_t f = 0; f < frames.size(); ++f) {
    const FusionResult fused = fuse_poses_ransac(frames[f], rig, prev, cfg, &rng);
    out.fused.push(frames[f].frame, fused.pose, fused.status);
    RefineResult refined = refine_pose_sdf(sdf, clouds[f], fused.pose, prev, lambda1, options);
    TrackStatus status = fused.status;
    if (status == TrackStatus::kFused && refined.status != SolverStatus::kTooFewPoints) {
      status = TrackStatus::kRefined;
    }
    out.refined.push(frames[f].frame, refined.pose, status);
    prev = out.refined.back().pose;
    out.diagnostics.push_back(std::move(refined));
  }
  return out;
}

PoseTrack fuse_track(const std::vector<MultiViewPoseSet>& frames, const CameraRig& rig,
                     const FusionConfig& cfg, Rng& rng) {
  PoseTrack track;
  std::optional<RigidTransform> prev;
  for (const auto& set : frames) {
    const FusionResult fused = fuse_poses_ransac(set, rig, prev, cfg, &rng);
    track.push(set.frame, fused.pose, fused.status);
    prev = track.back().pose;
  }
  return track;
}

RefinedTrack refine_track(const VoxelSdf& sdf, const PoseTrack& fused,
                          const std::vector<std::vector<Vec3>>& clouds, double lambda1,
                          const RefineOptions& options) {
  if (clouds.size() != fused.size()) {
    throw Error(ErrorCode::kInvalidArgument, "one cloud per frame is required");
  }
  RefinedTrack out;
  std::optional<RigidTransform> prev;
  for (std::size_t f = 0; f < fused.size(); ++f) {
    const TrackedPose& in = fused[f];
    RefineResult refined = refine_pose_sdf(sdf, clouds[f], in.pose, prev, lambda1, options);
    TrackStatus status = in.status;
    if (status == TrackStatus::kFused && refined.status != SolverStatus::kTooFewPoints) {
      status = TrackStatus::kRefined;
    }
    out.track.push(in.frame, refined.pose, status);
    prev = out.track.back().pose;
    out.diagnostics.push_back(std::move(refined));
  }
  return out;
}

}  // namespace hoa
