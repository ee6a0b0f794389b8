#include "hoa/hand_tracker.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include <Eigen/SVD>

#include "hoa/error.hpp"
#include "hoa/spline.hpp"
#include "lm.hpp"

namespace hoa {

std::string_view keypoint_source_name(KeypointSource source) {
  switch (source) {
    case KeypointSource::kMissing: return "missing";
    case KeypointSource::kTriangulated: return "triangulated";
    case KeypointSource::kInterpolated: return "interpolated";
    case KeypointSource::kSplined: return "splined";
  }
  return "missing";
}

KeypointSource parse_keypoint_source(std::string_view name) {
  if (name == "missing") return KeypointSource::kMissing;
  if (name == "triangulated") return KeypointSource::kTriangulated;
  if (name == "interpolated") return KeypointSource::kInterpolated;
  if (name == "splined") return KeypointSource::kSplined;
  throw Error(ErrorCode::kFormat, "unknown keypoint source '" + std::string(name) + "'");
}

std::vector<int> Keypoint3DTrack::flagged_jumps() const {
  std::vector<int> out;
  for (std::size_t f = 1; f < frames.size(); ++f) {
    for (int j = 0; j < kHandJoints; ++j) {
      const auto& a = frames[f - 1].joints[j];
      const auto& b = frames[f].joints[j];
      if (a && b && (*a - *b).norm() > kMaxJointStep) {
        out.push_back(frames[f].frame);
        break;
      }
    }
  }
  return out;
}

double projection_loss(const CameraRig& rig, const JointViews& views, const Vec3& point,
                       double gate, bool truncate) {
  const double cap = gate * gate;
  double total = 0.0;
  for (const auto& [camera, pixel] : views) {
    double e2 = std::numeric_limits<double>::infinity();
    try {
      e2 = (project(find_camera(rig, camera), point) - pixel).squaredNorm();
    } catch (const Error& err) {
      if (err.code() != ErrorCode::kBehindCamera) throw;
    }
    total += truncate ? std::min(e2, cap) : e2;
  }
  return total;
}

TriangulationResult triangulate_joint_ransac(const JointViews& views, const CameraRig& rig,
                                             double gate) {
  if (views.size() < 2) {
    throw Error(ErrorCode::kJointUnobserved,
                std::to_string(views.size()) + " valid view(s), need 2");
  }
  JointViews sorted = views;
  std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) {
    return a.first < b.first || (a.first == b.first && std::tie(a.second.x(), a.second.y()) <
                                                           std::tie(b.second.x(), b.second.y()));
  });
  std::vector<const CameraModel*> cams;
  for (const auto& v : sorted) cams.push_back(&find_camera(rig, v.first));

  const double cap = gate * gate;
  double best_score = std::numeric_limits<double>::infinity();
  std::vector<std::size_t> best_inliers;
  Vec3 best_point = Vec3::Zero();
  for (std::size_t a = 0; a < sorted.size(); ++a) {
    for (std::size_t b = a + 1; b < sorted.size(); ++b) {
      Vec3 candidate;
      try {
        candidate = triangulate_pair(*cams[a], sorted[a].second, *cams[b], sorted[b].second);
      } catch (const Error& err) {
        if (err.code() == ErrorCode::kDegeneratePair) continue;
        throw;
      }
      double score = 0.0;
      std::vector<std::size_t> inliers;
      for (std::size_t v = 0; v < sorted.size(); ++v) {
        double e2 = cap;
        try {
          e2 = std::min(cap, (project(*cams[v], candidate) - sorted[v].second).squaredNorm());
          if (e2 < cap) inliers.push_back(v);
        } catch (const Error& err) {
          if (err.code() != ErrorCode::kBehindCamera) throw;
        }
        score += e2;
      }
      if (inliers.size() >= 2 && score < best_score) {
        best_score = score;
        best_inliers = std::move(inliers);
        best_point = candidate;
      }
    }
  }
  if (best_inliers.empty()) {
    throw Error(ErrorCode::kJointInconsistent, "no pair triangulation has two views within " +
                                                   std::to_string(gate) + " px");
  }

  JointViews inlier_views;
  for (std::size_t v : best_inliers) inlier_views.push_back(sorted[v]);

  auto loss = [&](const Vec3& x) { return projection_loss(rig, inlier_views, x, gate, false); };
  auto linearize = [&](const Vec3& x) {
    detail::NormalEquations ne;
    ne.hessian = Eigen::Matrix3d::Zero();
    ne.gradient = Eigen::Vector3d::Zero();
    for (std::size_t k = 0; k < best_inliers.size(); ++k) {
      Eigen::Matrix<double, 2, 3> j;
      const Vec2 e = project(*cams[best_inliers[k]], x, &j) - sorted[best_inliers[k]].second;
      ne.hessian += j.transpose() * j;
      ne.gradient += j.transpose() * e;
    }
    ne.loss = loss(x);
    return ne;
  };
  auto apply = [](const Vec3& x, const Eigen::VectorXd& d) { return Vec3(x + d); };
  detail::LmOptions opts;
  opts.max_iterations = 20;
  opts.step_tolerance = 1e-10;
  opts.initial_damping = 1e-6;
  const auto lm = detail::levenberg_marquardt(best_point, linearize, loss, apply, opts);

  TriangulationResult result;
  result.point = lm.state;
  result.loss = lm.final_loss;
  for (const auto& v : inlier_views) result.inlier_cameras.push_back(v.first);
  return result;
}

Keypoint3DTrack fill_gaps_linear(const Keypoint3DTrack& track) {
  Keypoint3DTrack out = track;
  const std::size_t n = track.frames.size();
  for (int j = 0; j < kHandJoints; ++j) {
    std::vector<std::size_t> observed;
    for (std::size_t f = 0; f < n; ++f) {
      if (track.frames[f].joints[j]) observed.push_back(f);
    }
    if (observed.empty()) {
      throw Error(ErrorCode::kJointEmpty, "joint " + std::to_string(j) + " is never observed");
    }
    std::size_t next = 0;  // index into observed of the first observation at or after f
    for (std::size_t f = 0; f < n; ++f) {
      while (next < observed.size() && observed[next] < f) ++next;
      if (next < observed.size() && observed[next] == f) continue;
      auto& slot = out.frames[f].joints[j];
      if (next == 0) {
        slot = *track.frames[observed.front()].joints[j];
      } else if (next == observed.size()) {
        slot = *track.frames[observed.back()].joints[j];
      } else {
        const std::size_t a = observed[next - 1];
        const std::size_t b = observed[next];
        const double fa = track.frames[a].frame;
        const double fb = track.frames[b].frame;
        const double s = (track.frames[f].frame - fa) / (fb - fa);
        const Vec3& va = *track.frames[a].joints[j];
        const Vec3& vb = *track.frames[b].joints[j];
        slot = Vec3(va + (vb - va) * s);
      }
      out.frames[f].source[j] = KeypointSource::kInterpolated;
    }
  }
  return out;
}

SplineOutcome smooth_cubic_spline(const Keypoint3DTrack& track, double frame_rate) {
  if (!(frame_rate > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "frame rate must be positive");
  }
  SplineOutcome out;
  out.track = track;
  const std::size_t n = track.frames.size();
  for (int j = 0; j < kHandJoints; ++j) {
    std::vector<std::size_t> knots;
    for (std::size_t f = 0; f < n; ++f) {
      const auto src = track.frames[f].source[j];
      if (track.frames[f].joints[j] &&
          (src == KeypointSource::kTriangulated || src == KeypointSource::kSplined)) {
        knots.push_back(f);
      }
    }
    if (knots.size() < 4) {
      out.warning = true;
      continue;
    }
    std::vector<double> t;
    std::array<std::vector<double>, 3> y;
    for (std::size_t k : knots) {
      t.push_back(track.frames[k].frame / frame_rate);
      for (int c = 0; c < 3; ++c) y[c].push_back((*track.frames[k].joints[j])[c]);
    }
    const std::array<NaturalCubicSpline, 3> splines = {NaturalCubicSpline(t, y[0]),
                                                       NaturalCubicSpline(t, y[1]),
                                                       NaturalCubicSpline(t, y[2])};
    for (std::size_t f = knots.front() + 1; f < knots.back(); ++f) {
      const auto src = track.frames[f].source[j];
      if (src == KeypointSource::kTriangulated || src == KeypointSource::kSplined) continue;
      const double tf = track.frames[f].frame / frame_rate;
      out.track.frames[f].joints[j] = Vec3(splines[0](tf), splines[1](tf), splines[2](tf));
      out.track.frames[f].source[j] = KeypointSource::kSplined;
    }
  }
  return out;
}

double keypoint_loss(const HandModelData& data, const HandShape& shape, const HandPose& pose,
                     const JointArray& keypoints) {
  const JointArray joints = forward_kinematics(data, shape, pose);
  double sum = 0.0;
  for (int i = 0; i < kHandJoints; ++i) sum += (joints[i] - keypoints[i]).squaredNorm();
  return sum / kHandJoints;
}

double hand_fit_objective(const HandModelData& data, const HandShape& shape,
                          const HandPose& pose, const JointArray& keypoints, double lambda2) {
  return keypoint_loss(data, shape, pose, keypoints) +
         lambda2 * kWeightScale * pose.articulation.squaredNorm();
}

namespace {

detail::NormalEquations hand_normal_equations(const HandModelData& data, const HandShape& shape,
                                              const HandPose& pose,
                                              const JointArray& keypoints, double lambda2) {
  const HandKinematics kin = pose_hand(data, shape, pose);
  const Eigen::MatrixXd jac = forward_kinematics_jacobian(data, kin);
  Eigen::VectorXd r(3 * kHandJoints);
  for (int i = 0; i < kHandJoints; ++i) r.segment<3>(3 * i) = kin.joints[i] - keypoints[i];
  const double w = lambda2 * kWeightScale;
  detail::NormalEquations ne;
  ne.hessian = jac.transpose() * jac / kHandJoints;
  ne.gradient = jac.transpose() * r / kHandJoints;
  for (int k = 0; k < 3 * kArticulatedJoints; ++k) {
    ne.hessian(kPoseArticulation + k, kPoseArticulation + k) += w;
    ne.gradient(kPoseArticulation + k) += w * pose.articulation(k);
  }
  ne.loss = hand_fit_objective(data, shape, pose, keypoints, lambda2);
  return ne;
}

/// Rigid alignment of the model palm (wrist and finger bases) onto the
/// keypoints; returns `init` with its global rotation/translation replaced.
HandPose palm_aligned(const HandModelData& data, const HandShape& shape, const HandPose& init,
                      const JointArray& keypoints) {
  static constexpr std::array<int, 6> kPalm = {0, 1, 5, 9, 13, 17};
  const JointArray rest = data.shaped_joints(shape);
  Vec3 cs = Vec3::Zero(), ct = Vec3::Zero();
  for (int i : kPalm) {
    cs += rest[i] - rest[0];
    ct += keypoints[i];
  }
  cs /= kPalm.size();
  ct /= kPalm.size();
  Mat3 cov = Mat3::Zero();
  for (int i : kPalm) cov += (rest[i] - rest[0] - cs) * (keypoints[i] - ct).transpose();
  const Eigen::JacobiSVD<Mat3> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 d = Mat3::Identity();
  if ((svd.matrixV() * svd.matrixU().transpose()).determinant() < 0) d(2, 2) = -1.0;
  const Mat3 rot = svd.matrixV() * d * svd.matrixU().transpose();
  HandPose out = init;
  out.global_rotation = so3_log(rot);
  out.global_translation = ct - rot * cs - rest[0];
  return out;
}

}  // namespace

PoseVector hand_fit_gradient(const HandModelData& data, const HandShape& shape,
                             const HandPose& pose, const JointArray& keypoints, double lambda2) {
  return 2.0 * hand_normal_equations(data, shape, pose, keypoints, lambda2).gradient;
}

HandPose twist_free_articulation(const HandModelData& data, const HandShape& shape,
                                 const HandPose& pose) {
  const HandKinematics kin = pose_hand(data, shape, pose);
  const auto& parents = data.parents();
  std::array<int, kHandJoints> child;
  std::array<int, kHandJoints> child_count{};
  child.fill(-1);
  for (int i = 1; i < kHandJoints; ++i) {
    child[parents[i]] = i;
    ++child_count[parents[i]];
  }
  HandPose out = pose;
  std::array<Mat3, kHandJoints> rot;
  rot[0] = so3_exp(pose.global_rotation);
  for (int i = 1; i < kHandJoints; ++i) {
    const int p = parents[i];
    const int slot = data.articulation_slot(i);
    if (slot < 0) {
      rot[i] = rot[p];
      continue;
    }
    if (child_count[i] != 1) {
      rot[i] = rot[p] * so3_exp(pose.articulation.segment<3>(3 * slot));
      continue;
    }
    const int c = child[i];
    const Vec3 rest_dir = (kin.rest_joints[c] - kin.rest_joints[i]).normalized();
    const Vec3 posed_dir = (rot[p].transpose() * (kin.joints[c] - kin.joints[i])).normalized();
    const Vec3 axis = rest_dir.cross(posed_dir);
    const double s = axis.norm();
    const double angle = std::atan2(s, rest_dir.dot(posed_dir));
    const Vec3 r = s > 1e-15 ? Vec3(axis / s * angle) : Vec3::Zero();
    out.articulation.segment<3>(3 * slot) = r;
    rot[i] = rot[p] * so3_exp(r);
  }
  return out;
}

HandFitResult fit_hand_pose(const HandModelData& data, const HandShape& shape,
                            const JointArray& keypoints, const HandPose& init, double lambda2,
                            const HandFitOptions& options) {
  if (lambda2 < 0.0) throw Error(ErrorCode::kInvalidArgument, "lambda2 must be >= 0");
  HandFitResult result;
  result.pose = init;
  result.initial_loss = hand_fit_objective(data, shape, init, keypoints, lambda2);

  HandPose start = init;
  double start_loss = result.initial_loss;
  const HandPose aligned = palm_aligned(data, shape, init, keypoints);
  const double aligned_loss = hand_fit_objective(data, shape, aligned, keypoints, lambda2);
  if (aligned_loss < start_loss) {
    start = aligned;
    start_loss = aligned_loss;
  }

  auto linearize = [&](const HandPose& pose) {
    return hand_normal_equations(data, shape, pose, keypoints, lambda2);
  };
  auto loss = [&](const HandPose& pose) {
    return hand_fit_objective(data, shape, pose, keypoints, lambda2);
  };
  auto apply = [](const HandPose& pose, const Eigen::VectorXd& delta) {
    return HandPose::from_vector(pose.to_vector() + delta);
  };
  detail::LmOptions opts;
  opts.max_iterations = options.max_iterations;
  opts.step_tolerance = options.step_tolerance;
  const auto lm = detail::levenberg_marquardt(start, linearize, loss, apply, opts);
  result.pose = lm.state;
  result.final_loss = lm.final_loss;
  result.status = lm.status;

  const HandPose canonical = twist_free_articulation(data, shape, lm.state);
  const double canonical_loss = loss(canonical);
  if (canonical_loss <= result.initial_loss) {
    result.pose = canonical;
    result.final_loss = canonical_loss;
  }
  return result;
}

HandTrackResult track_hand(const std::vector<LandmarkObservation>& observations,
                           int frame_count, const CameraRig& rig, const HandModelData& data,
                           const HandShape& shape, double lambda2, double frame_rate,
                           double gate) {
  if (frame_count <= 0) throw Error(ErrorCode::kInvalidArgument, "frame count must be positive");
  std::vector<std::array<JointViews, kHandJoints>> per_frame(frame_count);
  for (const auto& obs : observations) {
    if (obs.frame < 0 || obs.frame >= frame_count) continue;
    for (int j = 0; j < kHandJoints; ++j) {
      if (obs.joints[j].valid) per_frame[obs.frame][j].emplace_back(obs.camera, obs.joints[j].pixel);
    }
  }

  HandTrackResult out;
  out.triangulated.frames.resize(frame_count);
  for (int f = 0; f < frame_count; ++f) {
    KeypointFrame& kf = out.triangulated.frames[f];
    kf.frame = f;
    kf.source.fill(KeypointSource::kMissing);
    for (int j = 0; j < kHandJoints; ++j) {
      if (per_frame[f][j].size() < 2) continue;
      try {
        kf.joints[j] = triangulate_joint_ransac(per_frame[f][j], rig, gate).point;
        kf.source[j] = KeypointSource::kTriangulated;
      } catch (const Error& err) {
        if (err.code() != ErrorCode::kJointInconsistent) throw;
      }
    }
  }

  const SplineOutcome splined =
      smooth_cubic_spline(fill_gaps_linear(out.triangulated), frame_rate);
  out.smoothed = splined.track;
  out.spline_warning = splined.warning;

  HandPose seed;
  for (int f = 0; f < frame_count; ++f) {
    JointArray keypoints;
    for (int j = 0; j < kHandJoints; ++j) keypoints[j] = *out.smoothed.frames[f].joints[j];
    HandFitResult fit = fit_hand_pose(data, shape, keypoints, seed, lambda2);
    seed = fit.pose;
    out.poses.push_back(fit.pose);
    out.fits.push_back(std::move(fit));
  }
  return out;
}

}  // namespace hoa
