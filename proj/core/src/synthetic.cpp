#include "hoa/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <nlohmann/json.hpp>

#include "hoa/error.hpp"
#include "hoa/mesh_query.hpp"
#include "hoa/sequence_store.hpp"
#include "io_util.hpp"

namespace hoa {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

Vec3 random_unit(Rng& rng) {
  Vec3 v;
  do {
    v = Vec3(rng.normal(), rng.normal(), rng.normal());
  } while (v.norm() < 1e-9);
  return v.normalized();
}

/// Gaussian sample rejected and redrawn outside [-4 sigma, 4 sigma].
double truncated_normal(Rng& rng, double sigma) {
  for (;;) {
    const double x = rng.normal();
    if (std::abs(x) <= 4.0) return sigma * x;
  }
}

RigidTransform jitter(const RigidTransform& pose, Rng& rng, double sigma_m, double sigma_deg) {
  Vec6 d;
  for (int i = 0; i < 3; ++i) d[i] = rng.normal(sigma_deg * kDeg);
  for (int i = 3; i < 6; ++i) d[i] = rng.normal(sigma_m);
  return pose.retract(d);
}

/// k distinct indices from [0, n).
std::vector<int> pick_distinct(Rng& rng, int n, int k) {
  std::vector<int> idx(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) idx[i] = i;
  k = std::min(k, n);
  for (int i = 0; i < k; ++i) {
    const int j = i + static_cast<int>(rng.below(static_cast<std::uint64_t>(n - i)));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(static_cast<std::size_t>(k));
  return idx;
}

Vec3 rest_child_direction(const HandModelData& data, int joint) {
  for (int c = joint + 1; c < kHandJoints; ++c) {
    if (data.parents()[c] == joint) {
      return (data.rest_joints()[c] - data.rest_joints()[joint]).normalized();
    }
  }
  throw Error(ErrorCode::kInvalidArgument, "joint has no child");
}

template <typename Clouds>
void add_entity_points(const std::vector<SurfaceSample>& samples, const CameraRig& rig,
                       int label, double sigma, Rng& rng, Clouds& clouds) {
  for (std::size_t c = 0; c < rig.size(); ++c) {
    const CameraModel& cam = rig[c];
    PointCloud& cloud = clouds[c];
    for (const auto& s : samples) {
      const Vec3 ray = s.point - cam.center();
      if (ray.dot(s.normal) >= 0.0) continue;  // back-facing
      const Vec3 pc = cam.world_to_camera() * s.point;
      if (pc.z() <= 0.0) continue;
      if (!cam.in_image(project(cam, s.point))) continue;
      cloud.points.push_back(s.point + truncated_normal(rng, sigma) * ray.normalized());
      cloud.labels.push_back(label);
    }
  }
}

}  // namespace

RigidTransform look_at(const Vec3& eye, const Vec3& target, const Vec3& up) {
  const Vec3 f = (target - eye).normalized();
  const Vec3 x = f.cross(up);
  if (x.norm() < 1e-9) {
    throw Error(ErrorCode::kInvalidArgument, "look_at: view direction parallel to up");
  }
  const Vec3 right = x.normalized();
  Mat3 r;
  r.col(0) = right;
  r.col(1) = f.cross(right);
  r.col(2) = f;
  return {r, eye};
}

CameraRig generate_rig(const RigSpec& spec) {
  if (spec.count < 2) throw Error(ErrorCode::kInvalidArgument, "rig needs at least two cameras");
  CameraRig rig;
  for (int k = 0; k < spec.count; ++k) {
    const double az = 2.0 * std::numbers::pi * k / spec.count;
    const Vec3 eye = spec.look_at + Vec3(spec.radius * std::cos(az), spec.radius * std::sin(az),
                                         spec.height);
    rig.emplace_back("cam" + std::to_string(k), spec.fx, spec.fy, spec.cx, spec.cy, spec.width,
                     spec.height_px, look_at(eye, spec.look_at));
  }
  return rig;
}

RigidTransform interpolate_pose(const std::vector<Keyframe<RigidTransform>>& keys, int frame) {
  if (keys.empty()) throw Error(ErrorCode::kEmptyInput, "no keyframes");
  if (frame <= keys.front().frame) return keys.front().value;
  for (std::size_t k = 1; k < keys.size(); ++k) {
    if (frame <= keys[k].frame) {
      const auto& a = keys[k - 1];
      const auto& b = keys[k];
      const double s = static_cast<double>(frame - a.frame) / (b.frame - a.frame);
      const Quat qb = hemisphere_aligned(b.value.rotation(), a.value.rotation());
      return {a.value.rotation().slerp(s, qb),
              (1.0 - s) * a.value.translation() + s * b.value.translation()};
    }
  }
  return keys.back().value;
}

HandPose interpolate_hand_pose(const std::vector<Keyframe<HandPose>>& keys, int frame) {
  if (keys.empty()) throw Error(ErrorCode::kEmptyInput, "no keyframes");
  if (frame <= keys.front().frame) return keys.front().value;
  for (std::size_t k = 1; k < keys.size(); ++k) {
    if (frame <= keys[k].frame) {
      const double s = static_cast<double>(frame - keys[k - 1].frame) /
                       (keys[k].frame - keys[k - 1].frame);
      return HandPose::from_vector((1.0 - s) * keys[k - 1].value.to_vector() +
                                   s * keys[k].value.to_vector());
    }
  }
  return keys.back().value;
}

HandPose grasp_pose(const HandModelData& data, double curl, double spread) {
  HandPose pose;
  for (int f = 0; f < 5; ++f) {
    const int first = 1 + 4 * f;
    for (int b = 0; b < 3; ++b) {
      const int joint = first + b;
      const int slot = data.articulation_slot(joint);
      const Vec3 d = rest_child_direction(data, joint);
      Vec3 r = curl * d.cross(Vec3::UnitZ()).normalized();
      if (b == 0) r += spread * (f - 2) * 0.5 * Vec3::UnitZ();
      pose.articulation.segment<3>(3 * slot) = r;
    }
  }
  return pose;
}

HandPose random_twist_free_pose(const HandModelData& data, Rng& rng, double max_angle,
                                double max_offset) {
  HandPose pose;
  for (int j = 0; j < kHandJoints; ++j) {
    const int slot = data.articulation_slot(j);
    if (slot < 0) continue;
    const Vec3 d = rest_child_direction(data, j);
    Vec3 axis = random_unit(rng);
    axis -= axis.dot(d) * d;
    if (axis.norm() < 1e-6) axis = d.unitOrthogonal();
    pose.articulation.segment<3>(3 * slot) = rng.uniform(-max_angle, max_angle) * axis.normalized();
  }
  pose.global_rotation = rng.uniform(0.0, max_angle) * random_unit(rng);
  for (int i = 0; i < 3; ++i) pose.global_translation[i] = rng.uniform(-max_offset, max_offset);
  return pose;
}

ScenarioSpec default_scenario(std::uint64_t seed, int frame_count) {
  ScenarioSpec s;
  s.seed = seed;
  s.frame_count = frame_count;
  const int last = frame_count - 1;

  ObjectScenario box;
  box.name = "box";
  box.mesh = make_box(Vec3(0.10, 0.07, 0.05));
  box.keys = {{0, RigidTransform::from_axis_angle(Vec3::Zero(), Vec3(0.0, 0.0, 0.025))},
              {last, RigidTransform::from_axis_angle(Vec3(0.15, 0.0, 0.6), Vec3(0.04, 0.03, 0.04))}};
  s.objects.push_back(box);

  ObjectScenario egg;
  egg.name = "egg";
  egg.mesh = make_icosphere(0.035, 2);
  for (Vec3& v : egg.mesh.vertices) v = v.cwiseProduct(Vec3(1.0, 0.75, 0.6));
  egg.keys = {{0, RigidTransform::from_axis_angle(Vec3::Zero(), Vec3(-0.12, 0.05, 0.021))},
              {last, RigidTransform::from_axis_angle(Vec3(0.0, 0.2, 1.0), Vec3(-0.10, -0.02, 0.03))}};
  s.objects.push_back(egg);

  const HandModelData right = make_synthetic_hand_model(Handedness::kRight);
  const HandModelData left = mirror_model(right);
  HandScenario rh;
  rh.side = Handedness::kRight;
  HandPose r0 = grasp_pose(right, 0.1, 0.1);
  r0.global_translation = Vec3(0.14, -0.17, 0.06);
  HandPose r1 = grasp_pose(right, 0.7, 0.0);
  r1.global_rotation = Vec3(0.0, 0.3, 0.25);
  r1.global_translation = Vec3(0.10, -0.14, 0.08);
  rh.keys = {{0, r0}, {last, r1}};
  s.hands.push_back(rh);

  HandScenario lh;
  lh.side = Handedness::kLeft;
  HandPose l0 = grasp_pose(left, 0.2, 0.15);
  l0.global_translation = Vec3(-0.16, -0.18, 0.07);
  HandPose l1 = grasp_pose(left, 0.5, 0.05);
  l1.global_rotation = Vec3(0.0, -0.2, -0.3);
  l1.global_translation = Vec3(-0.13, -0.16, 0.07);
  lh.keys = {{0, l0}, {last, l1}};
  s.hands.push_back(lh);

  s.shape.beta[0] = 0.3;
  s.shape.beta[6] = -0.2;

  s.noise.pose_outlier_probability = 0.1;
  s.noise.view_dropout = 0.05;
  s.noise.outlier_view = 0.05;

  s.ego.keys = {{0, look_at(Vec3(0.0, -0.45, 0.45), Vec3::Zero())},
                {last, look_at(Vec3(0.1, -0.40, 0.50), Vec3(0.02, 0.02, 0.0))}};
  return s;
}

SyntheticSequence generate_sequence(const CameraRig& rig, const ScenarioSpec& scenario,
                                    const HandModelData& right_hand_model) {
  if (scenario.frame_count <= 0) {
    throw Error(ErrorCode::kInvalidArgument, "frame_count must be positive");
  }
  if (rig.empty()) throw Error(ErrorCode::kInvalidArgument, "empty rig");
  if (right_hand_model.handedness() != Handedness::kRight) {
    throw Error(ErrorCode::kInvalidArgument, "generate_sequence expects the right-hand model");
  }
  scenario.shape.validate();
  const NoiseSpec& noise = scenario.noise;
  const HandModelData left_model = mirror_model(right_hand_model);
  auto model_for = [&](Handedness side) -> const HandModelData& {
    return side == Handedness::kRight ? right_hand_model : left_model;
  };

  Rng rng(scenario.seed);
  SyntheticSequence seq;
  seq.rig = rig;
  seq.frame_count = scenario.frame_count;
  seq.frame_rate = scenario.frame_rate;
  seq.seed = scenario.seed;
  seq.shape = scenario.shape;
  const int nf = scenario.frame_count;
  const int nc = static_cast<int>(rig.size());

  for (const auto& os : scenario.objects) {
    SyntheticObject obj;
    obj.name = os.name;
    obj.mesh = os.mesh;
    for (int f = 0; f < nf; ++f) obj.gt.push_back(interpolate_pose(os.keys, f));
    seq.objects.push_back(std::move(obj));
  }
  for (const auto& hs : scenario.hands) {
    SyntheticHand hand;
    hand.side = hs.side;
    for (int f = 0; f < nf; ++f) {
      hand.gt.push_back(interpolate_hand_pose(hs.keys, f));
      hand.gt_joints.push_back(forward_kinematics(model_for(hs.side), scenario.shape, hand.gt.back()));
    }
    seq.hands.push_back(std::move(hand));
  }

  // Per-camera object poses.
  const auto blackout = [&](int f) {
    return std::find(noise.pose_blackout_frames.begin(), noise.pose_blackout_frames.end(), f) !=
           noise.pose_blackout_frames.end();
  };
  for (auto& obj : seq.objects) {
    for (const auto& cam : rig) obj.camera_poses[cam.name()].resize(static_cast<std::size_t>(nf));
    for (int f = 0; f < nf; ++f) {
      std::vector<bool> outlier(static_cast<std::size_t>(nc), false);
      for (int c : pick_distinct(rng, nc, noise.pose_outliers_per_frame)) outlier[c] = true;
      for (int c = 0; c < nc; ++c) {
        const CameraModel& cam = rig[c];
        const bool dropped = rng.bernoulli(noise.pose_dropout);
        if (rng.bernoulli(noise.pose_outlier_probability)) outlier[c] = true;
        RigidTransform world = jitter(obj.gt[f], rng, noise.pose_sigma_m, noise.pose_sigma_deg);
        if (outlier[c]) {
          const Vec3 offset = rng.uniform(noise.pose_outlier_m, noise.pose_outlier_m + 0.2) *
                              random_unit(rng);
          const Vec3 spin = rng.uniform(20.0, 90.0) * kDeg * random_unit(rng);
          world = RigidTransform(so3_exp(spin) * obj.gt[f].rotation_matrix(),
                                 obj.gt[f].translation() + offset);
        }
        if (dropped || blackout(f)) continue;
        obj.camera_poses[cam.name()][f] = cam.world_to_camera() * world;
      }
    }
  }

  // Landmarks.
  for (auto& hand : seq.hands) {
    for (int f = 0; f < nf; ++f) {
      const bool frame_dropped = rng.bernoulli(noise.frame_dropout);
      std::vector<bool> view_dropped(static_cast<std::size_t>(nc));
      std::vector<int> visible;
      for (int c = 0; c < nc; ++c) {
        view_dropped[c] = frame_dropped || rng.bernoulli(noise.view_dropout);
        if (!view_dropped[c]) visible.push_back(c);
      }
      std::vector<std::vector<bool>> corrupt(static_cast<std::size_t>(nc),
                                             std::vector<bool>(kHandJoints, false));
      for (int j = 0; j < kHandJoints; ++j) {
        const int nv = static_cast<int>(visible.size());
        for (int k : pick_distinct(rng, nv, noise.landmark_outliers_per_joint)) {
          corrupt[visible[k]][j] = true;
        }
      }
      for (int c = 0; c < nc; ++c) {
        const CameraModel& cam = rig[c];
        LandmarkObservation clean{f, cam.name(), {}};
        LandmarkObservation noisy{f, cam.name(), {}};
        for (int j = 0; j < kHandJoints; ++j) {
          const Vec3& x = hand.gt_joints[f][j];
          if ((cam.world_to_camera() * x).z() <= 0.0) continue;
          const Vec2 px = project(cam, x);
          clean.joints[j] = {px, cam.in_image(px)};
          Vec2 obs = px + Vec2(rng.normal(noise.pixel_sigma), rng.normal(noise.pixel_sigma));
          if (corrupt[c][j] || rng.bernoulli(noise.outlier_view)) {
            const double phi = rng.uniform(0.0, 2.0 * std::numbers::pi);
            obs += noise.landmark_outlier_px * Vec2(std::cos(phi), std::sin(phi));
          }
          noisy.joints[j] = {obs, !view_dropped[c] && cam.in_image(obs)};
        }
        hand.clean_landmarks.push_back(clean);
        hand.landmarks.push_back(noisy);
      }
    }
  }

  // Clouds.
  seq.clouds.assign(static_cast<std::size_t>(nf), std::vector<PointCloud>(rig.size()));
  const auto n_samples = static_cast<std::size_t>(scenario.surface_samples);
  for (int f = 0; f < nf; ++f) {
    for (std::size_t o = 0; o < seq.objects.size(); ++o) {
      const TriangleMesh posed = seq.objects[o].mesh.transformed(seq.objects[o].gt[f]);
      const auto samples = sample_surface(posed, n_samples, rng);
      add_entity_points(samples, rig, static_cast<int>(o), noise.point_sigma, rng, seq.clouds[f]);
    }
    for (const auto& hand : seq.hands) {
      const TriangleMesh posed = skin_mesh(model_for(hand.side), scenario.shape, hand.gt[f]);
      const MeshIndex index(posed);
      std::vector<SurfaceSample> kept;
      for (const auto& s : sample_surface(posed, n_samples, rng)) {
        // Samples buried inside a neighboring capsule are not visible skin.
        if (index.winding_number(s.point + 1e-4 * s.normal) > 0.5) continue;
        kept.push_back(s);
      }
      add_entity_points(kept, rig, hand_label(hand.side), noise.point_sigma, rng, seq.clouds[f]);
    }
  }

  if (scenario.ego.enabled && !scenario.ego.keys.empty() && !seq.objects.empty()) {
    for (int f = 0; f < nf; ++f) {
      const RigidTransform device = interpolate_pose(scenario.ego.keys, f);
      seq.ego_gt.push_back(device);
      seq.ego_device.push_back(jitter(device, rng, noise.device_jitter_m, noise.device_jitter_deg));
      seq.ego_object_refined.push_back(device.inverse() * seq.objects[0].gt[f]);
    }
  }
  return seq;
}

void write_sequence(const SyntheticSequence& seq, const HandModelData& right_hand_model,
                    const std::filesystem::path& root) {
  namespace fs = std::filesystem;
  const SequenceStore store(root);
  for (const char* dir : {"meshes", "clouds", "hands", "ground_truth"}) {
    fs::create_directories(root / dir);
  }

  SequenceInfo info;
  info.frame_count = seq.frame_count;
  info.frame_rate = seq.frame_rate;
  for (const auto& o : seq.objects) info.objects.push_back(o.name);
  for (const auto& h : seq.hands) info.hands.push_back(h.side);
  info.has_ego = !seq.ego_gt.empty();
  detail::write_file_atomic(store.info_path(), sequence_info_to_json(info));
  detail::write_file_atomic(store.cameras_path(), camera_rig_to_json(seq.rig));

  const fs::path gt = store.ground_truth_dir();
  for (const auto& obj : seq.objects) {
    save_ply_mesh(store.mesh_path(obj.name), obj.mesh);
    for (const auto& [camera, poses] : obj.camera_poses) {
      std::vector<CameraPoseRow> rows;
      for (int f = 0; f < seq.frame_count; ++f) rows.push_back({f, poses[f]});
      detail::write_file_atomic(store.camera_pose_path(camera, obj.name), camera_poses_to_csv(rows));
    }
    PoseTrack track;
    for (int f = 0; f < seq.frame_count; ++f) track.push(f, obj.gt[f], TrackStatus::kFused);
    detail::write_file_atomic(gt / ("poses_world_" + obj.name + ".csv"), pose_track_to_csv(track));
  }

  save_hand_model(store.hand_model_path(Handedness::kRight), right_hand_model);
  save_hand_model(store.hand_model_path(Handedness::kLeft), mirror_model(right_hand_model));
  detail::write_file_atomic(store.hand_shape_path(), hand_shape_to_json(seq.shape));
  for (const auto& hand : seq.hands) {
    const std::string side(handedness_name(hand.side));
    for (const auto& cam : seq.rig) {
      std::vector<LandmarkObservation> mine;
      for (const auto& obs : hand.landmarks) {
        if (obs.camera == cam.name()) mine.push_back(obs);
      }
      detail::write_file_atomic(store.landmarks_path(cam.name(), hand.side), landmarks_to_csv(mine));
    }
    detail::write_file_atomic(gt / ("hand_" + side + ".csv"), hand_poses_to_csv(hand.gt));
    Keypoint3DTrack joints;
    for (int f = 0; f < seq.frame_count; ++f) {
      KeypointFrame kf;
      kf.frame = f;
      for (int j = 0; j < kHandJoints; ++j) {
        kf.joints[j] = hand.gt_joints[f][j];
        kf.source[j] = KeypointSource::kTriangulated;
      }
      joints.frames.push_back(kf);
    }
    detail::write_file_atomic(gt / ("keypoints_" + side + ".csv"), keypoints_to_csv(joints));
  }

  for (int f = 0; f < seq.frame_count; ++f) {
    for (std::size_t c = 0; c < seq.rig.size(); ++c) {
      save_ply_cloud(store.cloud_path(f, seq.rig[c].name()), seq.clouds[f][c]);
    }
  }

  if (!seq.ego_gt.empty()) {
    std::vector<CameraPoseRow> device, observed;
    PoseTrack truth;
    for (int f = 0; f < seq.frame_count; ++f) {
      device.push_back({f, seq.ego_device[f]});
      observed.push_back({f, seq.ego_object_refined[f]});
      truth.push(f, seq.ego_gt[f], TrackStatus::kFused);
    }
    detail::write_file_atomic(store.ego_device_path(), camera_poses_to_csv(device));
    detail::write_file_atomic(store.ego_observation_path(), camera_poses_to_csv(observed));
    detail::write_file_atomic(gt / "ego_camera.csv", pose_track_to_csv(truth));
  }

  nlohmann::ordered_json manifest;
  manifest["generator"] = "hoa synthetic";
  manifest["rng"] = Rng::kAlgorithm;
  manifest["seed"] = seq.seed;
  manifest["frame_count"] = seq.frame_count;
  manifest["cameras"] = seq.rig.size();
  detail::write_file_atomic(root / "manifest.json", manifest.dump(2) + "\n");
}

}  // namespace hoa
