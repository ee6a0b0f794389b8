#include "hoa/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <map>
#include <mutex>
#include <ostream>
#include <set>
#include <thread>

#include <nlohmann/json.hpp>

#include "hoa/ego_refiner.hpp"
#include "hoa/error.hpp"
#include "hoa/random.hpp"
#include "hoa/report.hpp"
#include "hoa/sequence_store.hpp"
#include "io_util.hpp"

namespace hoa {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

std::string_view stage_name(Stage stage) {
  switch (stage) {
    case Stage::kFuse: return "fuse";
    case Stage::kRefineObject: return "refine-object";
    case Stage::kHand: return "hand";
    case Stage::kJoint: return "joint";
    case Stage::kEgo: return "ego";
    case Stage::kEval: return "eval";
  }
  return "fuse";
}

Stage parse_stage(std::string_view name) {
  for (Stage s : kAllStages) {
    if (stage_name(s) == name) return s;
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown stage '" + std::string(name) + "'");
}

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t hash) {
  for (unsigned char c : bytes) {
    hash ^= c;
    hash *= 0x100000001b3ull;
  }
  return hash;
}

void PipelineConfig::validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw Error(ErrorCode::kInvalidArgument, what);
  };
  require(lambda1 >= 0.0 && lambda2 >= 0.0 && lambda3 >= 0.0, "lambda values must be >= 0");
  require(jobs >= 1, "jobs must be >= 1");
  require(landmark_gate > 0.0, "landmark_gate_px must be positive");
  require(hand_segmentation > 0.0, "hand_segmentation_m must be positive");
  require(voxel_size > 0.0 && sdf_padding >= 0.0, "bad SDF voxel size or padding");
  require(refine.max_iterations > 0, "refine.max_iterations must be positive");
  require(joint_sweeps > 0 && joint_hand_iterations > 0, "joint iteration counts must be positive");
  require(joint_max_hand_points > 0, "joint.max_hand_points must be positive");
  require(auc_threshold > 0.0, "eval.auc_threshold_m must be positive");
  fusion.validate();
  if (sequence.empty()) throw Error(ErrorCode::kInvalidArgument, "no sequence directory given");
  if (!fs::is_directory(sequence)) throw Error(ErrorCode::kMissingInput, sequence.string());
}

namespace {

Json gate_json(const PoseGate& g) {
  Json j;
  j["distance_m"] = g.distance_m;
  j["angle_deg"] = g.angle_deg;
  return j;
}

PoseGate gate_from(const Json& j) {
  return {j.at("distance_m").get<double>(), j.at("angle_deg").get<double>()};
}

Json config_json(const PipelineConfig& c) {
  Json doc;
  doc["sequence"] = c.sequence.string();
  Json stages = Json::array();
  for (Stage s : c.stages) stages.push_back(std::string(stage_name(s)));
  doc["stages"] = stages;
  doc["seed"] = c.seed;
  doc["jobs"] = c.jobs;
  doc["lambda1"] = c.lambda1;
  doc["lambda2"] = c.lambda2;
  doc["lambda3"] = c.lambda3;
  Json fusion;
  fusion["spread"] = gate_json(c.fusion.pairwise_spread_max);
  fusion["prev_gate"] = gate_json(c.fusion.prev_pose_gate);
  fusion["inlier_tol"] = gate_json(c.fusion.ransac_inlier_tol);
  fusion["ransac_iters"] = c.fusion.ransac_iters;
  doc["fusion"] = fusion;
  doc["landmark_gate_px"] = c.landmark_gate;
  doc["hand_segmentation_m"] = c.hand_segmentation;
  Json sdf;
  sdf["voxel_size_m"] = c.voxel_size;
  sdf["padding_m"] = c.sdf_padding;
  doc["sdf"] = sdf;
  Json refine;
  refine["max_iterations"] = c.refine.max_iterations;
  refine["step_tolerance"] = c.refine.step_tolerance;
  refine["min_points"] = c.refine.min_points;
  doc["refine"] = refine;
  Json joint;
  joint["sweeps"] = c.joint_sweeps;
  joint["hand_iterations"] = c.joint_hand_iterations;
  joint["max_translation_m"] = c.joint_max_translation;
  joint["max_rotation_deg"] = c.joint_max_rotation_deg;
  joint["max_hand_points"] = c.joint_max_hand_points;
  doc["joint"] = joint;
  Json eval;
  eval["auc_threshold_m"] = c.auc_threshold;
  doc["eval"] = eval;
  return doc;
}

void merge_known(Json& base, const Json& user, const std::string& prefix) {
  if (!user.is_object()) throw Error(ErrorCode::kInvalidArgument, "config must be a JSON object");
  for (auto it = user.begin(); it != user.end(); ++it) {
    const std::string key = prefix + it.key();
    if (!base.contains(it.key())) throw Error(ErrorCode::kInvalidArgument, "unknown config key '" + key + "'");
    Json& slot = base[it.key()];
    if (slot.is_object() && it.value().is_object()) {
      merge_known(slot, it.value(), key + ".");
    } else {
      slot = it.value();
    }
  }
}

void apply_override(Json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw Error(ErrorCode::kInvalidArgument, "override '" + assignment + "' is not key=value");
  }
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  Json* slot = &doc;
  for (const auto& part : detail::split(key, '.')) {
    if (!slot->is_object() || !slot->contains(part)) {
      throw Error(ErrorCode::kInvalidArgument, "unknown config key '" + key + "'");
    }
    slot = &(*slot)[part];
  }
  Json value;
  try {
    value = Json::parse(text);
  } catch (const nlohmann::json::exception&) {
    value = text;
  }
  *slot = value;
}

PipelineConfig decode(const Json& doc) {
  PipelineConfig c;
  c.sequence = doc.at("sequence").get<std::string>();
  for (const auto& s : doc.at("stages")) c.stages.push_back(parse_stage(s.get<std::string>()));
  c.seed = doc.at("seed").get<std::uint64_t>();
  c.jobs = doc.at("jobs").get<int>();
  c.lambda1 = doc.at("lambda1").get<double>();
  c.lambda2 = doc.at("lambda2").get<double>();
  c.lambda3 = doc.at("lambda3").get<double>();
  const Json& fusion = doc.at("fusion");
  c.fusion.pairwise_spread_max = gate_from(fusion.at("spread"));
  c.fusion.prev_pose_gate = gate_from(fusion.at("prev_gate"));
  c.fusion.ransac_inlier_tol = gate_from(fusion.at("inlier_tol"));
  c.fusion.ransac_iters = fusion.at("ransac_iters").get<int>();
  c.landmark_gate = doc.at("landmark_gate_px").get<double>();
  c.hand_segmentation = doc.at("hand_segmentation_m").get<double>();
  c.voxel_size = doc.at("sdf").at("voxel_size_m").get<double>();
  c.sdf_padding = doc.at("sdf").at("padding_m").get<double>();
  c.refine.max_iterations = doc.at("refine").at("max_iterations").get<int>();
  c.refine.step_tolerance = doc.at("refine").at("step_tolerance").get<double>();
  c.refine.min_points = doc.at("refine").at("min_points").get<std::size_t>();
  const Json& joint = doc.at("joint");
  c.joint_sweeps = joint.at("sweeps").get<int>();
  c.joint_hand_iterations = joint.at("hand_iterations").get<int>();
  c.joint_max_translation = joint.at("max_translation_m").get<double>();
  c.joint_max_rotation_deg = joint.at("max_rotation_deg").get<double>();
  c.joint_max_hand_points = joint.at("max_hand_points").get<int>();
  c.auc_threshold = doc.at("eval").at("auc_threshold_m").get<double>();
  return c;
}

}  // namespace

std::string pipeline_config_to_json(const PipelineConfig& config) {
  return config_json(config).dump(2) + "\n";
}

PipelineConfig parse_pipeline_config(std::string_view json_text,
                                     const std::vector<std::string>& overrides) {
  try {
    Json doc = config_json(PipelineConfig{});
    if (!detail::trim(json_text).empty()) merge_known(doc, Json::parse(json_text), "");
    for (const auto& o : overrides) apply_override(doc, o);
    return decode(doc);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kInvalidArgument, std::string("config: ") + e.what());
  }
}

namespace {

/// Runs fn(0..n-1) on up to `jobs` threads; the lowest-index exception wins.
template <typename Fn>
void parallel_for(int n, int jobs, Fn fn) {
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n));
  const int workers = std::max(1, std::min(jobs, n));
  if (workers == 1) {
    for (int i = 0; i < n; ++i) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  } else {
    std::mutex m;
    int next = 0;
    std::vector<std::thread> threads;
    for (int w = 0; w < workers; ++w) {
      threads.emplace_back([&] {
        for (;;) {
          int i;
          {
            std::lock_guard lock(m);
            if (next >= n) return;
            i = next++;
          }
          try {
            fn(i);
          } catch (...) {
            errors[i] = std::current_exception();
          }
        }
      });
    }
    for (auto& t : threads) t.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  return seed ^ (0x9e3779b97f4a7c15ull * (stream + 1));
}

using Outputs = std::map<std::string, std::string>;  // path relative to output/ -> contents

/// Shared read-only state of one pipeline run.
class Context {
 public:
  Context(const PipelineConfig& config, std::ostream& log)
      : config_(config), store_(config.sequence), log_(log) {}

  const PipelineConfig& config() const { return config_; }
  const SequenceStore& store() const { return store_; }
  std::ostream& log() { return log_; }

  const SequenceInfo& info() {
    if (!info_) info_ = store_.info();
    return *info_;
  }
  const CameraRig& rig() {
    if (!rig_) rig_ = store_.rig();
    return *rig_;
  }
  int frames() { return info().frame_count; }

  fs::path out(const std::string& name) const { return store_.output_dir() / name; }

  /// Merged world-frame cloud of every camera per frame.
  const std::vector<PointCloud>& clouds() {
    if (clouds_.empty()) {
      clouds_.resize(static_cast<std::size_t>(frames()));
      parallel_for(frames(), config_.jobs, [&](int f) {
        PointCloud merged;
        for (const auto& cam : rig()) {
          const PointCloud c = store_.cloud(f, cam.name());
          merged.points.insert(merged.points.end(), c.points.begin(), c.points.end());
          if (c.labels.empty()) {
            merged.labels.insert(merged.labels.end(), c.points.size(), -1);
          } else {
            merged.labels.insert(merged.labels.end(), c.labels.begin(), c.labels.end());
          }
        }
        clouds_[f] = std::move(merged);
      });
    }
    return clouds_;
  }

  /// Points of object `index`; an unlabeled cloud belongs to a lone object.
  std::vector<Vec3> object_points(int frame, int index) {
    const PointCloud& c = clouds()[frame];
    std::vector<Vec3> out;
    const bool lone = info().objects.size() == 1;
    for (std::size_t i = 0; i < c.points.size(); ++i) {
      if (c.labels[i] == index || (lone && c.labels[i] == -1)) out.push_back(c.points[i]);
    }
    return out;
  }

  /// Points not labeled as any object.
  std::vector<Vec3> non_object_points(int frame) {
    const PointCloud& c = clouds()[frame];
    const int n_obj = static_cast<int>(info().objects.size());
    std::vector<Vec3> out;
    for (std::size_t i = 0; i < c.points.size(); ++i) {
      const int l = c.labels[i];
      if (l < 0 ? n_obj != 1 : l >= n_obj) out.push_back(c.points[i]);
    }
    return out;
  }

  const VoxelSdf& sdf(int index) {
    std::lock_guard lock(sdf_mutex_);
    auto it = sdfs_.find(index);
    if (it == sdfs_.end()) {
      const TriangleMesh mesh = store_.mesh(info().objects[index]);
      it = sdfs_.emplace(index, build_sdf_from_mesh(mesh, config_.voxel_size, config_.sdf_padding)).first;
    }
    return it->second;
  }

  const HandModelData& hand_model(Handedness side) {
    std::lock_guard lock(sdf_mutex_);
    auto it = hands_.find(side);
    if (it == hands_.end()) {
      const fs::path p = store_.hand_model_path(side);
      require_file(p);
      it = hands_.emplace(side, load_hand_model(p)).first;
    }
    return it->second;
  }

  HandShape shape() {
    const fs::path p = store_.hand_shape_path();
    return fs::exists(p) ? parse_hand_shape(detail::read_file(p)) : HandShape{};
  }

 private:
  const PipelineConfig& config_;
  SequenceStore store_;
  std::ostream& log_;
  std::optional<SequenceInfo> info_;
  std::optional<CameraRig> rig_;
  std::vector<PointCloud> clouds_;
  std::mutex sdf_mutex_;
  std::map<int, VoxelSdf> sdfs_;
  std::map<Handedness, HandModelData> hands_;
};

std::string side_name(Handedness side) { return std::string(handedness_name(side)); }

PoseTrack read_track(const fs::path& path, int frames) {
  require_file(path);
  PoseTrack t = parse_pose_track(detail::read_file(path));
  if (static_cast<int>(t.size()) != frames) {
    throw Error(ErrorCode::kFormat, path.string() + ": expected " + std::to_string(frames) + " frames");
  }
  return t;
}

std::vector<HandPose> read_hand_poses(const fs::path& path, int frames) {
  require_file(path);
  auto poses = parse_hand_poses(detail::read_file(path));
  if (static_cast<int>(poses.size()) != frames) {
    throw Error(ErrorCode::kFormat, path.string() + ": expected " + std::to_string(frames) + " frames");
  }
  return poses;
}

std::vector<fs::path> stage_inputs(Stage stage, Context& ctx) {
  const SequenceStore& st = ctx.store();
  const SequenceInfo& info = ctx.info();
  std::vector<fs::path> in{st.info_path(), st.cameras_path()};
  auto add_meshes = [&] {
    for (const auto& o : info.objects) in.push_back(st.mesh_path(o));
  };
  auto add_clouds = [&] {
    for (int f = 0; f < info.frame_count; ++f) {
      for (const auto& cam : ctx.rig()) in.push_back(st.cloud_path(f, cam.name()));
    }
  };
  auto add_hands = [&] {
    for (Handedness h : info.hands) in.push_back(st.hand_model_path(h));
    if (fs::exists(st.hand_shape_path())) in.push_back(st.hand_shape_path());
  };
  switch (stage) {
    case Stage::kFuse:
      for (const auto& o : info.objects) {
        for (const auto& cam : ctx.rig()) in.push_back(st.camera_pose_path(cam.name(), o));
      }
      break;
    case Stage::kRefineObject:
      add_meshes();
      add_clouds();
      for (const auto& o : info.objects) in.push_back(ctx.out("fused_" + o + ".csv"));
      break;
    case Stage::kHand:
      add_hands();
      for (Handedness h : info.hands) {
        for (const auto& cam : ctx.rig()) in.push_back(st.landmarks_path(cam.name(), h));
      }
      break;
    case Stage::kJoint:
      add_meshes();
      add_clouds();
      add_hands();
      for (const auto& o : info.objects) in.push_back(ctx.out("refined_" + o + ".csv"));
      for (Handedness h : info.hands) in.push_back(ctx.out("hand_" + side_name(h) + ".csv"));
      break;
    case Stage::kEgo: {
      if (info.objects.empty()) throw Error(ErrorCode::kNoObjects, "ego needs an anchor object");
      in.push_back(st.ego_device_path());
      in.push_back(st.ego_observation_path());
      const fs::path joint = ctx.out("joint_" + info.objects[0] + ".csv");
      in.push_back(fs::exists(joint) ? joint : ctx.out("refined_" + info.objects[0] + ".csv"));
      break;
    }
    case Stage::kEval: {
      add_meshes();
      add_hands();
      const fs::path gt = st.ground_truth_dir();
      for (const auto& o : info.objects) {
        in.push_back(gt / ("poses_world_" + o + ".csv"));
        for (const char* prefix : {"fused_", "refined_", "joint_"}) {
          const fs::path p = ctx.out(prefix + o + ".csv");
          if (fs::exists(p)) in.push_back(p);
        }
      }
      for (Handedness h : info.hands) {
        in.push_back(gt / ("keypoints_" + side_name(h) + ".csv"));
        for (const char* prefix : {"keypoints_", "hand_", "joint_hand_"}) {
          const fs::path p = ctx.out(prefix + side_name(h) + ".csv");
          if (fs::exists(p)) in.push_back(p);
        }
      }
      if (fs::exists(ctx.out("ego_camera.csv"))) {
        in.push_back(ctx.out("ego_camera.csv"));
        in.push_back(st.ego_device_path());
        in.push_back(gt / "ego_camera.csv");
      }
      break;
    }
  }
  for (const auto& p : in) {
    if (!fs::exists(p)) {
      throw Error(ErrorCode::kMissingInput, std::string(stage_name(stage)) + ": " + p.string());
    }
  }
  return in;
}

std::string stamp_hash(Stage stage, const std::vector<fs::path>& inputs, const PipelineConfig& config,
                       const fs::path& root) {
  Json doc = config_json(config);
  doc.erase("sequence");
  doc.erase("stages");
  doc.erase("jobs");
  std::uint64_t h = fnv1a64(stage_name(stage));
  h = fnv1a64(doc.dump(), h);
  for (const auto& p : inputs) {
    h = fnv1a64(fs::relative(p, root).generic_string(), h);
    h = fnv1a64(detail::read_file(p), h);
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// ---- stages ---------------------------------------------------------------

void run_fuse(Context& ctx, Outputs& out) {
  const auto& info = ctx.info();
  const int nf = ctx.frames();
  std::vector<std::string> csv(info.objects.size());
  parallel_for(static_cast<int>(info.objects.size()), ctx.config().jobs, [&](int o) {
    std::vector<MultiViewPoseSet> frames(static_cast<std::size_t>(nf));
    for (int f = 0; f < nf; ++f) frames[f].frame = f;
    for (const auto& cam : ctx.rig()) {
      const auto path = ctx.store().camera_pose_path(cam.name(), info.objects[o]);
      for (const auto& row : parse_camera_poses(detail::read_file(path))) {
        if (row.frame < 0 || row.frame >= nf) {
          throw Error(ErrorCode::kFormat, path.string() + ": frame out of range");
        }
        if (row.pose) frames[row.frame].views.emplace_back(cam.name(), *row.pose);
      }
    }
    Rng rng(mix_seed(ctx.config().seed, static_cast<std::uint64_t>(o)));
    csv[o] = pose_track_to_csv(fuse_track(frames, ctx.rig(), ctx.config().fusion, rng));
  });
  for (std::size_t o = 0; o < csv.size(); ++o) out["fused_" + info.objects[o] + ".csv"] = csv[o];
}

void run_refine_object(Context& ctx, Outputs& out) {
  const auto& info = ctx.info();
  const int nf = ctx.frames();
  ctx.clouds();
  std::vector<std::pair<std::string, std::string>> files(info.objects.size());
  parallel_for(static_cast<int>(info.objects.size()), ctx.config().jobs, [&](int o) {
    const PoseTrack fused = read_track(ctx.out("fused_" + info.objects[o] + ".csv"), nf);
    std::vector<std::vector<Vec3>> clouds;
    for (int f = 0; f < nf; ++f) clouds.push_back(ctx.object_points(f, o));
    const RefinedTrack refined =
        refine_track(ctx.sdf(o), fused, clouds, ctx.config().lambda1, ctx.config().refine);
    std::string diag = "frame,status,initial_loss,final_loss,iterations\n";
    for (int f = 0; f < nf; ++f) {
      const RefineResult& r = refined.diagnostics[f];
      diag += std::to_string(f) + "," + std::string(solver_status_name(r.status)) + "," +
              detail::format_double(r.initial_loss) + "," + detail::format_double(r.final_loss) +
              "," + std::to_string(r.iterations) + "\n";
    }
    files[o] = {pose_track_to_csv(refined.track), diag};
  });
  for (std::size_t o = 0; o < files.size(); ++o) {
    out["refined_" + info.objects[o] + ".csv"] = files[o].first;
    out["refine_diagnostics_" + info.objects[o] + ".csv"] = files[o].second;
  }
}

void run_hand(Context& ctx, Outputs& out) {
  const auto& info = ctx.info();
  const HandShape shape = ctx.shape();
  struct Result {
    std::string keypoints, poses;
    bool warning = false;
  };
  std::vector<Result> results(info.hands.size());
  for (Handedness h : info.hands) ctx.hand_model(h);
  parallel_for(static_cast<int>(info.hands.size()), ctx.config().jobs, [&](int i) {
    const Handedness side = info.hands[i];
    std::vector<LandmarkObservation> obs;
    for (const auto& cam : ctx.rig()) {
      auto part = parse_landmarks(
          detail::read_file(ctx.store().landmarks_path(cam.name(), side)), cam.name());
      obs.insert(obs.end(), part.begin(), part.end());
    }
    const HandTrackResult r = track_hand(obs, ctx.frames(), ctx.rig(), ctx.hand_model(side), shape,
                                         ctx.config().lambda2, info.frame_rate,
                                         ctx.config().landmark_gate);
    results[i] = {keypoints_to_csv(r.smoothed), hand_poses_to_csv(r.poses), r.spline_warning};
  });
  for (std::size_t i = 0; i < results.size(); ++i) {
    const std::string side = side_name(info.hands[i]);
    if (results[i].warning) {
      ctx.log() << "[hand] warning: " << side << " hand has joints with fewer than four knots\n";
    }
    out["keypoints_" + side + ".csv"] = results[i].keypoints;
    out["hand_" + side + ".csv"] = results[i].poses;
  }
}

void run_joint(Context& ctx, Outputs& out) {
  const auto& info = ctx.info();
  const auto& cfg = ctx.config();
  const int nf = ctx.frames();
  const int n_obj = static_cast<int>(info.objects.size());
  std::vector<PoseTrack> objects_in;
  for (const auto& o : info.objects) objects_in.push_back(read_track(ctx.out("refined_" + o + ".csv"), nf));
  std::vector<std::vector<HandPose>> hands_in;
  for (Handedness h : info.hands) hands_in.push_back(read_hand_poses(ctx.out("hand_" + side_name(h) + ".csv"), nf));
  for (int o = 0; o < n_obj; ++o) ctx.sdf(o);
  for (Handedness h : info.hands) ctx.hand_model(h);
  const HandShape shape = ctx.shape();
  ctx.clouds();

  JointRefineOptions opts;
  opts.lambda1 = cfg.lambda1;
  opts.lambda3 = cfg.lambda3;
  opts.sweeps = cfg.joint_sweeps;
  opts.hand_iterations = cfg.joint_hand_iterations;
  opts.max_translation = cfg.joint_max_translation;
  opts.max_rotation_deg = cfg.joint_max_rotation_deg;
  opts.object = cfg.refine;

  std::vector<PoseTrack> objects_out(static_cast<std::size_t>(n_obj));
  std::vector<std::vector<HandPose>> hands_out(info.hands.size());
  std::string diag = "frame,loss_before,loss_after,penetration_before,penetration_after\n";
  for (int f = 0; f < nf; ++f) {
    SceneFrame scene;
    scene.frame = f;
    for (int o = 0; o < n_obj; ++o) {
      SceneObject so;
      so.name = info.objects[o];
      so.sdf = &ctx.sdf(o);
      so.pose = objects_in[o][f].pose;
      so.cloud = ctx.object_points(f, o);
      if (f > 0) so.prev = objects_out[o].back().pose;
      scene.objects.push_back(std::move(so));
    }
    const std::vector<Vec3> free_points = ctx.non_object_points(f);
    for (std::size_t i = 0; i < info.hands.size(); ++i) {
      SceneHand sh;
      sh.side = info.hands[i];
      sh.data = &ctx.hand_model(sh.side);
      sh.shape = shape;
      sh.pose = hands_in[i][f];
      auto seg = segment_hand_points(free_points, *sh.data, shape, sh.pose, cfg.hand_segmentation);
      const std::size_t stride =
          (seg.points.size() + cfg.joint_max_hand_points - 1) / cfg.joint_max_hand_points;
      for (std::size_t k = 0; k < seg.points.size(); k += std::max<std::size_t>(stride, 1)) {
        sh.cloud.push_back(seg.points[k]);
      }
      if (f > 0) sh.prev = hands_out[i].back();
      scene.hands.push_back(std::move(sh));
    }
    const JointRefineResult r = refine_joint(scene, opts);
    for (int o = 0; o < n_obj; ++o) {
      objects_out[o].push(f, r.object_poses[o], objects_in[o][f].status);
    }
    for (std::size_t i = 0; i < info.hands.size(); ++i) hands_out[i].push_back(r.hand_poses[i]);
    diag += std::to_string(f) + "," + detail::format_double(r.loss_before) + "," +
            detail::format_double(r.loss_after) + "," + detail::format_double(r.penetration_before) +
            "," + detail::format_double(r.penetration_after) + "\n";
  }
  for (int o = 0; o < n_obj; ++o) out["joint_" + info.objects[o] + ".csv"] = pose_track_to_csv(objects_out[o]);
  for (std::size_t i = 0; i < info.hands.size(); ++i) {
    out["joint_hand_" + side_name(info.hands[i]) + ".csv"] = hand_poses_to_csv(hands_out[i]);
  }
  out["joint_diagnostics.csv"] = diag;
}

std::vector<RigidTransform> rows_to_poses(const fs::path& path, int frames) {
  const auto rows = parse_camera_poses(detail::read_file(path));
  if (static_cast<int>(rows.size()) != frames) {
    throw Error(ErrorCode::kFormat, path.string() + ": expected " + std::to_string(frames) + " frames");
  }
  std::vector<RigidTransform> poses;
  for (const auto& r : rows) {
    if (!r.pose) throw Error(ErrorCode::kFormat, path.string() + ": missing pose for a frame");
    poses.push_back(*r.pose);
  }
  return poses;
}

void run_ego(Context& ctx, Outputs& out) {
  const auto& info = ctx.info();
  const int nf = ctx.frames();
  const fs::path joint = ctx.out("joint_" + info.objects[0] + ".csv");
  const PoseTrack anchor =
      read_track(fs::exists(joint) ? joint : ctx.out("refined_" + info.objects[0] + ".csv"), nf);
  const auto observed = rows_to_poses(ctx.store().ego_observation_path(), nf);
  PoseTrack camera;
  for (int f = 0; f < nf; ++f) {
    camera.push(f, refine_camera_pose(anchor[f].pose, observed[f]), TrackStatus::kRefined);
  }
  out["ego_camera.csv"] = pose_track_to_csv(camera);
}

// ---- evaluation -----------------------------------------------------------

std::vector<std::size_t> keypoint_vertices(const TriangleMesh& mesh) {
  const std::size_t n = mesh.vertices.size();
  const std::size_t count = std::min<std::size_t>(n, 16);
  std::vector<std::size_t> idx;
  for (std::size_t k = 0; k < count; ++k) idx.push_back(k * n / count);
  return idx;
}

void add_projection(const CameraModel& cam, const Vec3& truth, const Vec3& estimate, Entity entity,
                    std::vector<ReprojectionSample>& samples) {
  const RigidTransform& w2c = cam.world_to_camera();
  if ((w2c * truth).z() <= 0.0 || (w2c * estimate).z() <= 0.0) return;
  const Vec2 a = project(cam, truth);
  if (!cam.in_image(a)) return;
  samples.push_back({a, project(cam, estimate), entity});
}

Entity hand_entity(Handedness side) {
  return side == Handedness::kLeft ? Entity::kLeftHand : Entity::kRightHand;
}

void run_eval(Context& ctx, Outputs& out) {
  const auto& info = ctx.info();
  const auto& cfg = ctx.config();
  const int nf = ctx.frames();
  const fs::path gt = ctx.store().ground_truth_dir();
  const CameraRig& rig = ctx.rig();
  EvalReport report;
  report.frame_count = nf;

  // Estimates per reprojection stage: objects and hands fall back to the
  // latest earlier stage they have.
  const std::vector<std::string> stages = {"initial", "sdf-refined", "joint-refined"};
  std::map<std::string, std::vector<ReprojectionSample>> samples;
  std::set<std::string> stage_seen;

  for (std::size_t o = 0; o < info.objects.size(); ++o) {
    const std::string& name = info.objects[o];
    const TriangleMesh mesh = ctx.store().mesh(name);
    const PoseTrack truth = read_track(gt / ("poses_world_" + name + ".csv"), nf);
    std::vector<RigidTransform> gt_poses;
    for (const auto& e : truth.entries()) gt_poses.push_back(e.pose);
    ObjectEval eval;
    eval.name = name;
    const std::array<std::pair<const char*, const char*>, 3> sources = {
        {{"initial", "fused_"}, {"sdf-refined", "refined_"}, {"joint-refined", "joint_"}}};
    std::optional<std::vector<RigidTransform>> latest;
    for (const auto& [stage, prefix] : sources) {
      const fs::path p = ctx.out(prefix + name + ".csv");
      if (fs::exists(p)) {
        std::vector<RigidTransform> est;
        for (const auto& e : read_track(p, nf).entries()) est.push_back(e.pose);
        eval.stages.push_back({stage, add_adds_auc(est, gt_poses, mesh, cfg.auc_threshold)});
        latest = est;
        stage_seen.insert(stage);
      }
      if (!latest) continue;
      for (int f = 0; f < nf; ++f) {
        for (const auto& cam : rig) {
          for (std::size_t v : keypoint_vertices(mesh)) {
            add_projection(cam, gt_poses[f] * mesh.vertices[v], (*latest)[f] * mesh.vertices[v],
                           Entity::kObject, samples[stage]);
          }
        }
      }
    }
    if (!eval.stages.empty()) report.objects.push_back(std::move(eval));
  }

  const HandShape shape = ctx.shape();
  for (Handedness side : info.hands) {
    const std::string s = side_name(side);
    const HandModelData& data = ctx.hand_model(side);
    const Keypoint3DTrack truth_kp =
        parse_keypoints(detail::read_file(gt / ("keypoints_" + s + ".csv")), nf);
    std::vector<JointArray> truth(static_cast<std::size_t>(nf));
    for (int f = 0; f < nf; ++f) {
      for (int j = 0; j < kHandJoints; ++j) {
        if (!truth_kp.frames[f].joints[j]) {
          throw Error(ErrorCode::kFormat, "ground-truth keypoints for the " + s + " hand are incomplete");
        }
        truth[f][j] = *truth_kp.frames[f].joints[j];
      }
    }
    HandEval eval;
    eval.side = side;

    const fs::path kp_path = ctx.out("keypoints_" + s + ".csv");
    if (fs::exists(kp_path)) {
      const Keypoint3DTrack est = parse_keypoints(detail::read_file(kp_path), nf);
      HandStageEval st;
      st.stage = "keypoints";
      for (int f = 0; f < nf; ++f) {
        const auto& joints = est.frames[f].joints;
        if (!joints[0]) {
          st.mpjpe_mm.push_back(std::nan(""));
          continue;
        }
        const Vec3 offset = truth[f][0] - *joints[0];
        double sum = 0.0;
        int n = 0;
        for (int j = 0; j < kHandJoints; ++j) {
          if (!joints[j]) continue;
          sum += (*joints[j] + offset - truth[f][j]).norm();
          ++n;
        }
        st.mpjpe_mm.push_back(1000.0 * sum / n);
      }
      eval.stages.push_back(std::move(st));
    }

    const std::array<std::pair<const char*, const char*>, 2> sources = {
        {{"initial", "hand_"}, {"joint-refined", "joint_hand_"}}};
    std::optional<std::vector<JointArray>> latest;
    for (const auto& stage : stages) {
      for (const auto& [src_stage, prefix] : sources) {
        if (stage != src_stage) continue;
        const fs::path p = ctx.out(prefix + s + ".csv");
        if (!fs::exists(p)) continue;
        const auto poses = read_hand_poses(p, nf);
        std::vector<JointArray> est;
        HandStageEval st;
        st.stage = stage;
        std::vector<double> pck_sum(kPckThresholds.size(), 0.0);
        int pck_n = 0;
        for (int f = 0; f < nf; ++f) {
          est.push_back(forward_kinematics(data, shape, poses[f]));
          st.mpjpe_mm.push_back(mpjpe_root_aligned(est.back(), truth[f]));
          for (const auto& cam : rig) {
            std::vector<Vec2> a, b;
            for (int j = 0; j < kHandJoints; ++j) {
              const RigidTransform& w2c = cam.world_to_camera();
              if ((w2c * truth[f][j]).z() <= 0.0 || (w2c * est.back()[j]).z() <= 0.0) break;
              a.push_back(project(cam, truth[f][j]));
              b.push_back(project(cam, est.back()[j]));
            }
            if (a.size() != kHandJoints) continue;
            const auto p = pck(b, a, bounding_box(a));
            for (std::size_t k = 0; k < p.size(); ++k) pck_sum[k] += p[k];
            ++pck_n;
          }
        }
        if (pck_n > 0) {
          for (double& v : pck_sum) v /= pck_n;
          st.pck = pck_sum;
        }
        eval.stages.push_back(std::move(st));
        latest = est;
        stage_seen.insert(stage);
      }
      if (!latest) continue;
      for (int f = 0; f < nf; ++f) {
        for (const auto& cam : rig) {
          for (int j = 0; j < kHandJoints; ++j) {
            add_projection(cam, truth[f][j], (*latest)[f][j], hand_entity(side), samples[stage]);
          }
        }
      }
    }
    if (!eval.stages.empty()) report.hands.push_back(std::move(eval));
  }

  for (const auto& stage : stages) {
    if (!stage_seen.count(stage) || samples[stage].empty()) continue;
    report.reprojection.push_back({stage, reprojection_error(samples[stage])});
  }

  const fs::path ego_out = ctx.out("ego_camera.csv");
  if (fs::exists(ego_out)) {
    const PoseTrack refined = read_track(ego_out, nf);
    const PoseTrack truth = read_track(gt / "ego_camera.csv", nf);
    const auto raw = rows_to_poses(ctx.store().ego_device_path(), nf);
    std::vector<RigidTransform> ref, tru;
    EgoEval e;
    for (int f = 0; f < nf; ++f) {
      ref.push_back(refined[f].pose);
      tru.push_back(truth[f].pose);
      const PoseDistance dr = pose_distance(raw[f], truth[f].pose);
      const PoseDistance dd = pose_distance(refined[f].pose, truth[f].pose);
      e.raw_error.angle_deg += dr.angle_deg / nf;
      e.raw_error.distance_m += dr.distance_m / nf;
      e.refined_error.angle_deg += dd.angle_deg / nf;
      e.refined_error.distance_m += dd.distance_m / nf;
    }
    e.raw_step = mean_step(raw);
    e.refined_step = mean_step(ref);
    e.truth_step = mean_step(tru);
    report.ego = e;
  }

  if (report.empty()) throw Error(ErrorCode::kEmptyInput, "eval: no estimates to evaluate");
  out["report.txt"] = report_text(report);
  out["report.json"] = report_json(report);
  for (const auto& [name, csv] : report_curves(report)) out["curves/" + name] = csv;
}

void commit(const fs::path& dir, const Outputs& outputs) {
  std::vector<fs::path> written;
  try {
    for (const auto& [name, contents] : outputs) {
      const fs::path p = dir / name;
      fs::create_directories(p.parent_path());
      detail::write_file_atomic(p, contents);
      written.push_back(p);
    }
  } catch (...) {
    std::error_code ec;
    for (const auto& p : written) fs::remove(p, ec);
    throw;
  }
}

}  // namespace

std::vector<StageRun> run_pipeline(const PipelineConfig& config, std::ostream& log) {
  config.validate();
  std::vector<Stage> stages = config.stages.empty()
                                  ? std::vector<Stage>(kAllStages.begin(), kAllStages.end())
                                  : config.stages;
  std::sort(stages.begin(), stages.end());
  stages.erase(std::unique(stages.begin(), stages.end()), stages.end());

  Context ctx(config, log);
  const SequenceInfo& info = ctx.info();
  std::vector<StageRun> runs;
  for (Stage stage : stages) {
    const std::string name(stage_name(stage));
    if ((stage == Stage::kHand && info.hands.empty()) ||
        (stage != Stage::kHand && stage != Stage::kEval && stage != Stage::kJoint &&
         info.objects.empty()) ||
        (stage == Stage::kEgo && !info.has_ego)) {
      log << "[" << name << "] nothing to do\n";
      runs.push_back({stage, true, {}});
      continue;
    }
    try {
      const auto inputs = stage_inputs(stage, ctx);
      const std::string hash = stamp_hash(stage, inputs, config, ctx.store().root());
      const fs::path stamp_path = ctx.out(".stamps/" + name);
      if (fs::exists(stamp_path)) {
        const auto lines = detail::split(detail::read_file(stamp_path), '\n');
        bool fresh = !lines.empty() && lines[0] == hash;
        std::vector<std::string> outputs;
        for (std::size_t i = 1; fresh && i < lines.size(); ++i) {
          if (lines[i].empty()) continue;
          outputs.push_back(lines[i]);
          fresh = fs::exists(ctx.out(lines[i]));
        }
        if (fresh) {
          log << "[" << name << "] up-to-date\n";
          runs.push_back({stage, true, outputs});
          continue;
        }
      }
      Outputs outputs;
      switch (stage) {
        case Stage::kFuse: run_fuse(ctx, outputs); break;
        case Stage::kRefineObject: run_refine_object(ctx, outputs); break;
        case Stage::kHand: run_hand(ctx, outputs); break;
        case Stage::kJoint: run_joint(ctx, outputs); break;
        case Stage::kEgo: run_ego(ctx, outputs); break;
        case Stage::kEval: run_eval(ctx, outputs); break;
      }
      std::string stamp = hash + "\n";
      StageRun run{stage, false, {}};
      for (const auto& [file, contents] : outputs) {
        stamp += file + "\n";
        run.outputs.push_back(file);
      }
      outputs[".stamps/" + name] = stamp;
      commit(ctx.store().output_dir(), outputs);
      log << "[" << name << "] wrote " << run.outputs.size() << " files\n";
      runs.push_back(std::move(run));
    } catch (const Error& e) {
      std::string detail = e.what();
      const std::string prefix = std::string(error_name(e.code())) + ": ";
      if (detail.rfind(prefix, 0) == 0) detail.erase(0, prefix.size());
      throw Error(e.code(), name + ": " + detail);
    }
  }
  return runs;
}

}  // namespace hoa
