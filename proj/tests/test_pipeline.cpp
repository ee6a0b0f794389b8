#include <gtest/gtest.h>

#include <sstream>

#include <nlohmann/json.hpp>

#include "hoa/error.hpp"
#include "hoa/pipeline.hpp"
#include "hoa/report.hpp"
#include "hoa/sequence_store.hpp"
#include "hoa/synthetic.hpp"
#include "test_support.hpp"

namespace hoa {
namespace {

namespace fs = std::filesystem;

void make_sequence(const fs::path& root, int frames, std::uint64_t seed = 5) {
  RigSpec spec;
  spec.count = 4;
  const HandModelData model = make_synthetic_hand_model();
  ScenarioSpec s = default_scenario(seed, frames);
  s.surface_samples = 400;
  write_sequence(generate_sequence(generate_rig(spec), s, model), model, root);
}

PipelineConfig config_for(const fs::path& root, std::vector<Stage> stages = {}) {
  PipelineConfig cfg;
  cfg.sequence = root;
  cfg.stages = std::move(stages);
  cfg.joint_sweeps = 2;
  cfg.joint_max_hand_points = 100;
  return cfg;
}

TEST(StoreCsv, CameraPosesRoundTrip) {
  Rng rng(121);
  std::vector<CameraPoseRow> rows;
  for (int f = 0; f < 5; ++f) {
    rows.push_back({f, f == 2 ? std::nullopt : std::optional(test::random_pose(rng))});
  }
  const auto back = parse_camera_poses(camera_poses_to_csv(rows));
  ASSERT_EQ(back.size(), rows.size());
  EXPECT_FALSE(back[2].pose);
  EXPECT_EQ(back[3].pose->matrix(), rows[3].pose->matrix());
  try {
    parse_camera_poses("frame,qw,qx,qy,qz,tx,ty,tz,valid\n0,1,0,0,0,0,0,x,1\n");
    FAIL() << "expected format";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kFormat);
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
  }
}

TEST(StoreCsv, TracksHandsKeypointsRoundTrip) {
  Rng rng(122);
  PoseTrack track;
  track.push(0, test::random_pose(rng), TrackStatus::kFused);
  track.push(1, test::random_pose(rng), TrackStatus::kCarriedForward);
  track.push(2, test::random_pose(rng), TrackStatus::kRefined);
  const PoseTrack tb = parse_pose_track(pose_track_to_csv(track));
  ASSERT_EQ(tb.size(), 3u);
  EXPECT_EQ(tb[1].status, TrackStatus::kCarriedForward);
  EXPECT_EQ(tb[2].pose.translation(), track[2].pose.translation());

  std::vector<HandPose> poses(3);
  poses[1] = HandPose::from_vector(PoseVector::Random());
  const auto pb = parse_hand_poses(hand_poses_to_csv(poses));
  EXPECT_EQ(pb[1].to_vector(), poses[1].to_vector());

  Keypoint3DTrack kp;
  for (int f = 0; f < 2; ++f) {
    KeypointFrame kf;
    kf.frame = f;
    kf.joints[3] = Vec3(0.1, 0.2, f);
    kf.source[3] = KeypointSource::kSplined;
    kp.frames.push_back(kf);
  }
  const Keypoint3DTrack kb = parse_keypoints(keypoints_to_csv(kp), 2);
  EXPECT_EQ(*kb.frames[1].joints[3], Vec3(0.1, 0.2, 1));
  EXPECT_EQ(kb.frames[1].source[3], KeypointSource::kSplined);
  EXPECT_FALSE(kb.frames[0].joints[4]);

  LandmarkObservation obs{4, "cam1", {}};
  obs.joints[2] = {Vec2(12.5, 99.25), true};
  const auto lb = parse_landmarks(landmarks_to_csv({obs}), "cam1");
  ASSERT_EQ(lb.size(), 1u);
  EXPECT_EQ(lb[0].joints[2].pixel, Vec2(12.5, 99.25));
  EXPECT_TRUE(lb[0].joints[2].valid);
  EXPECT_FALSE(lb[0].joints[3].valid);
}

TEST(Config, DefaultsOverridesAndUnknownKeys) {
  const PipelineConfig d = parse_pipeline_config("");
  EXPECT_EQ(d.lambda1, 10.0);
  EXPECT_EQ(d.fusion.ransac_iters, 64);

  const PipelineConfig c = parse_pipeline_config(
      R"({"lambda2": 0.5, "fusion": {"ransac_iters": 10}})",
      {"lambda1=3", "sdf.voxel_size_m=0.004", "stages=[\"fuse\",\"eval\"]"});
  EXPECT_EQ(c.lambda1, 3.0);
  EXPECT_EQ(c.lambda2, 0.5);
  EXPECT_EQ(c.fusion.ransac_iters, 10);
  EXPECT_EQ(c.voxel_size, 0.004);
  EXPECT_EQ(c.stages, (std::vector<Stage>{Stage::kFuse, Stage::kEval}));

  for (const char* bad : {"lambda9=1", "fusion.nope=2", "noequals"}) {
    try {
      parse_pipeline_config("", {bad});
      FAIL() << bad;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::kInvalidArgument) << bad;
    }
  }
  EXPECT_THROW(parse_pipeline_config(R"({"mystery": 1})"), Error);

  // Round trip through the writer.
  const PipelineConfig back = parse_pipeline_config(pipeline_config_to_json(c));
  EXPECT_EQ(pipeline_config_to_json(back), pipeline_config_to_json(c));
}

TEST(Config, Validation) {
  PipelineConfig c;
  EXPECT_THROW(c.validate(), Error);  // no sequence
  c.sequence = "/nonexistent/sequence";
  try {
    c.validate();
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kMissingInput);
  }
  c.sequence = fs::temp_directory_path();
  c.lambda2 = -1.0;
  EXPECT_THROW(c.validate(), Error);
}

TEST(Stages, NamesRoundTrip) {
  for (Stage s : kAllStages) EXPECT_EQ(parse_stage(stage_name(s)), s);
  EXPECT_THROW(parse_stage("bogus"), Error);
}

TEST(Fnv, KnownVectors) {
  EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ull);
  EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cull);
  EXPECT_EQ(fnv1a64("foobar"), 0x85944171f73967e8ull);
}

TEST(Report, EmptyReportRejected) {
  test::TempDir dir("empty_report");
  try {
    emit_report(EvalReport{}, dir.path());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kEmptyInput);
  }
  EXPECT_FALSE(fs::exists(dir.path() / "report.json"));
}

TEST(Report, DeterministicJsonAndCurves) {
  EvalReport r;
  r.frame_count = 3;
  r.reprojection.push_back({"initial", {{Entity::kObject, {1.5, 0.25, 12}}}});
  ObjectEval o;
  o.name = "box";
  o.stages.push_back({"initial", {{0.001, 0.002, 0.003}, {0.001, 0.001, 0.001}, 97.0, 99.0}});
  r.objects.push_back(o);
  HandEval h;
  h.side = Handedness::kLeft;
  h.stages.push_back({"initial", {1.0, std::nan(""), 2.0}, {50, 60, 70, 80}});
  r.hands.push_back(h);
  const std::string a = report_json(r), b = report_json(r);
  EXPECT_EQ(a, b);
  const auto j = nlohmann::json::parse(a);
  EXPECT_EQ(j["schema_version"], kReportSchemaVersion);
  EXPECT_DOUBLE_EQ(j["hands"][0]["stages"][0]["mpjpe_mm"].get<double>(), 1.5);

  const auto curves = report_curves(r);
  ASSERT_EQ(curves.count("object_box_add.csv"), 1u);
  ASSERT_EQ(curves.count("hand_left_mpjpe.csv"), 1u);
  for (const auto& [name, csv] : curves) {
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), r.frame_count + 1) << name;
  }
}

class PipelineRun : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new test::TempDir("pipeline");
    make_sequence(dir_->path(), 3);
  }
  static void TearDownTestSuite() {
    delete dir_;
    dir_ = nullptr;
  }
  static const fs::path& root() { return dir_->path(); }
  static test::TempDir* dir_;
};

test::TempDir* PipelineRun::dir_ = nullptr;

TEST_F(PipelineRun, EvalOfGroundTruthAgainstItselfIsZero) {
  test::TempDir copy("gt_eval");
  fs::copy(root(), copy.path(), fs::copy_options::recursive);
  fs::remove_all(copy.path() / "output");
  const fs::path out = copy.path() / "output";
  const fs::path gt = copy.path() / "ground_truth";
  fs::create_directories(out);
  const SequenceInfo info = SequenceStore(copy.path()).info();
  for (const auto& o : info.objects) {
    for (const char* prefix : {"fused_", "refined_", "joint_"}) {
      fs::copy_file(gt / ("poses_world_" + o + ".csv"), out / (prefix + o + ".csv"));
    }
  }
  for (Handedness h : info.hands) {
    const std::string s(handedness_name(h));
    fs::copy_file(gt / ("hand_" + s + ".csv"), out / ("hand_" + s + ".csv"));
    fs::copy_file(gt / ("hand_" + s + ".csv"), out / ("joint_hand_" + s + ".csv"));
    fs::copy_file(gt / ("keypoints_" + s + ".csv"), out / ("keypoints_" + s + ".csv"));
  }
  fs::copy_file(gt / "ego_camera.csv", out / "ego_camera.csv");

  std::ostringstream log;
  run_pipeline(config_for(copy.path(), {Stage::kEval}), log);
  const auto j = nlohmann::json::parse(test::read_text(out / "report.json"));
  for (const auto& st : j["reprojection"]) {
    for (const auto& [key, value] : st.items()) {
      if (key == "stage") continue;
      EXPECT_NEAR(value["mean_px"].get<double>(), 0.0, 1e-6) << st["stage"] << " " << key;
    }
  }
  for (const auto& o : j["objects"]) {
    for (const auto& st : o["stages"]) {
      EXPECT_NEAR(st["mean_add_m"].get<double>(), 0.0, 1e-9);
      EXPECT_EQ(st["add_auc"].get<double>(), 100.0);
    }
  }
  for (const auto& h : j["hands"]) {
    for (const auto& st : h["stages"]) {
      // Ground truth came from the in-memory model; eval reloads the float32 model file.
      EXPECT_NEAR(st["mpjpe_mm"].get<double>(), 0.0, 1e-5);
      if (st.contains("pck")) {
        for (const auto& p : st["pck"]) EXPECT_EQ(p["percent"].get<double>(), 100.0);
      }
    }
  }
  EXPECT_NEAR(j["ego"]["refined_error"]["distance_m"].get<double>(), 0.0, 1e-9);
}

TEST_F(PipelineRun, FullRunThenUpToDate) {
  std::ostringstream first;
  const auto runs = run_pipeline(config_for(root()), first);
  ASSERT_EQ(runs.size(), kAllStages.size());
  for (const auto& r : runs) EXPECT_FALSE(r.up_to_date) << stage_name(r.stage);
  const fs::path out = root() / "output";
  EXPECT_TRUE(fs::exists(out / "report.json"));
  EXPECT_TRUE(fs::exists(out / "curves" / "object_box_add.csv"));
  const auto curve = test::read_text(out / "curves" / "hand_right_mpjpe.csv");
  EXPECT_EQ(std::count(curve.begin(), curve.end(), '\n'), 4);

  std::ostringstream second;
  const auto again = run_pipeline(config_for(root()), second);
  for (const auto& r : again) EXPECT_TRUE(r.up_to_date) << stage_name(r.stage);
  EXPECT_NE(second.str().find("up-to-date"), std::string::npos) << second.str();

  // A changed science parameter invalidates downstream stamps.
  PipelineConfig changed = config_for(root(), {Stage::kRefineObject});
  changed.lambda1 = 20.0;
  std::ostringstream third;
  const auto rerun = run_pipeline(changed, third);
  ASSERT_EQ(rerun.size(), 1u);
  EXPECT_FALSE(rerun[0].up_to_date);
}

TEST_F(PipelineRun, FailedStageLeavesStoreUntouched) {
  test::TempDir copy("broken");
  fs::copy(root(), copy.path(), fs::copy_options::recursive);
  fs::remove_all(copy.path() / "output");
  fs::remove(copy.path() / "clouds" / "frame_000001_cam2.ply");
  std::ostringstream log;
  try {
    run_pipeline(config_for(copy.path(), {Stage::kFuse, Stage::kRefineObject}), log);
    FAIL() << "expected missing-input";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kMissingInput);
    EXPECT_EQ(std::string(e.what()).find("missing-input: refine-object"), 0u) << e.what();
  }
  // fuse committed; refine-object wrote nothing.
  EXPECT_TRUE(fs::exists(copy.path() / "output" / "fused_box.csv"));
  EXPECT_FALSE(fs::exists(copy.path() / "output" / "refined_box.csv"));
  EXPECT_FALSE(fs::exists(copy.path() / "output" / "refined_egg.csv"));
}

TEST_F(PipelineRun, SameSeedSameOutputs) {
  test::TempDir a("det_a"), b("det_b");
  for (const auto* d : {&a, &b}) {
    make_sequence(d->path(), 2, 9);
    std::ostringstream log;
    PipelineConfig cfg = config_for(d->path());
    cfg.jobs = d == &a ? 1 : 3;
    run_pipeline(cfg, log);
  }
  for (const auto& e : fs::recursive_directory_iterator(a.path() / "output")) {
    if (!e.is_regular_file()) continue;
    const fs::path rel = fs::relative(e.path(), a.path());
    if (rel.string().find(".stamps") != std::string::npos) continue;
    EXPECT_EQ(test::read_text(e.path()), test::read_text(b.path() / rel)) << rel;
  }
}

}  // namespace
}  // namespace hoa
