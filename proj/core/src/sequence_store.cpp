#include "hoa/sequence_store.hpp"

#include <cstdio>
#include <sstream>

#include <nlohmann/json.hpp>

#include "hoa/error.hpp"
#include "io_util.hpp"

namespace hoa {

namespace {

using detail::format_double;

std::string frame_tag(int frame) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%06d", frame);
  return buf;
}

/// Data rows of a CSV text with their 1-based line numbers; the header is
/// checked against `header`.
struct CsvRow {
  int line;
  std::vector<std::string> cells;
};

std::vector<CsvRow> csv_rows(std::string_view csv, std::string_view header, std::size_t columns) {
  std::vector<CsvRow> rows;
  std::istringstream in{std::string(csv)};
  std::string line;
  int number = 0;
  bool seen_header = false;
  while (std::getline(in, line)) {
    ++number;
    const std::string_view t = detail::trim(line);
    if (t.empty()) continue;
    if (!seen_header) {
      if (t != header) {
        throw Error(ErrorCode::kFormat, "line 1: expected header '" + std::string(header) + "'");
      }
      seen_header = true;
      continue;
    }
    auto cells = detail::split(t, ',');
    if (cells.size() != columns) {
      throw Error(ErrorCode::kFormat, "line " + std::to_string(number) + ": expected " +
                                          std::to_string(columns) + " columns, got " +
                                          std::to_string(cells.size()));
    }
    rows.push_back({number, std::move(cells)});
  }
  if (!seen_header) throw Error(ErrorCode::kFormat, "missing CSV header");
  return rows;
}

double cell_double(const CsvRow& row, std::size_t i) {
  try {
    return detail::parse_double(row.cells[i]);
  } catch (const Error& e) {
    throw Error(ErrorCode::kFormat, "line " + std::to_string(row.line) + ": " + e.what());
  }
}

int cell_int(const CsvRow& row, std::size_t i) {
  try {
    return static_cast<int>(detail::parse_int(row.cells[i]));
  } catch (const Error& e) {
    throw Error(ErrorCode::kFormat, "line " + std::to_string(row.line) + ": " + e.what());
  }
}

void append_pose(std::string& out, const RigidTransform& pose) {
  const Quat& q = pose.rotation();
  const Vec3& t = pose.translation();
  for (double v : {q.w(), q.x(), q.y(), q.z(), t.x(), t.y(), t.z()}) {
    out += ',';
    out += format_double(v);
  }
}

RigidTransform row_pose(const CsvRow& row, std::size_t first) {
  const Quat q(cell_double(row, first), cell_double(row, first + 1), cell_double(row, first + 2),
               cell_double(row, first + 3));
  if (!(q.norm() > 0.5 && q.norm() < 2.0)) {
    throw Error(ErrorCode::kFormat, "line " + std::to_string(row.line) + ": bad quaternion");
  }
  return {q.normalized(),
          Vec3(cell_double(row, first + 4), cell_double(row, first + 5), cell_double(row, first + 6))};
}

std::string pose_header(std::string_view last) {
  return "frame,qw,qx,qy,qz,tx,ty,tz," + std::string(last);
}

std::string hand_pose_header() {
  std::string h = "frame";
  for (int i = 0; i < kPoseParams; ++i) h += ",p" + std::to_string(i);
  return h;
}

}  // namespace

Handedness parse_handedness(std::string_view name) {
  if (name == "right") return Handedness::kRight;
  if (name == "left") return Handedness::kLeft;
  throw Error(ErrorCode::kFormat, "unknown hand side '" + std::string(name) + "'");
}

std::string sequence_info_to_json(const SequenceInfo& info) {
  nlohmann::ordered_json doc;
  doc["frame_count"] = info.frame_count;
  doc["frame_rate"] = info.frame_rate;
  doc["objects"] = info.objects;
  auto hands = nlohmann::ordered_json::array();
  for (Handedness h : info.hands) hands.push_back(std::string(handedness_name(h)));
  doc["hands"] = hands;
  doc["ego"] = info.has_ego;
  return doc.dump(2) + "\n";
}

SequenceInfo parse_sequence_info(std::string_view json_text) {
  try {
    const auto doc = nlohmann::json::parse(json_text);
    SequenceInfo info;
    info.frame_count = doc.at("frame_count").get<int>();
    info.frame_rate = doc.value("frame_rate", 30.0);
    info.objects = doc.value("objects", std::vector<std::string>{});
    for (const auto& h : doc.value("hands", std::vector<std::string>{})) {
      info.hands.push_back(parse_handedness(h));
    }
    info.has_ego = doc.value("ego", false);
    if (info.frame_count <= 0) throw Error(ErrorCode::kFormat, "frame_count must be positive");
    if (!(info.frame_rate > 0.0)) throw Error(ErrorCode::kFormat, "frame_rate must be positive");
    return info;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kFormat, std::string("sequence.json: ") + e.what());
  }
}

std::filesystem::path SequenceStore::mesh_path(std::string_view object) const {
  return root_ / "meshes" / (std::string(object) + ".ply");
}

std::filesystem::path SequenceStore::cloud_path(int frame, std::string_view camera) const {
  return root_ / "clouds" / ("frame_" + frame_tag(frame) + "_" + std::string(camera) + ".ply");
}

std::filesystem::path SequenceStore::camera_pose_path(std::string_view camera,
                                                      std::string_view object) const {
  return root_ / ("poses_" + std::string(camera) + "_" + std::string(object) + ".csv");
}

std::filesystem::path SequenceStore::landmarks_path(std::string_view camera,
                                                    Handedness side) const {
  return root_ / ("landmarks_" + std::string(camera) + "_" + std::string(handedness_name(side)) + ".csv");
}

std::filesystem::path SequenceStore::hand_model_path(Handedness side) const {
  return root_ / "hands" / (std::string(handedness_name(side)) + ".bin");
}

void require_file(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    throw Error(ErrorCode::kMissingInput, path.string());
  }
}

SequenceInfo SequenceStore::info() const {
  require_file(info_path());
  return parse_sequence_info(detail::read_file(info_path()));
}

CameraRig SequenceStore::rig() const {
  require_file(cameras_path());
  return load_camera_rig(cameras_path());
}

TriangleMesh SequenceStore::mesh(std::string_view object) const {
  const auto path = mesh_path(object);
  require_file(path);
  return load_ply_mesh(path);
}

PointCloud SequenceStore::cloud(int frame, std::string_view camera) const {
  const auto path = cloud_path(frame, camera);
  require_file(path);
  return load_ply_cloud(path);
}

std::string camera_poses_to_csv(const std::vector<CameraPoseRow>& rows) {
  std::string out = pose_header("valid") + "\n";
  for (const auto& r : rows) {
    out += std::to_string(r.frame);
    append_pose(out, r.pose.value_or(RigidTransform::identity()));
    out += r.pose ? ",1\n" : ",0\n";
  }
  return out;
}

std::vector<CameraPoseRow> parse_camera_poses(std::string_view csv) {
  std::vector<CameraPoseRow> out;
  for (const auto& row : csv_rows(csv, pose_header("valid"), 9)) {
    CameraPoseRow r;
    r.frame = cell_int(row, 0);
    if (cell_int(row, 8) != 0) r.pose = row_pose(row, 1);
    out.push_back(r);
  }
  return out;
}

std::string pose_track_to_csv(const PoseTrack& track) {
  std::string out = pose_header("status") + "\n";
  for (const auto& e : track.entries()) {
    out += std::to_string(e.frame);
    append_pose(out, e.pose);
    out += ',';
    out += track_status_name(e.status);
    out += '\n';
  }
  return out;
}

PoseTrack parse_pose_track(std::string_view csv) {
  PoseTrack track;
  for (const auto& row : csv_rows(csv, pose_header("status"), 9)) {
    track.push(cell_int(row, 0), row_pose(row, 1), parse_track_status(row.cells[8]));
  }
  return track;
}

std::string landmarks_to_csv(const std::vector<LandmarkObservation>& observations) {
  std::string out = "frame,joint,u,v,valid\n";
  for (const auto& obs : observations) {
    for (int j = 0; j < kHandJoints; ++j) {
      const Landmark& l = obs.joints[j];
      out += std::to_string(obs.frame) + "," + std::to_string(j) + "," +
             format_double(l.pixel.x()) + "," + format_double(l.pixel.y()) +
             (l.valid ? ",1\n" : ",0\n");
    }
  }
  return out;
}

std::vector<LandmarkObservation> parse_landmarks(std::string_view csv, const std::string& camera) {
  std::vector<LandmarkObservation> out;
  for (const auto& row : csv_rows(csv, "frame,joint,u,v,valid", 5)) {
    const int frame = cell_int(row, 0);
    const int joint = cell_int(row, 1);
    if (joint < 0 || joint >= kHandJoints) {
      throw Error(ErrorCode::kFormat, "line " + std::to_string(row.line) + ": joint out of range");
    }
    if (out.empty() || out.back().frame != frame) {
      LandmarkObservation obs;
      obs.frame = frame;
      obs.camera = camera;
      out.push_back(obs);
    }
    Landmark& l = out.back().joints[joint];
    l.pixel = Vec2(cell_double(row, 2), cell_double(row, 3));
    l.valid = cell_int(row, 4) != 0;
  }
  return out;
}

std::string hand_poses_to_csv(const std::vector<HandPose>& poses) {
  std::string out = hand_pose_header() + "\n";
  for (std::size_t f = 0; f < poses.size(); ++f) {
    out += std::to_string(f);
    const PoseVector v = poses[f].to_vector();
    for (int i = 0; i < kPoseParams; ++i) out += "," + format_double(v[i]);
    out += '\n';
  }
  return out;
}

std::vector<HandPose> parse_hand_poses(std::string_view csv) {
  std::vector<HandPose> out;
  for (const auto& row : csv_rows(csv, hand_pose_header(), kPoseParams + 1)) {
    if (cell_int(row, 0) != static_cast<int>(out.size())) {
      throw Error(ErrorCode::kFormat, "line " + std::to_string(row.line) + ": frames must be 0, 1, 2, ...");
    }
    PoseVector v;
    for (int i = 0; i < kPoseParams; ++i) v[i] = cell_double(row, i + 1);
    out.push_back(HandPose::from_vector(v));
  }
  return out;
}

std::string keypoints_to_csv(const Keypoint3DTrack& track) {
  std::string out = "frame,joint,x,y,z,source\n";
  for (const auto& f : track.frames) {
    for (int j = 0; j < kHandJoints; ++j) {
      if (!f.joints[j]) continue;
      const Vec3& p = *f.joints[j];
      out += std::to_string(f.frame) + "," + std::to_string(j) + "," + format_double(p.x()) +
             "," + format_double(p.y()) + "," + format_double(p.z()) + "," +
             std::string(keypoint_source_name(f.source[j])) + "\n";
    }
  }
  return out;
}

Keypoint3DTrack parse_keypoints(std::string_view csv, int frame_count) {
  Keypoint3DTrack track;
  track.frames.resize(static_cast<std::size_t>(frame_count));
  for (int f = 0; f < frame_count; ++f) {
    track.frames[f].frame = f;
    track.frames[f].source.fill(KeypointSource::kMissing);
  }
  for (const auto& row : csv_rows(csv, "frame,joint,x,y,z,source", 6)) {
    const int frame = cell_int(row, 0);
    const int joint = cell_int(row, 1);
    if (frame < 0 || frame >= frame_count || joint < 0 || joint >= kHandJoints) {
      throw Error(ErrorCode::kFormat, "line " + std::to_string(row.line) + ": index out of range");
    }
    auto& kf = track.frames[frame];
    kf.joints[joint] = Vec3(cell_double(row, 2), cell_double(row, 3), cell_double(row, 4));
    kf.source[joint] = parse_keypoint_source(row.cells[5]);
  }
  return track;
}

std::string hand_shape_to_json(const HandShape& shape) {
  nlohmann::ordered_json doc;
  doc["beta"] = std::vector<double>(shape.beta.data(), shape.beta.data() + kShapeParams);
  return doc.dump(2) + "\n";
}

HandShape parse_hand_shape(std::string_view json_text) {
  try {
    const auto doc = nlohmann::json::parse(json_text);
    const auto beta = doc.at("beta").get<std::vector<double>>();
    if (beta.size() != kShapeParams) {
      throw Error(ErrorCode::kFormat, "shape.json: beta must have 10 entries");
    }
    HandShape shape;
    for (int i = 0; i < kShapeParams; ++i) shape.beta[i] = beta[i];
    shape.validate();
    return shape;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kFormat, std::string("shape.json: ") + e.what());
  }
}

}  // namespace hoa
