#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "hoa/hand_tracker.hpp"
#include "hoa/joint_refiner.hpp"
#include "hoa/metrics.hpp"
#include "hoa/object_tracker.hpp"
#include "hoa/sdf.hpp"

namespace hoa {

enum class Stage { kFuse, kRefineObject, kHand, kJoint, kEgo, kEval };

inline constexpr std::array<Stage, 6> kAllStages = {
    Stage::kFuse, Stage::kRefineObject, Stage::kHand, Stage::kJoint, Stage::kEgo, Stage::kEval};

std::string_view stage_name(Stage stage);
Stage parse_stage(std::string_view name);

struct PipelineConfig {
  std::filesystem::path sequence;
  std::vector<Stage> stages;  // empty: every stage
  std::uint64_t seed = 0;
  int jobs = 1;

  double lambda1 = 10.0;
  double lambda2 = 1e-3;
  double lambda3 = 1e-3;
  FusionConfig fusion;
  double landmark_gate = kDefaultLandmarkGate;        // px
  double hand_segmentation = kDefaultHandSegmentation;  // m
  double voxel_size = kDefaultVoxelSize;
  double sdf_padding = kDefaultSdfPadding;
  RefineOptions refine;
  int joint_sweeps = 10;
  int joint_hand_iterations = 5;
  double joint_max_translation = 0.05;
  double joint_max_rotation_deg = 30.0;
  int joint_max_hand_points = 300;  // per hand per frame, evenly strided
  double auc_threshold = kDefaultAucThreshold;

  /// Throws invalid-argument for negative weights or non-positive sizes and
  /// missing-input when the sequence directory does not exist.
  void validate() const;
};

std::string pipeline_config_to_json(const PipelineConfig& config);

/// Keys missing from the text keep their defaults. Each override is
/// "dotted.key=value" where value is JSON (bare words are taken as
/// strings); unknown keys throw invalid-argument.
PipelineConfig parse_pipeline_config(std::string_view json_text,
                                     const std::vector<std::string>& overrides = {});

/// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t hash = 0xcbf29ce484222325ull);

struct StageRun {
  Stage stage;
  bool up_to_date = false;
  std::vector<std::string> outputs;  // relative to the output directory
};

/// Runs the requested stages in dependency order. A stage whose inputs
/// and configuration hash to its stored stamp, and whose outputs all exist,
/// is skipped with an "up-to-date" log line. Outputs of a stage are held in
/// memory and committed only after the stage succeeds; a failed commit
/// removes what it wrote. Errors name the stage.
std::vector<StageRun> run_pipeline(const PipelineConfig& config, std::ostream& log);

}  // namespace hoa
