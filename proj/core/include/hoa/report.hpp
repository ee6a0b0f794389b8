#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hoa/hand_model.hpp"
#include "hoa/metrics.hpp"

namespace hoa {

inline constexpr int kReportSchemaVersion = 1;

struct ReprojectionStage {
  std::string stage;
  std::map<Entity, ErrorStats> errors;
};

struct ObjectStageEval {
  std::string stage;
  AddAucResult result;
};

struct ObjectEval {
  std::string name;
  std::vector<ObjectStageEval> stages;
};

struct HandStageEval {
  std::string stage;
  std::vector<double> mpjpe_mm;  // per frame; NaN where nothing was estimated
  std::vector<double> pck;       // per kPckThresholds entry, empty when not projected
};

struct HandEval {
  Handedness side = Handedness::kRight;
  std::vector<HandStageEval> stages;
};

struct EgoEval {
  PoseDistance raw_step;       // mean frame-to-frame motion
  PoseDistance refined_step;
  PoseDistance truth_step;
  PoseDistance raw_error;      // mean distance to ground truth
  PoseDistance refined_error;
};

struct EvalReport {
  int frame_count = 0;
  std::vector<ReprojectionStage> reprojection;
  std::vector<ObjectEval> objects;
  std::vector<HandEval> hands;
  std::optional<EgoEval> ego;

  bool empty() const {
    return reprojection.empty() && objects.empty() && hands.empty() && !ego;
  }
};

std::string report_text(const EvalReport& report);

/// Keys appear in a fixed order, so equal reports serialize to equal bytes.
std::string report_json(const EvalReport& report);

/// File name -> CSV contents, one row per frame (plus a header).
std::map<std::string, std::string> report_curves(const EvalReport& report);

/// Writes report.txt, report.json and curves/*.csv under `dir`. Throws
/// empty-input when the report holds no metric.
void emit_report(const EvalReport& report, const std::filesystem::path& dir);

}  // namespace hoa
