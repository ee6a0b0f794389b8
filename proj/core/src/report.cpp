#include "hoa/report.hpp"

#include <cmath>
#include <cstdio>

#include <nlohmann/json.hpp>

#include "hoa/error.hpp"
#include "io_util.hpp"

namespace hoa {

namespace {

using Json = nlohmann::ordered_json;

double finite_mean(const std::vector<double>& values) {
  double sum = 0.0;
  int n = 0;
  for (double v : values) {
    if (std::isfinite(v)) {
      sum += v;
      ++n;
    }
  }
  return n > 0 ? sum / n : std::nan("");
}

double mean(const std::vector<double>& values) {
  double sum = 0.0;
  for (double v : values) sum += v;
  return values.empty() ? 0.0 : sum / static_cast<double>(values.size());
}

/// NaN does not survive JSON; missing values become null.
Json number(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

Json distance_json(const PoseDistance& d) {
  Json j;
  j["angle_deg"] = number(d.angle_deg);
  j["distance_m"] = number(d.distance_m);
  return j;
}

std::string fixed(double v, int digits) {
  if (!std::isfinite(v)) return "n/a";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

std::string csv_value(double v) {
  return std::isfinite(v) ? detail::format_double(v) : "";
}

}  // namespace

std::string report_text(const EvalReport& report) {
  std::string out = "frames: " + std::to_string(report.frame_count) + "\n";
  if (!report.reprojection.empty()) {
    out += "\nreprojection error (px, mean +- std)\n";
    for (const auto& st : report.reprojection) {
      out += "  " + st.stage + ":";
      for (const auto& [entity, stats] : st.errors) {
        out += "  " + std::string(entity_name(entity)) + " " + fixed(stats.mean, 2) + " +- " +
               fixed(stats.std, 2);
      }
      out += "\n";
    }
  }
  for (const auto& obj : report.objects) {
    out += "\nobject " + obj.name + "\n";
    for (const auto& st : obj.stages) {
      out += "  " + st.stage + ": ADD AUC " + fixed(st.result.add_auc, 2) + "  ADD-S AUC " +
             fixed(st.result.adds_auc, 2) + "  mean ADD " +
             fixed(1000.0 * mean(st.result.add), 2) + " mm\n";
    }
  }
  for (const auto& hand : report.hands) {
    out += "\nhand " + std::string(handedness_name(hand.side)) + "\n";
    for (const auto& st : hand.stages) {
      out += "  " + st.stage + ": MPJPE " + fixed(finite_mean(st.mpjpe_mm), 2) + " mm";
      if (!st.pck.empty()) {
        out += "  PCK";
        for (std::size_t i = 0; i < st.pck.size(); ++i) {
          out += " " + fixed(st.pck[i], 1) + "(" + fixed(kPckThresholds[i], 2) + ")";
        }
      }
      out += "\n";
    }
  }
  if (report.ego) {
    const EgoEval& e = *report.ego;
    out += "\nego camera (mean step / mean error vs truth)\n";
    out += "  raw:     step " + fixed(1000.0 * e.raw_step.distance_m, 2) + " mm " +
           fixed(e.raw_step.angle_deg, 3) + " deg, error " +
           fixed(1000.0 * e.raw_error.distance_m, 2) + " mm " + fixed(e.raw_error.angle_deg, 3) +
           " deg\n";
    out += "  refined: step " + fixed(1000.0 * e.refined_step.distance_m, 2) + " mm " +
           fixed(e.refined_step.angle_deg, 3) + " deg, error " +
           fixed(1000.0 * e.refined_error.distance_m, 2) + " mm " +
           fixed(e.refined_error.angle_deg, 3) + " deg\n";
    out += "  truth:   step " + fixed(1000.0 * e.truth_step.distance_m, 2) + " mm " +
           fixed(e.truth_step.angle_deg, 3) + " deg\n";
  }
  return out;
}

std::string report_json(const EvalReport& report) {
  Json doc;
  doc["schema_version"] = kReportSchemaVersion;
  doc["frame_count"] = report.frame_count;

  Json reproj = Json::array();
  for (const auto& st : report.reprojection) {
    Json s;
    s["stage"] = st.stage;
    for (const auto& [entity, stats] : st.errors) {
      Json e;
      e["mean_px"] = number(stats.mean);
      e["std_px"] = number(stats.std);
      e["count"] = stats.count;
      s[std::string(entity_name(entity))] = e;
    }
    reproj.push_back(s);
  }
  doc["reprojection"] = reproj;

  Json objects = Json::array();
  for (const auto& obj : report.objects) {
    Json o;
    o["name"] = obj.name;
    Json stages = Json::array();
    for (const auto& st : obj.stages) {
      Json s;
      s["stage"] = st.stage;
      s["add_auc"] = number(st.result.add_auc);
      s["adds_auc"] = number(st.result.adds_auc);
      s["mean_add_m"] = number(mean(st.result.add));
      s["mean_adds_m"] = number(mean(st.result.adds));
      stages.push_back(s);
    }
    o["stages"] = stages;
    objects.push_back(o);
  }
  doc["objects"] = objects;

  Json hands = Json::array();
  for (const auto& hand : report.hands) {
    Json h;
    h["side"] = std::string(handedness_name(hand.side));
    Json stages = Json::array();
    for (const auto& st : hand.stages) {
      Json s;
      s["stage"] = st.stage;
      s["mpjpe_mm"] = number(finite_mean(st.mpjpe_mm));
      if (!st.pck.empty()) {
        Json p = Json::array();
        for (std::size_t i = 0; i < st.pck.size(); ++i) {
          Json entry;
          entry["threshold"] = kPckThresholds[i];
          entry["percent"] = number(st.pck[i]);
          p.push_back(entry);
        }
        s["pck"] = p;
      }
      stages.push_back(s);
    }
    h["stages"] = stages;
    hands.push_back(h);
  }
  doc["hands"] = hands;

  if (report.ego) {
    Json e;
    e["raw_step"] = distance_json(report.ego->raw_step);
    e["refined_step"] = distance_json(report.ego->refined_step);
    e["truth_step"] = distance_json(report.ego->truth_step);
    e["raw_error"] = distance_json(report.ego->raw_error);
    e["refined_error"] = distance_json(report.ego->refined_error);
    doc["ego"] = e;
  } else {
    doc["ego"] = nullptr;
  }
  return doc.dump(2) + "\n";
}

std::map<std::string, std::string> report_curves(const EvalReport& report) {
  std::map<std::string, std::string> files;
  const auto n = static_cast<std::size_t>(report.frame_count);
  for (const auto& obj : report.objects) {
    for (const char* metric : {"add", "adds"}) {
      std::string csv = "frame";
      for (const auto& st : obj.stages) csv += "," + st.stage;
      csv += "\n";
      for (std::size_t f = 0; f < n; ++f) {
        csv += std::to_string(f);
        for (const auto& st : obj.stages) {
          const auto& v = std::string(metric) == "add" ? st.result.add : st.result.adds;
          csv += "," + (f < v.size() ? csv_value(v[f]) : std::string());
        }
        csv += "\n";
      }
      files["object_" + obj.name + "_" + metric + ".csv"] = csv;
    }
  }
  for (const auto& hand : report.hands) {
    std::string csv = "frame";
    for (const auto& st : hand.stages) csv += "," + st.stage;
    csv += "\n";
    for (std::size_t f = 0; f < n; ++f) {
      csv += std::to_string(f);
      for (const auto& st : hand.stages) {
        csv += "," + (f < st.mpjpe_mm.size() ? csv_value(st.mpjpe_mm[f]) : std::string());
      }
      csv += "\n";
    }
    files["hand_" + std::string(handedness_name(hand.side)) + "_mpjpe.csv"] = csv;
  }
  return files;
}

void emit_report(const EvalReport& report, const std::filesystem::path& dir) {
  if (report.empty()) throw Error(ErrorCode::kEmptyInput, "report has no metrics");
  std::filesystem::create_directories(dir / "curves");
  detail::write_file_atomic(dir / "report.txt", report_text(report));
  detail::write_file_atomic(dir / "report.json", report_json(report));
  for (const auto& [name, csv] : report_curves(report)) {
    detail::write_file_atomic(dir / "curves" / name, csv);
  }
}

}  // namespace hoa
