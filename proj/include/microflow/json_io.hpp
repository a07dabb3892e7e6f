#pragma once

#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "microflow/core.hpp"
#include "microflow/mask.hpp"
#include "microflow/planner.hpp"
#include "microflow/simloop.hpp"

namespace microflow {

/// Parsed mask sidecar: pixel scale plus inlet/outlet border segments.
struct MaskSidecar {
  double pixel_size = 1.0;
  BorderSegment inlet;
  double v_inlet = 0.0;
  std::vector<BorderSegment> outlets;
};

namespace detail {

inline BorderSegment segment_from_json(const nlohmann::json& j) {
  BorderSegment s;
  s.edge = edge_from_string(j.at("edge").get<std::string>());
  s.from = j.at("from").get<int>();
  s.to = j.at("to").get<int>();
  return s;
}

}  // namespace detail

inline MaskSidecar load_sidecar(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::BAD_FORMAT, "cannot open sidecar file " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::BAD_FORMAT, std::string("sidecar JSON parse: ") + e.what());
  }
  try {
    MaskSidecar sc;
    sc.pixel_size = j.at("pixel_size_m").get<double>();
    sc.inlet = detail::segment_from_json(j.at("inlet"));
    sc.v_inlet = j.at("inlet").at("v_inlet_mps").get<double>();
    // "outlet" may be one segment or a list of segments.
    const auto& out = j.at("outlet");
    if (out.is_array())
      for (const auto& o : out) sc.outlets.push_back(detail::segment_from_json(o));
    else
      sc.outlets.push_back(detail::segment_from_json(out));
    return sc;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::BAD_FORMAT, std::string("sidecar JSON fields: ") + e.what());
  }
}

inline void save_sidecar(const MaskSidecar& sc, const std::string& path) {
  auto seg = [](const BorderSegment& s) {
    const char* names[] = {"left", "right", "top", "bottom"};
    return nlohmann::json{{"edge", names[static_cast<int>(s.edge)]},
                          {"from", s.from},
                          {"to", s.to}};
  };
  nlohmann::json j;
  j["pixel_size_m"] = sc.pixel_size;
  j["inlet"] = seg(sc.inlet);
  j["inlet"]["v_inlet_mps"] = sc.v_inlet;
  nlohmann::json outs = nlohmann::json::array();
  for (const auto& o : sc.outlets) outs.push_back(seg(o));
  j["outlet"] = outs.size() == 1 ? outs[0] : outs;
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::BAD_FORMAT, "cannot open " + path + " for writing");
  out << j.dump(2) << '\n';
}

inline ChannelMask load_mask_with_sidecar(const std::string& mask_path,
                                          const std::string& sidecar_path) {
  const MaskSidecar sc = load_sidecar(sidecar_path);
  return load_mask_pgm_file(mask_path, sc.pixel_size, sc.inlet, sc.v_inlet, sc.outlets);
}

inline void save_plan_json(const PlanResult& plan, const std::string& path) {
  nlohmann::json j;
  nlohmann::json pts = nlohmann::json::array();
  for (const auto& p : plan.path) pts.push_back({p.x(), p.y()});
  j["path"] = pts;
  j["total_cost"] = plan.total_cost;
  j["travel_time_s"] = plan.travel_time;
  j["expanded"] = plan.expanded;
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::BAD_FORMAT, "cannot open " + path + " for writing");
  out << j.dump(2) << '\n';
}

inline void save_metrics_json(const TrackingMetrics& m, const std::string& variant,
                              const std::string& path) {
  nlohmann::json j;
  j["variant"] = variant;
  j["rms_error"] = m.rms_error;
  j["final_error"] = m.final_error;
  j["settling_time"] = std::isfinite(m.settling_time) ? nlohmann::json(m.settling_time)
                                                      : nlohmann::json(nullptr);
  j["mean_speed"] = m.mean_speed;
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::BAD_FORMAT, "cannot open " + path + " for writing");
  out << j.dump(2) << '\n';
}

}  // namespace microflow
