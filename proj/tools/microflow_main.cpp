// Command-line front end for the flow prediction / planning / tracking
// pipeline: solve -> refine -> plan -> track, with CSV/JSON/SVG artifacts.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "microflow/control.hpp"
#include "microflow/field.hpp"
#include "microflow/fvm.hpp"
#include "microflow/json_io.hpp"
#include "microflow/mask.hpp"
#include "microflow/observations.hpp"
#include "microflow/planner.hpp"
#include "microflow/refine.hpp"
#include "microflow/simloop.hpp"
#include "microflow/svg.hpp"

namespace fs = std::filesystem;
using namespace microflow;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitNotConverged = 3;
constexpr int kExitNoPath = 4;
constexpr int kExitNumeric = 5;

int exit_code_for(const Error& e) {
  switch (e.code()) {
    case ErrorCode::NO_PATH: return kExitNoPath;
    case ErrorCode::DIVERGED:
    case ErrorCode::NON_FINITE: return kExitNumeric;
    default: return kExitInput;
  }
}

struct PipelineConfig {
  std::string mask_path, sidecar_path, obs_path, out_dir = ".";
  FluidProps props;
  SolverConfig solver;
  RefineConfig refine;
  // Planner parameters.
  int stride = 2;
  int k_neighbors = 8;
  double v_max = 0.0;  // 0 = derive from field max speed
  double u_max = 0.0;
  // Controller gains / sim parameters.
  Gains gains;
  double dt = 0.01;
  double duration = 120.0;
  double period = 60.0;
  double traj_a = 1.8e-3;
  double traj_b = 1.5e-3;
  unsigned seed = 0;
};

template <typename T>
void maybe(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

PipelineConfig load_config(const std::string& path) {
  PipelineConfig c;
  if (path.empty()) return c;
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::BAD_FORMAT, "cannot open config file " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::BAD_FORMAT, std::string("config JSON parse: ") + e.what());
  }
  maybe(j, "mask", c.mask_path);
  maybe(j, "sidecar", c.sidecar_path);
  maybe(j, "observations", c.obs_path);
  maybe(j, "out_dir", c.out_dir);
  if (j.contains("fluid")) {
    maybe(j["fluid"], "rho", c.props.rho);
    maybe(j["fluid"], "nu", c.props.nu);
  }
  if (j.contains("solver")) {
    const auto& s = j["solver"];
    maybe(s, "max_outer_iters", c.solver.max_outer_iters);
    maybe(s, "tol_continuity", c.solver.tol_continuity);
    maybe(s, "relax_u", c.solver.relax_u);
    maybe(s, "relax_p", c.solver.relax_p);
  }
  if (j.contains("refine")) {
    const auto& r = j["refine"];
    maybe(r, "max_iters", c.refine.max_iters);
    maybe(r, "step_size", c.refine.step_size);
    maybe(r, "tol_loss", c.refine.tol_loss);
    maybe(r, "boundary_band", c.refine.boundary_band);
    maybe(r, "w_cont", c.refine.w_cont);
    maybe(r, "w_momx", c.refine.w_momx);
    maybe(r, "w_momy", c.refine.w_momy);
  }
  if (j.contains("planner")) {
    const auto& p = j["planner"];
    maybe(p, "stride", c.stride);
    maybe(p, "k", c.k_neighbors);
    maybe(p, "v_max", c.v_max);
    maybe(p, "u_max", c.u_max);
  }
  if (j.contains("gains")) {
    const auto& g = j["gains"];
    maybe(g, "K_p", c.gains.K_p);
    maybe(g, "k_f", c.gains.k_f);
    if (g.contains("L_p")) {
      const auto d = g.at("L_p").get<std::vector<double>>();
      if (d.size() != 2) throw Error(ErrorCode::BAD_FORMAT, "gains.L_p must be [l11, l22]");
      c.gains.L_p = Eigen::Vector2d(d[0], d[1]).asDiagonal();
    }
  }
  if (j.contains("sim")) {
    const auto& s = j["sim"];
    maybe(s, "dt", c.dt);
    maybe(s, "duration", c.duration);
    maybe(s, "period", c.period);
    maybe(s, "a", c.traj_a);
    maybe(s, "b", c.traj_b);
  }
  return c;
}

std::shared_ptr<const ChannelMask> load_mask_or_die(const PipelineConfig& c) {
  if (c.mask_path.empty() || c.sidecar_path.empty())
    throw Error(ErrorCode::INVALID_ARGUMENT, "--mask and --sidecar are required");
  return std::make_shared<const ChannelMask>(
      load_mask_with_sidecar(c.mask_path, c.sidecar_path));
}

Vec2 parse_point(const std::string& s) {
  const auto comma = s.find(',');
  if (comma == std::string::npos)
    throw Error(ErrorCode::INVALID_ARGUMENT, "point must be 'x,y' in meters: " + s);
  try {
    return {std::stod(s.substr(0, comma)), std::stod(s.substr(comma + 1))};
  } catch (const std::exception&) {
    throw Error(ErrorCode::INVALID_ARGUMENT, "cannot parse point: " + s);
  }
}

double derive_v_max(const FlowField& f, double configured) {
  if (configured > 0) return configured;
  double vmax = 0;
  for (size_t q = 0; q < f.vx.size(); ++q)
    vmax = std::max(vmax, std::hypot(f.vx.data()[q], f.vy.data()[q]));
  return vmax > 0 ? 1.5 * vmax : 1.0;
}

int cmd_solve(const PipelineConfig& c) {
  auto mask = load_mask_or_die(c);
  auto [field, report] = solve_steady(mask, c.props, c.solver);
  fs::create_directories(c.out_dir);
  export_field(field, (fs::path(c.out_dir) / "field.mfn").string());
  save_residual_csv(report, (fs::path(c.out_dir) / "residuals.csv").string());
  std::cout << "solve: " << (report.converged ? "converged" : "NOT_CONVERGED") << " after "
            << report.iters_used << " iters, continuity " << report.continuity_l2 << "\n";
  return report.converged ? kExitOk : kExitNotConverged;
}

int cmd_refine(const PipelineConfig& c, const std::string& field_in) {
  auto mask = load_mask_or_die(c);
  const std::string in_path =
      field_in.empty() ? (fs::path(c.out_dir) / "field.mfn").string() : field_in;
  FlowField initial = import_field(in_path, mask);
  ObservationSet obs;
  if (!c.obs_path.empty()) obs = load_observations_csv(c.obs_path);
  if (obs.entries.empty()) std::cerr << "warning: NO_OBSERVATIONS, refining on physics only\n";
  obs.check_inside_fluid(*mask);
  RefineResult res = refine_field(initial, obs, c.props, c.refine);
  fs::create_directories(c.out_dir);
  export_field(res.field, (fs::path(c.out_dir) / "field_refined.mfn").string());
  save_loss_csv(res, (fs::path(c.out_dir) / "loss.csv").string());
  std::cout << "refine: " << res.iters_used << " iters, loss "
            << res.loss_history.front() << " -> " << res.loss_history.back()
            << (res.step_failure ? " (STEP_FAILURE)" : "") << "\n";
  return kExitOk;
}

int cmd_plan(const PipelineConfig& c, const std::string& field_in, const Vec2& start,
             const Vec2& goal, bool euclidean) {
  auto mask = load_mask_or_die(c);
  const std::string in_path =
      field_in.empty() ? (fs::path(c.out_dir) / "field_refined.mfn").string() : field_in;
  FlowField field = import_field(in_path, mask);
  field.mask = mask;

  {
    const auto [gx, gy] = nearest_pixel(*mask, goal);
    if (!mask->fluid(gx, gy))
      throw Error(ErrorCode::INVALID_ARGUMENT, "goal lies inside SOLID");
    const auto [sx, sy] = nearest_pixel(*mask, start);
    if (!mask->fluid(sx, sy))
      throw Error(ErrorCode::INVALID_ARGUMENT, "start lies inside SOLID");
  }

  const double v_max = derive_v_max(field, c.v_max);
  const double u_max = c.u_max > 0 ? c.u_max : v_max;
  FlowGraph graph = build_graph(field, c.stride, c.k_neighbors, v_max);

  fs::create_directories(c.out_dir);
  PlanResult flow_plan = astar(graph, start, goal);
  flow_plan.path = smooth_path(*mask, flow_plan.path);
  try {
    flow_plan.travel_time = travel_time(flow_plan.path, field, u_max, c.dt);
  } catch (const Error&) {
    // infeasible leg; leave travel_time NaN
  }
  save_plan_json(flow_plan, (fs::path(c.out_dir) / "plan.json").string());

  std::vector<std::pair<std::vector<Vec2>, std::string>> overlays{
      {flow_plan.path, "#d32f2f"}};
  if (euclidean) {
    PlanResult plain = astar_euclidean(graph, start, goal);
    plain.path = smooth_path(*mask, plain.path);
    try {
      plain.travel_time = travel_time(plain.path, field, u_max, c.dt);
    } catch (const Error&) {
    }
    save_plan_json(plain, (fs::path(c.out_dir) / "plan_euclidean.json").string());
    overlays.push_back({plain.path, "#1565c0"});
    std::cout << "plan: flow-aware time " << flow_plan.travel_time << " s, euclidean time "
              << plain.travel_time << " s\n";
  } else {
    std::cout << "plan: cost " << flow_plan.total_cost << ", time " << flow_plan.travel_time
              << " s, expanded " << flow_plan.expanded << "\n";
  }
  svg_path_overlay(*mask, overlays, (fs::path(c.out_dir) / "plan.svg").string());
  return kExitOk;
}

int cmd_track(const PipelineConfig& c, const std::string& variant_str) {
  ControllerVariant variant;
  if (variant_str == "flow_comp")
    variant = ControllerVariant::FF_FB_FLOW_COMP;
  else if (variant_str == "no_comp")
    variant = ControllerVariant::FF_FB_NO_COMP;
  else if (variant_str == "observer")
    variant = ControllerVariant::FF_FB_OBSERVER;
  else
    throw Error(ErrorCode::INVALID_ARGUMENT,
                "unknown variant '" + variant_str + "' (flow_comp|no_comp|observer)");
  if (c.dt <= 0 || c.duration <= 0)
    throw Error(ErrorCode::INVALID_ARGUMENT, "dt and duration must be positive");

  // Rotational flow used in the reference tracking study.
  Eigen::Matrix2d A;
  A << 0.0, -0.2, 0.2, 0.0;
  const FlowSource flow = FlowSource::analytic_linear(A);
  const Vec2 x0(c.traj_a + 0.5e-3, 0.5e-3);  // offset from the trajectory start
  const SimTrace trace =
      simulate_tracking(variant, flow, make_lemniscate_ref(c.period, c.traj_a, c.traj_b),
                        c.gains, x0, c.duration, c.dt);
  const TrackingMetrics m = metrics(trace, 0.05 * c.traj_a);

  fs::create_directories(c.out_dir);
  const std::string tag = to_string(variant);
  save_trace_csv(trace, (fs::path(c.out_dir) / ("trace_" + tag + ".csv")).string());
  save_metrics_json(m, tag, (fs::path(c.out_dir) / ("metrics_" + tag + ".json")).string());
  svg_tracking_plot(trace, (fs::path(c.out_dir) / ("tracking_" + tag + ".svg")).string());
  std::cout << "track[" << tag << "]: rms_error " << m.rms_error << " m, final "
            << m.final_error << " m\n";
  return kExitOk;
}

int cmd_pipeline(const PipelineConfig& c, const Vec2& start, const Vec2& goal) {
  json summary;
  fs::create_directories(c.out_dir);
  const fs::path out(c.out_dir);

  const int solve_rc = cmd_solve(c);
  summary["solve"] = {{"field", (out / "field.mfn").string()},
                      {"residuals", (out / "residuals.csv").string()},
                      {"converged", solve_rc == kExitOk}};
  if (solve_rc != kExitOk && solve_rc != kExitNotConverged) return solve_rc;

  bool refined = false;
  if (!c.obs_path.empty() && fs::exists(c.obs_path)) {
    const int rc = cmd_refine(c, (out / "field.mfn").string());
    if (rc != kExitOk) return rc;
    refined = true;
  } else {
    std::cerr << "warning: no observations file, skipping refine stage\n";
  }
  summary["refine"] = {{"applied", refined},
                       {"field", (out / (refined ? "field_refined.mfn" : "field.mfn")).string()}};

  const std::string plan_field = (out / (refined ? "field_refined.mfn" : "field.mfn")).string();
  const int plan_rc = cmd_plan(c, plan_field, start, goal, true);
  if (plan_rc != kExitOk) return plan_rc;
  summary["plan"] = {{"plan", (out / "plan.json").string()},
                     {"plan_euclidean", (out / "plan_euclidean.json").string()},
                     {"svg", (out / "plan.svg").string()}};

  // Navigate the planned path under the gridded flow.
  auto mask = load_mask_or_die(c);
  FlowField field = import_field(plan_field, mask);
  field.mask = mask;
  json plan_j;
  {
    std::ifstream in((out / "plan.json").string());
    in >> plan_j;
  }
  std::vector<Vec2> path;
  for (const auto& p : plan_j["path"]) path.emplace_back(p[0].get<double>(), p[1].get<double>());
  if (path.size() < 2) throw Error(ErrorCode::NO_PATH, "planned path degenerate");
  const double v_max = derive_v_max(field, c.v_max);
  const double u_max = c.u_max > 0 ? c.u_max : v_max;
  auto field_ptr = std::make_shared<const FlowField>(field);
  const NavResult nav = simulate_navigation(path, FlowSource::grid(field_ptr), c.gains, u_max,
                                            c.dt, 2.0 * mask->pixel_size);
  save_trace_csv(nav.trace, (out / "navigation.csv").string());
  summary["navigate"] = {{"trace", (out / "navigation.csv").string()},
                         {"arrival_time_s", nav.arrival_time}};

  std::ofstream sum((out / "summary.json").string());
  sum << summary.dump(2) << '\n';
  std::cout << "pipeline: done, arrival in " << nav.arrival_time << " s\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Flow prediction, flow-aware planning, and tracking for micro-robots"};
  app.require_subcommand(1);
  app.fallthrough();  // let global options appear after the subcommand

  std::string config_path, mask_path, sidecar_path, obs_path, out_dir, field_in;
  std::string start_str, goal_str, variant_str = "flow_comp";
  bool euclidean = false;
  int jobs = 1;
  unsigned seed = 0;
  double dt_flag = -1, duration_flag = -1;

  app.add_option("--config", config_path, "JSON config file");
  app.add_option("--mask", mask_path, "binary PGM mask (0=SOLID, 255=FLUID)");
  app.add_option("--sidecar", sidecar_path, "mask sidecar JSON");
  app.add_option("--obs", obs_path, "observations CSV (x_m,y_m,vx_mps,vy_mps)");
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--field", field_in, "input field file (MFN1)");
  app.add_option("--seed", seed, "RNG seed for batch runs");
  app.add_option("--jobs", jobs, "parallel batch jobs");
  app.add_option("--dt", dt_flag, "integrator step, seconds");
  app.add_option("--duration", duration_flag, "simulation duration, seconds");

  auto* solve = app.add_subcommand("solve", "steady FVM solve -> field.mfn + residuals.csv");
  auto* refine = app.add_subcommand("refine", "physics-informed refinement with observations");
  auto* plan = app.add_subcommand("plan", "flow-aware A* plan between start and goal");
  auto* track = app.add_subcommand("track", "closed-loop reference tracking run");
  auto* pipeline = app.add_subcommand("pipeline", "solve -> refine -> plan -> navigate");

  for (auto* cmd : {plan, pipeline}) {
    cmd->add_option("--start", start_str, "start position 'x,y' in meters")->required();
    cmd->add_option("--goal", goal_str, "goal position 'x,y' in meters")->required();
  }
  plan->add_flag("--euclidean", euclidean, "also emit the Euclidean-cost plan");
  track->add_option("--variant", variant_str, "flow_comp|no_comp|observer");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitInput;
  }

  try {
    PipelineConfig cfg = load_config(config_path);
    if (!mask_path.empty()) cfg.mask_path = mask_path;
    if (!sidecar_path.empty()) cfg.sidecar_path = sidecar_path;
    if (!obs_path.empty()) cfg.obs_path = obs_path;
    if (!out_dir.empty()) cfg.out_dir = out_dir;
    if (seed != 0) cfg.seed = seed;
    if (dt_flag > 0) cfg.dt = dt_flag;
    else if (dt_flag == 0) throw Error(ErrorCode::INVALID_ARGUMENT, "dt must be positive");
    if (duration_flag > 0) cfg.duration = duration_flag;
    else if (duration_flag == 0)
      throw Error(ErrorCode::INVALID_ARGUMENT, "duration must be positive");

    if (solve->parsed()) return cmd_solve(cfg);
    if (refine->parsed()) return cmd_refine(cfg, field_in);
    if (plan->parsed())
      return cmd_plan(cfg, field_in, parse_point(start_str), parse_point(goal_str), euclidean);
    if (track->parsed()) return cmd_track(cfg, variant_str);
    if (pipeline->parsed())
      return cmd_pipeline(cfg, parse_point(start_str), parse_point(goal_str));
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  }
  return kExitInput;
}
