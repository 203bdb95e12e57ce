/******************************************************************************
 * Copyright 2026 The dualvo Authors. All Rights Reserved.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 *****************************************************************************/
#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include "dualvo/dba.hpp"
#include "dualvo/io.hpp"
#include "dualvo/photometric.hpp"
#include "dualvo/simworld.hpp"
#include "dualvo/traj_eval.hpp"
#include "dualvo/update_loop.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace dualvo;

namespace {

constexpr const char* kVersion = "0.1.0";

// Exit codes: 0 success, 1 I/O, 2 config/parse, 3 numerical failure.
enum ExitCode { kOk = 0, kIoFailure = 1, kBadConfig = 2, kNumerical = 3 };

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("JSON parse failed in ") + path + ": " +
                         e.what(),
                     1);
  }
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path);
  out << content;
  if (!out) throw IoError("write failed: " + path);
}

Eigen::Vector3d read_vec3(const json& j) {
  if (!j.is_array() || j.size() != 3) {
    throw ParseError("expected a 3-element array", 1);
  }
  return Eigen::Vector3d(j[0].get<double>(), j[1].get<double>(),
                         j[2].get<double>());
}

SimConfig parse_sim_config(const json& j) {
  SimConfig config;
  config.width = j.value("width", 48);
  config.height = j.value("height", 64);
  config.n_frames = j.value("n_frames", 6);
  config.frame_dt = j.value("frame_dt", 0.1);
  config.texture_seed = j.value("texture_seed", 7ull);
  config.noise_sigma = j.value("noise_sigma", 0.0);
  if (j.contains("texture_freq")) {
    config.texture_freq_min = j["texture_freq"][0].get<double>();
    config.texture_freq_max = j["texture_freq"][1].get<double>();
  }

  if (j.contains("intrinsics")) {
    const json& ji = j["intrinsics"];
    config.intrinsics.fx = ji.value("fx", 0.0);
    config.intrinsics.fy = ji.value("fy", 0.0);
    config.intrinsics.cx = ji.value("cx", 0.0);
    config.intrinsics.cy = ji.value("cy", 0.0);
    config.intrinsics.width = config.width;
    config.intrinsics.height = config.height;
  }
  if (j.contains("background")) {
    const json& jb = j["background"];
    config.background_depth = jb.value("depth", 5.0);
    if (jb.contains("tilt")) {
      config.background_tilt =
          Eigen::Vector2d(jb["tilt"][0].get<double>(),
                          jb["tilt"][1].get<double>());
    }
  }
  if (j.contains("trajectory")) {
    const json& jt = j["trajectory"];
    const std::string type = jt.value("type", "line");
    if (type == "line") {
      config.trajectory.type = TrajectoryType::kLine;
    } else if (type == "arc") {
      config.trajectory.type = TrajectoryType::kArc;
    } else if (type == "orbit") {
      config.trajectory.type = TrajectoryType::kOrbit;
    } else {
      throw ParseError("unknown trajectory type: " + type, 1);
    }
    if (jt.contains("velocity")) {
      config.trajectory.velocity = read_vec3(jt["velocity"]);
    }
    config.trajectory.angular_rate = jt.value("angular_rate", 0.0);
    config.trajectory.orbit_radius = jt.value("orbit_radius", 2.0);
    if (jt.contains("orbit_center")) {
      config.trajectory.orbit_center = read_vec3(jt["orbit_center"]);
    }
  }
  for (const json& jo : j.value("objects", json::array())) {
    ObjectSpec obj;
    if (jo.contains("extent")) {
      obj.extent_x = jo["extent"][0].get<double>();
      obj.extent_y = jo["extent"][1].get<double>();
    }
    if (jo.contains("position")) {
      obj.base_pose =
          PoseSE3(Eigen::Quaterniond::Identity(), read_vec3(jo["position"]));
    }
    if (jo.contains("velocity")) {
      const json& jv = jo["velocity"];
      if (!jv.is_array() || jv.size() != 6) {
        throw ParseError("object velocity must be a 6-element twist", 1);
      }
      obj.velocity =
          Twist(Eigen::Vector3d(jv[0].get<double>(), jv[1].get<double>(),
                                jv[2].get<double>()),
                Eigen::Vector3d(jv[3].get<double>(), jv[4].get<double>(),
                                jv[5].get<double>()));
    }
    config.objects.push_back(obj);
  }
  return config;
}

json sim_config_to_json(const SimConfig& config, uint64_t seed) {
  json j;
  j["width"] = config.width;
  j["height"] = config.height;
  j["n_frames"] = config.n_frames;
  j["frame_dt"] = config.frame_dt;
  j["texture_seed"] = config.texture_seed;
  j["texture_freq"] = {config.texture_freq_min, config.texture_freq_max};
  j["noise_sigma"] = config.noise_sigma;
  j["seed"] = seed;
  j["intrinsics"] = {{"fx", config.intrinsics.fx},
                     {"fy", config.intrinsics.fy},
                     {"cx", config.intrinsics.cx},
                     {"cy", config.intrinsics.cy}};
  j["background"] = {
      {"depth", config.background_depth},
      {"tilt", {config.background_tilt.x(), config.background_tilt.y()}}};
  json jt;
  switch (config.trajectory.type) {
    case TrajectoryType::kLine: jt["type"] = "line"; break;
    case TrajectoryType::kArc: jt["type"] = "arc"; break;
    case TrajectoryType::kOrbit: jt["type"] = "orbit"; break;
  }
  jt["velocity"] = {config.trajectory.velocity.x(),
                    config.trajectory.velocity.y(),
                    config.trajectory.velocity.z()};
  jt["angular_rate"] = config.trajectory.angular_rate;
  jt["orbit_radius"] = config.trajectory.orbit_radius;
  jt["orbit_center"] = {config.trajectory.orbit_center.x(),
                        config.trajectory.orbit_center.y(),
                        config.trajectory.orbit_center.z()};
  j["trajectory"] = jt;
  j["objects"] = json::array();
  for (const ObjectSpec& obj : config.objects) {
    json jo;
    jo["extent"] = {obj.extent_x, obj.extent_y};
    jo["position"] = {obj.base_pose.translation().x(),
                      obj.base_pose.translation().y(),
                      obj.base_pose.translation().z()};
    jo["velocity"] = {obj.velocity.omega.x(), obj.velocity.omega.y(),
                      obj.velocity.omega.z(), obj.velocity.v.x(),
                      obj.velocity.v.y(), obj.velocity.v.z()};
    j["objects"].push_back(jo);
  }
  return j;
}

std::string frame_tag(int k) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d", k);
  return buf;
}

Trajectory gt_trajectory(const SimScene& scene) {
  Trajectory traj;
  for (const SimFrame& f : scene.frames()) {
    traj.push_back(f.timestamp, f.gt_pose.inverse());
  }
  return traj;
}

int cmd_simulate(const std::string& config_path, const std::string& out_dir,
                 int64_t seed_override) {
  const json jconfig = read_json_file(config_path);
  const SimConfig config = parse_sim_config(jconfig);
  const uint64_t seed = seed_override >= 0
                            ? static_cast<uint64_t>(seed_override)
                            : jconfig.value("seed", 1ull);

  const SimScene scene = generate(config, seed);
  fs::create_directories(out_dir);
  const fs::path dir(out_dir);

  // Manifest entries are relative to the output directory so reruns into
  // different directories stay byte-identical.
  std::vector<std::string> outputs;
  auto emit = [&](const fs::path& p) {
    outputs.push_back(p.filename().string());
  };

  const Intrinsics& intr = scene.intrinsics();
  const json jcam = {{"fx", intr.fx}, {"fy", intr.fy}, {"cx", intr.cx},
                     {"cy", intr.cy}, {"width", intr.width},
                     {"height", intr.height}};
  write_text_file((dir / "camera.json").string(), jcam.dump(2) + "\n");
  emit(dir / "camera.json");

  save_tum((dir / "gt_traj.tum").string(), gt_trajectory(scene));
  emit(dir / "gt_traj.tum");

  for (int t = 0; t < scene.n_frames(); ++t) {
    const SimFrame& f = scene.frames()[t];
    const std::string tag = frame_tag(t);
    save_pgm_image((dir / ("image_" + tag + ".pgm")).string(), f.image);
    emit(dir / ("image_" + tag + ".pgm"));
    save_pfm((dir / ("invdepth_" + tag + ".pfm")).string(), f.gt_inv_depth);
    emit(dir / ("invdepth_" + tag + ".pfm"));
  }

  for (int t = 0; t + 1 < scene.n_frames(); ++t) {
    const GroundTruthFlows gt = gt_flows(scene, t, t + 1);
    const std::string pair = frame_tag(t) + "_" + frame_tag(t + 1);
    save_flo((dir / ("gt_flow_s_" + pair + ".flo")).string(), gt.f_s);
    save_flo((dir / ("gt_flow_d_" + pair + ".flo")).string(), gt.f_d);
    save_flo((dir / ("gt_flow_o_" + pair + ".flo")).string(), gt.f_o);
    save_pgm_mask((dir / ("gt_mask_" + pair + ".pgm")).string(), gt.mask);
    emit(dir / ("gt_flow_s_" + pair + ".flo"));
    emit(dir / ("gt_flow_d_" + pair + ".flo"));
    emit(dir / ("gt_flow_o_" + pair + ".flo"));
    emit(dir / ("gt_mask_" + pair + ".pgm"));
  }

  const json jfull = sim_config_to_json(scene.config(), seed);
  json manifest;
  manifest["version"] = kVersion;
  manifest["kind"] = "scene";
  manifest["seed"] = seed;
  manifest["config"] = jfull;
  manifest["config_digest"] = fnv1a_hex(jfull.dump());
  manifest["n_frames"] = scene.n_frames();
  manifest["outputs"] = outputs;
  write_text_file((dir / "manifest.json").string(), manifest.dump(2) + "\n");
  return kOk;
}

UpdateConfig parse_run_config(const json& j) {
  UpdateConfig config;
  config.mu = j.value("mu", 0.5);
  config.eta = j.value("eta", 10.0);
  config.radius = j.value("radius", 3);
  config.noise_sigma = j.value("noise_sigma", 0.0);
  config.max_outer_iters = j.value("max_outer_iters", 8);
  config.step_tol = j.value("step_tol", 1e-8);
  config.seed = j.value("seed", 0ull);
  config.single_flow = j.value("single_flow", false);
  config.damping = j.value("damping", 1e-4);
  config.depth_prior_weight = j.value("depth_prior_weight", 1e-3);
  config.invert_mask_logit = j.value("invert_mask_weighting", false);
  const std::string provider = j.value("provider", "oracle");
  if (provider == "oracle") {
    config.provider = TargetProviderKind::kOracle;
  } else if (provider == "correlation") {
    config.provider = TargetProviderKind::kCorrelation;
  } else {
    throw ParseError("unknown provider: " + provider, 1);
  }
  return config;
}

int cmd_solve(const std::string& scene_dir, const std::string& config_path,
              const std::string& out_dir, const std::string& provider_flag,
              double mu_flag, double eta_flag, int radius_flag,
              bool single_flow_flag, int64_t seed_override) {
  const fs::path scene_manifest = fs::path(scene_dir) / "manifest.json";
  if (!fs::exists(scene_manifest)) {
    throw IoError("scene manifest not found: " + scene_manifest.string());
  }
  const json jscene = read_json_file(scene_manifest.string());
  const SimConfig sim_config = parse_sim_config(jscene.at("config"));
  const uint64_t scene_seed = jscene.at("seed").get<uint64_t>();
  const SimScene scene = generate(sim_config, scene_seed);

  json jrun = json::object();
  if (!config_path.empty()) jrun = read_json_file(config_path);
  UpdateConfig config = parse_run_config(jrun);
  if (!provider_flag.empty()) {
    config.provider = provider_flag == "correlation"
                          ? TargetProviderKind::kCorrelation
                          : TargetProviderKind::kOracle;
  }
  if (mu_flag > 0.0) config.mu = mu_flag;
  if (eta_flag >= 0.0) config.eta = eta_flag;
  if (radius_flag > 0) config.radius = radius_flag;
  if (single_flow_flag) config.single_flow = true;
  if (seed_override >= 0) config.seed = static_cast<uint64_t>(seed_override);

  const double init_pose_sigma = jrun.value("init_pose_sigma", 0.0);
  const double init_depth_sigma = jrun.value("init_depth_sigma", 0.0);

  FrameGraph graph = graph_from_scene(scene);
  if (init_pose_sigma > 0.0 || init_depth_sigma > 0.0) {
    perturb(graph, init_pose_sigma, init_depth_sigma, config.seed);
  }

  fs::create_directories(out_dir);
  const fs::path dir(out_dir);
  std::vector<std::string> outputs;

  SolverState state(std::move(graph), config, make_provider(config, &scene));

  int exit_code = kOk;
  RunResult result;
  try {
    result = state.run();
  } catch (const Diverged& e) {
    // Preserve partial outputs on divergence.
    std::cerr << "solver diverged: " << e.what() << "\n";
    result.trajectory = state.trajectory();
    exit_code = kNumerical;
  }

  save_tum((dir / "est_traj.tum").string(), result.trajectory);
  outputs.push_back("est_traj.tum");

  const Intrinsics& intr = state.graph().intrinsics();
  for (const Edge& e : state.graph().edges()) {
    if (e.dyn_flow.width() == 0) continue;
    const std::string pair = frame_tag(e.i) + "_" + frame_tag(e.j);
    const Frame& fi = state.graph().frame(e.i);
    const Frame& fj = state.graph().frame(e.j);
    const FlowField f_s =
        static_flow(intr, fi.pose, fj.pose, fi.inv_depth, PixelGrid(intr));
    save_flo((dir / ("flow_s_" + pair + ".flo")).string(), f_s);
    save_flo((dir / ("flow_d_" + pair + ".flo")).string(), e.dyn_flow);
    save_pgm_mask((dir / ("mask_" + pair + ".pgm")).string(), e.mask);
    outputs.push_back("flow_s_" + pair + ".flo");
    outputs.push_back("flow_d_" + pair + ".flo");
    outputs.push_back("mask_" + pair + ".pgm");
  }

  {
    std::ostringstream iters;
    iters << "iter,cost,max_twist_norm,damping\n";
    iters.precision(17);
    std::vector<IterationLosses> losses;
    for (const OuterIteration& it : result.iterations) {
      iters << it.iter << "," << it.cost_after << "," << it.max_twist_norm
            << "," << it.damping << "\n";
      losses.push_back(it.losses);
    }
    write_text_file((dir / "iters.csv").string(), iters.str());
    outputs.push_back("iters.csv");
    const std::string loss_csv = losses.empty()
                                     ? "iter,geo,flow,mask,total\n"
                                     : loss_log_csv(losses, config.loss);
    write_text_file((dir / "losses.csv").string(), loss_csv);
    outputs.push_back("losses.csv");
  }

  json jconfig_out = jrun;
  jconfig_out["mu"] = config.mu;
  jconfig_out["eta"] = config.eta;
  jconfig_out["radius"] = config.radius;
  jconfig_out["provider"] = config.provider == TargetProviderKind::kOracle
                                ? "oracle"
                                : "correlation";
  jconfig_out["noise_sigma"] = config.noise_sigma;
  jconfig_out["max_outer_iters"] = config.max_outer_iters;
  jconfig_out["step_tol"] = config.step_tol;
  jconfig_out["seed"] = config.seed;
  jconfig_out["single_flow"] = config.single_flow;

  json manifest;
  manifest["version"] = kVersion;
  manifest["kind"] = "run";
  manifest["scene"] = jscene.value("config_digest", "");
  manifest["config"] = jconfig_out;
  manifest["config_digest"] = fnv1a_hex(jconfig_out.dump());
  manifest["seed"] = config.seed;
  manifest["converged"] = result.converged;
  manifest["iterations"] = result.iterations.size();
  if (!result.iterations.empty()) {
    manifest["final_cost"] = result.iterations.back().cost_after;
  }
  manifest["outputs"] = outputs;
  write_text_file((dir / "manifest.json").string(), manifest.dump(2) + "\n");
  return exit_code;
}

int cmd_eval(const std::string& est_path, const std::string& gt_path,
             bool no_scale) {
  const Trajectory est = load_tum(est_path);
  const Trajectory gt = load_tum(gt_path);
  const AteBreakdown ate = ate_breakdown(est, gt, !no_scale);
  std::printf("%.6f,%.6f,%.6f,%.6f\n", ate.rmse, ate.per_axis_rmse.x(),
              ate.per_axis_rmse.y(), ate.per_axis_rmse.z());
  return kOk;
}

int cmd_decompose(const std::string& flow_path, const std::string& traj_path,
                  const std::string& depth_path,
                  const std::string& camera_path, const std::string& out_dir,
                  double mu, const std::string& gt_mask_path) {
  const FlowField f_o = load_flo(flow_path);
  const Trajectory traj = load_tum(traj_path);
  if (traj.size() < 2) {
    throw ParseError("decompose: trajectory needs at least 2 poses", 1);
  }
  const Grid2D<double> inv_depth = load_pfm(depth_path);

  const json jcam = read_json_file(camera_path);
  Intrinsics intr;
  intr.fx = jcam.at("fx").get<double>();
  intr.fy = jcam.at("fy").get<double>();
  intr.cx = jcam.at("cx").get<double>();
  intr.cy = jcam.at("cy").get<double>();
  intr.width = jcam.at("width").get<int>();
  intr.height = jcam.at("height").get<int>();

  if (f_o.width() != intr.width || f_o.height() != intr.height ||
      !inv_depth.same_shape(f_o.du)) {
    throw ShapeMismatch("decompose: flow/depth/camera sizes disagree");
  }

  // TUM poses are camera-to-world; the solver convention is world-to-camera.
  const PoseSE3 g_i = traj.entries[0].pose.inverse();
  const PoseSE3 g_j = traj.entries[1].pose.inverse();
  const PixelGrid grid(intr);
  const FlowField f_s = static_flow(intr, g_i, g_j, inv_depth, grid);
  const FlowField f_d = dynamic_residual(f_o, f_s);
  const DynamicMask mask =
      artificial_mask(intr, relative(g_i, g_j), inv_depth, f_o, grid, mu);

  fs::create_directories(out_dir);
  const fs::path dir(out_dir);
  save_flo((dir / "static.flo").string(), f_s);
  save_flo((dir / "dynamic.flo").string(), f_d);
  save_pgm_mask((dir / "mask.pgm").string(), mask);

  if (!gt_mask_path.empty()) {
    const DynamicMask gt_mask = load_pgm_mask(gt_mask_path);
    if (!gt_mask.values.same_shape(mask.values)) {
      throw ShapeMismatch("decompose: GT mask size disagrees");
    }
    size_t inter = 0, uni = 0;
    for (size_t i = 0; i < mask.values.size(); ++i) {
      const bool a = mask.values[i] < 0.5;  // dynamic
      const bool b = gt_mask.values[i] < 0.5;
      inter += (a && b) ? 1 : 0;
      uni += (a || b) ? 1 : 0;
    }
    const double iou = uni == 0 ? 1.0 : double(inter) / double(uni);
    std::printf("iou,%.6f\n", iou);
  }
  return kOk;
}

int cmd_gradcheck(uint64_t seed, bool break_jacobian) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  struct Check {
    std::string name;
    double max_rel_err;
  };
  std::vector<Check> checks;

  // camera: analytic reprojection Jacobians vs central differences.
  {
    Intrinsics intr;
    intr.width = 12;
    intr.height = 10;
    intr.fx = 10.0;
    intr.fy = 10.0;
    intr.cx = 5.5;
    intr.cy = 4.5;
    const double step = 1e-6;
    double worst = 0.0;
    for (int inst = 0; inst < 5; ++inst) {
      const PoseSE3 g = exp(Twist(
          Eigen::Vector3d(0.03 * uni(rng), 0.03 * uni(rng), 0.03 * uni(rng)),
          Eigen::Vector3d(0.1 * uni(rng), 0.1 * uni(rng), 0.1 * uni(rng))));
      InverseDepthMap d(intr.width, intr.height, 0.0);
      for (size_t i = 0; i < d.size(); ++i) d[i] = 0.2 + 0.1 * uni(rng);
      const ReprojectionJacobians jac =
          reproject_jacobians(intr, g, d, PixelGrid(intr));
      const Eigen::Matrix3d rot = g.rotation_matrix();
      const Eigen::Vector3d trans = g.translation();

      for (int v = 1; v < intr.height - 1; v += 2) {
        for (int u = 1; u < intr.width - 1; u += 2) {
          const size_t i = static_cast<size_t>(v) * intr.width + u;
          if (!jac.valid[i]) continue;
          for (int col = 0; col < 6; ++col) {
            Vector6d dxi = Vector6d::Zero();
            dxi[col] = step;
            const PoseSE3 gp = retract(g, Twist(dxi));
            dxi[col] = -step;
            const PoseSE3 gm = retract(g, Twist(dxi));
            const PixelReprojection rp =
                reproject_pixel(intr, gp.rotation_matrix(), gp.translation(),
                                u, v, d.at(u, v), false);
            const PixelReprojection rm =
                reproject_pixel(intr, gm.rotation_matrix(), gm.translation(),
                                u, v, d.at(u, v), false);
            const Eigen::Vector2d fd = (rp.coords - rm.coords) / (2 * step);
            Eigen::Vector2d an = jac.pose[i].col(col);
            if (break_jacobian) an *= 1.001;  // negative-control hook
            const double scale =
                std::max(1e-8, std::max(fd.norm(), an.norm()));
            worst = std::max(worst, (fd - an).norm() / scale);
          }
          const PixelReprojection rp = reproject_pixel(
              intr, rot, trans, u, v, d.at(u, v) + step, false);
          const PixelReprojection rm = reproject_pixel(
              intr, rot, trans, u, v, d.at(u, v) - step, false);
          const Eigen::Vector2d fd = (rp.coords - rm.coords) / (2 * step);
          const double scale =
              std::max(1e-8, std::max(fd.norm(), jac.depth[i].norm()));
          worst = std::max(worst, (fd - jac.depth[i]).norm() / scale);
        }
      }
    }
    checks.push_back({"camera.reprojection_jacobians", worst});
  }

  // dba: gradient of the weighted cost w.r.t. each free twist.
  {
    SimConfig sim;
    sim.width = 16;
    sim.height = 12;
    sim.n_frames = 3;
    sim.trajectory.velocity = Eigen::Vector3d(0.3, 0.05, 0.1);
    const SimScene scene = generate(sim, seed + 1);
    FrameGraph graph = graph_from_scene(scene);
    const PixelGrid grid(graph.intrinsics());
    for (Edge& e : graph.edges()) {
      const Frame& fi = graph.frame(e.i);
      const Frame& fj = graph.frame(e.j);
      e.target = reproject(graph.intrinsics(), relative(fi.pose, fj.pose),
                           fi.inv_depth, grid);
      e.confidence_logit = Grid2D<double>(sim.width, sim.height, 0.3);
      e.mask = DynamicMask(sim.width, sim.height, 1.0);
    }
    perturb(graph, 0.01, 0.02, seed + 2);

    BAProblem problem(graph);
    const BAState state = BAState::from_graph(graph);
    const double step = 1e-6;
    double worst = 0.0;
    const Intrinsics& intr = graph.intrinsics();
    for (size_t fi = 0; fi < graph.frames().size(); ++fi) {
      if (graph.frames()[fi].fixed) continue;
      Vector6d analytic = Vector6d::Zero();
      for (const Edge& e : graph.edges()) {
        const size_t ei = graph.frame_index(e.i);
        const size_t ej = graph.frame_index(e.j);
        if (ei != fi && ej != fi) continue;
        const PoseSE3 g_ij = relative(state.poses[ei], state.poses[ej]);
        const Eigen::Matrix3d rot = g_ij.rotation_matrix();
        const Eigen::Vector3d trans = g_ij.translation();
        const Matrix6d adj = g_ij.adjoint();
        const ConfidenceMap conf =
            combine_confidence(e.confidence_logit, e.mask, problem.opts.eta);
        const InverseDepthMap& depth = state.inv_depths[ei];
        for (int v = 0; v < depth.height(); ++v) {
          for (int u = 0; u < depth.width(); ++u) {
            if (!e.target.valid.at(u, v)) continue;
            const PixelReprojection pr =
                reproject_pixel(intr, rot, trans, u, v, depth.at(u, v), true);
            if (!pr.z_valid || !pr.in_bounds) continue;
            const Eigen::Vector2d r(e.target.u.at(u, v) - pr.coords.x(),
                                    e.target.v.at(u, v) - pr.coords.y());
            const Eigen::Matrix<double, 2, 6> jmat =
                (ej == fi) ? pr.j_pose
                           : Eigen::Matrix<double, 2, 6>(-pr.j_pose * adj);
            analytic += -2.0 * conf.combined.at(u, v) * jmat.transpose() * r;
          }
        }
      }
      if (break_jacobian) analytic *= 1.001;

      for (int col = 0; col < 6; ++col) {
        BAState plus = state;
        BAState minus = state;
        Vector6d dxi = Vector6d::Zero();
        dxi[col] = step;
        plus.poses[fi] = retract(state.poses[fi], Twist(dxi));
        dxi[col] = -step;
        minus.poses[fi] = retract(state.poses[fi], Twist(dxi));
        const double fd =
            (total_cost(problem, plus) - total_cost(problem, minus)) /
            (2.0 * step);
        const double scale =
            std::max(1e-8, std::max(std::abs(fd), std::abs(analytic[col])));
        worst = std::max(worst, std::abs(fd - analytic[col]) / scale);
      }
    }
    checks.push_back({"dba.cost_gradient", worst});
  }

  // photometric: SSIM+L1 image gradient and mask cross-entropy gradient.
  {
    Image a(10, 8, 0.0), b(10, 8, 0.0);
    for (size_t i = 0; i < a.size(); ++i) {
      a[i] = 0.5 + 0.3 * uni(rng);
      b[i] = a[i] + 0.1 + 0.05 * uni(rng);
    }
    const Image grad = pe_geo_mean_grad_b(a, b);
    const double step = 1e-6;
    double worst = 0.0;
    for (int v = 0; v < 8; ++v) {
      for (int u = 0; u < 10; ++u) {
        Image bp = b, bm = b;
        bp.at(u, v) += step;
        bm.at(u, v) -= step;
        const double fd =
            (pe_geo_mean(a, bp) - pe_geo_mean(a, bm)) / (2.0 * step);
        double an = grad.at(u, v);
        if (break_jacobian) an *= 1.001;
        const double scale =
            std::max(1e-8, std::max(std::abs(fd), std::abs(an)));
        worst = std::max(worst, std::abs(fd - an) / scale);
      }
    }
    checks.push_back({"photometric.pe_geo_gradient", worst});

    DynamicMask pred(8, 6, 0.0), label(8, 6, 0.0);
    for (size_t i = 0; i < pred.values.size(); ++i) {
      pred.values[i] = 0.1 + 0.4 * (uni(rng) + 1.0);
      label.values[i] = uni(rng) > 0.0 ? 1.0 : 0.0;
    }
    const Grid2D<double> mgrad = mask_ce_grad(pred, label);
    worst = 0.0;
    for (size_t i = 0; i < pred.values.size(); ++i) {
      DynamicMask plus = pred, minus = pred;
      plus.values[i] += 1e-7;
      minus.values[i] -= 1e-7;
      const double fd =
          (mask_ce_loss(plus, label) - mask_ce_loss(minus, label)) / 2e-7;
      const double scale =
          std::max(1e-8, std::max(std::abs(fd), std::abs(mgrad[i])));
      worst = std::max(worst, std::abs(fd - mgrad[i]) / scale);
    }
    checks.push_back({"photometric.mask_ce_gradient", worst});
  }

  bool all_ok = true;
  for (const Check& c : checks) {
    const bool ok = c.max_rel_err < 1e-5;
    all_ok = all_ok && ok;
    std::printf("%-36s %.3e %s\n", c.name.c_str(), c.max_rel_err,
                ok ? "PASS" : "FAIL");
  }
  return all_ok ? kOk : kNumerical;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dual-flow dynamic visual odometry backend"};
  app.require_subcommand(1);

  auto* sim = app.add_subcommand("simulate", "render a synthetic scene");
  std::string sim_config, sim_out;
  int64_t sim_seed = -1;
  sim->add_option("--config", sim_config, "scene config JSON")->required();
  sim->add_option("--out", sim_out, "output directory")->required();
  sim->add_option("--seed", sim_seed, "override the config seed");

  auto* solve = app.add_subcommand("solve", "run the dual-flow solver");
  std::string solve_scene, solve_config, solve_out, solve_provider;
  double solve_mu = -1.0, solve_eta = -1.0;
  int solve_radius = -1;
  bool solve_single_flow = false;
  int64_t solve_seed = -1;
  solve->add_option("--scene", solve_scene, "scene directory")->required();
  solve->add_option("--config", solve_config, "run config JSON");
  solve->add_option("--out", solve_out, "output directory")->required();
  solve->add_option("--provider", solve_provider,
                    "target provider (oracle|correlation)")
      ->check(CLI::IsMember({"oracle", "correlation"}));
  solve->add_option("--mu", solve_mu, "artificial-mask threshold, pixels");
  solve->add_option("--eta", solve_eta, "confidence mask boost");
  solve->add_option("--radius", solve_radius, "correlation lookup radius");
  solve->add_flag("--single-flow", solve_single_flow,
                  "ablation baseline: no dual-flow decomposition");
  solve->add_option("--seed", solve_seed, "override the run seed");

  auto* eval = app.add_subcommand("eval", "trajectory error vs ground truth");
  std::string eval_est, eval_gt;
  bool eval_no_scale = false;
  eval->add_option("--est", eval_est, "estimated TUM trajectory")->required();
  eval->add_option("--gt", eval_gt, "ground-truth TUM trajectory")
      ->required();
  eval->add_flag("--no-scale", eval_no_scale, "SE(3) alignment, no scale");

  auto* dec = app.add_subcommand("decompose",
                                 "split optical flow into static + dynamic");
  std::string dec_flow, dec_traj, dec_depth, dec_camera, dec_out, dec_gt_mask;
  double dec_mu = 0.5;
  dec->add_option("--flow", dec_flow, "optical flow .flo")->required();
  dec->add_option("--traj", dec_traj, "TUM trajectory (first two poses)")
      ->required();
  dec->add_option("--depth", dec_depth,
                  "inverse-depth PFM of the first frame")
      ->required();
  dec->add_option("--camera", dec_camera, "camera intrinsics JSON")
      ->required();
  dec->add_option("--out", dec_out, "output directory")->required();
  dec->add_option("--mu", dec_mu, "segmentation threshold, pixels");
  dec->add_option("--gt-mask", dec_gt_mask, "GT mask PGM for IoU");

  auto* grad =
      app.add_subcommand("gradcheck", "finite-difference derivative suite");
  uint64_t grad_seed = 0;
  bool grad_break = false;
  grad->add_option("--seed", grad_seed, "RNG seed");
  grad->add_flag("--break-jacobian", grad_break,
                 "negative control: corrupt one analytic derivative");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kBadConfig;
  }

  try {
    if (sim->parsed()) return cmd_simulate(sim_config, sim_out, sim_seed);
    if (solve->parsed()) {
      return cmd_solve(solve_scene, solve_config, solve_out, solve_provider,
                       solve_mu, solve_eta, solve_radius, solve_single_flow,
                       solve_seed);
    }
    if (eval->parsed()) return cmd_eval(eval_est, eval_gt, eval_no_scale);
    if (dec->parsed()) {
      return cmd_decompose(dec_flow, dec_traj, dec_depth, dec_camera,
                           dec_out, dec_mu, dec_gt_mask);
    }
    if (grad->parsed()) return cmd_gradcheck(grad_seed, grad_break);
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kBadConfig;
  } catch (const ShapeMismatch& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kBadConfig;
  } catch (const DegenerateConfig& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kBadConfig;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kIoFailure;
  } catch (const SingularSystem& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kNumerical;
  } catch (const Diverged& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kNumerical;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kIoFailure;
  }
  return kOk;
}
