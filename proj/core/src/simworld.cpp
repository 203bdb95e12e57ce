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
#include "dualvo/simworld.hpp"

#include <cmath>
#include <random>

namespace dualvo {

namespace {

constexpr double kRayEps = 1e-9;
constexpr double kDepthTieEps = 1e-6;

Intrinsics derive_intrinsics(const SimConfig& config) {
  Intrinsics intr = config.intrinsics;
  if (intr.fx <= 0.0) {
    intr.width = config.width;
    intr.height = config.height;
    intr.fx = 0.8 * config.width;
    intr.fy = 0.8 * config.width;
    intr.cx = 0.5 * (config.width - 1);
    intr.cy = 0.5 * (config.height - 1);
  }
  return intr;
}

PoseSE3 camera_to_world_at(const TrajectorySpec& traj, double t) {
  switch (traj.type) {
    case TrajectoryType::kLine: {
      return PoseSE3(Eigen::Quaterniond::Identity(), traj.velocity * t);
    }
    case TrajectoryType::kArc: {
      const Eigen::Quaterniond q(
          Eigen::AngleAxisd(traj.angular_rate * t, Eigen::Vector3d::UnitY()));
      return PoseSE3(q, traj.velocity * t);
    }
    case TrajectoryType::kOrbit: {
      const double phi = traj.angular_rate * t;
      const Eigen::Vector3d center =
          traj.orbit_center +
          traj.orbit_radius * Eigen::Vector3d(std::sin(phi), 0.0,
                                              -std::cos(phi));
      // Look at the orbit center, keeping y as down-ish axis.
      const Eigen::Vector3d fwd =
          (traj.orbit_center - center).normalized();
      const Eigen::Vector3d right =
          Eigen::Vector3d::UnitY().cross(fwd).normalized();
      const Eigen::Vector3d down = fwd.cross(right);
      Eigen::Matrix3d rot;
      rot.col(0) = right;
      rot.col(1) = down;
      rot.col(2) = fwd;
      return PoseSE3(Eigen::Quaterniond(rot), center);
    }
  }
  return PoseSE3();
}

}  // namespace

double SimScene::Texture::eval(double a, double b) const {
  double acc = 0.0;
  for (int i = 0; i < 6; ++i) {
    acc += amp[i] * std::sin(fa[i] * a + fb[i] * b + ph[i]);
  }
  return 0.5 + 0.4 * acc;
}

PoseSE3 SimScene::cam_to_world(int frame) const {
  return camera_to_world_at(config_.trajectory, frames_[frame].timestamp);
}

PoseSE3 SimScene::object_to_world(int frame, int object) const {
  const ObjectSpec& spec = config_.objects[object];
  const double t = frames_[frame].timestamp;
  return exp(Twist(spec.velocity.omega * t, spec.velocity.v * t))
      .compose(spec.base_pose);
}

SimScene::Sample SimScene::cast_ray(int frame, double x, double y) const {
  const PoseSE3 c2w = cam_to_world(frame);
  const Eigen::Matrix3d rot = c2w.rotation_matrix();
  const Eigen::Vector3d origin = c2w.translation();
  // Direction scaled so the ray parameter equals camera-frame depth.
  const Eigen::Vector3d dir_cam((x - intrinsics_.cx) / intrinsics_.fx,
                                (y - intrinsics_.cy) / intrinsics_.fy, 1.0);
  const Eigen::Vector3d dir = rot * dir_cam;

  Sample best;
  double best_depth = 1e300;

  // Background plane z = z0 + gx x + gy y in world coordinates.
  {
    const double gx = config_.background_tilt.x();
    const double gy = config_.background_tilt.y();
    const double denom = dir.z() - gx * dir.x() - gy * dir.y();
    if (std::abs(denom) > kRayEps) {
      const double s = (config_.background_depth + gx * origin.x() +
                        gy * origin.y() - origin.z()) /
                       denom;
      if (s > kZMin) {
        const Eigen::Vector3d hit = origin + s * dir;
        best.ok = true;
        best.label = 0;
        best.depth = s;
        best.intensity = textures_[0].eval(hit.x(), hit.y());
        best_depth = s;
      }
    }
  }

  for (size_t k = 0; k < config_.objects.size(); ++k) {
    const PoseSE3 o2w = object_to_world(frame, static_cast<int>(k));
    const PoseSE3 w2o = o2w.inverse();
    const Eigen::Vector3d o_local = w2o.apply(origin);
    const Eigen::Vector3d d_local = w2o.rotation_matrix() * dir;
    if (std::abs(d_local.z()) < kRayEps) continue;
    const double s = -o_local.z() / d_local.z();
    if (s <= kZMin || s >= best_depth - kDepthTieEps) continue;
    const double a = o_local.x() + s * d_local.x();
    const double b = o_local.y() + s * d_local.y();
    const ObjectSpec& spec = config_.objects[k];
    if (std::abs(a) > 0.5 * spec.extent_x || std::abs(b) > 0.5 * spec.extent_y)
      continue;
    best.ok = true;
    best.label = static_cast<int>(k) + 1;
    best.depth = s;
    best.intensity = textures_[k + 1].eval(a, b);
    best_depth = s;
  }
  return best;
}

SimScene::Sample SimScene::render_at(int frame, double x, double y) const {
  return cast_ray(frame, x, y);
}

SimScene generate(const SimConfig& config, uint64_t seed) {
  if (config.n_frames < 2) {
    throw DegenerateConfig("generate: n_frames must be >= 2");
  }
  SimScene scene;
  scene.config_ = config;
  scene.seed_ = seed;
  scene.intrinsics_ = derive_intrinsics(config);
  scene.config_.intrinsics = scene.intrinsics_;
  scene.config_.width = scene.intrinsics_.width;
  scene.config_.height = scene.intrinsics_.height;

  std::mt19937_64 rng(seed ^ (config.texture_seed * 0x9e3779b97f4a7c15ull));
  std::uniform_real_distribution<double> freq(config.texture_freq_min,
                                              config.texture_freq_max);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * M_PI);
  std::uniform_real_distribution<double> unit(0.2, 1.0);
  for (size_t k = 0; k < config.objects.size() + 1; ++k) {
    SimScene::Texture tex;
    double amp_sum = 0.0;
    for (int i = 0; i < 6; ++i) {
      tex.amp[i] = unit(rng);
      tex.fa[i] = freq(rng);
      tex.fb[i] = freq(rng);
      tex.ph[i] = phase(rng);
      amp_sum += tex.amp[i];
    }
    for (int i = 0; i < 6; ++i) tex.amp[i] /= amp_sum;
    scene.textures_.push_back(tex);
  }

  const int w = scene.intrinsics_.width;
  const int h = scene.intrinsics_.height;
  scene.frames_.resize(config.n_frames);
  for (int t = 0; t < config.n_frames; ++t) {
    SimFrame& frame = scene.frames_[t];
    frame.timestamp = t * config.frame_dt;
    frame.gt_pose = camera_to_world_at(config.trajectory,
                                       frame.timestamp).inverse();
    frame.image = Image(w, h, 0.0);
    frame.gt_inv_depth = InverseDepthMap(w, h, 1.0);
    frame.gt_label = Grid2D<int>(w, h, 0);
    for (int v = 0; v < h; ++v) {
      for (int u = 0; u < w; ++u) {
        const SimScene::Sample s = scene.cast_ray(t, u, v);
        if (!s.ok) {
          throw DegenerateConfig(
              "generate: ray misses every surface at pixel (" +
              std::to_string(u) + "," + std::to_string(v) + "), frame " +
              std::to_string(t));
        }
        frame.image.at(u, v) = s.intensity;
        frame.gt_inv_depth.at(u, v) = 1.0 / s.depth;
        frame.gt_label.at(u, v) = s.label;
      }
    }
  }

  // Every object must be visible in front of the camera in some frame.
  for (size_t k = 0; k < config.objects.size(); ++k) {
    bool seen = false;
    for (int t = 0; t < config.n_frames && !seen; ++t) {
      const Eigen::Vector3d center_world =
          scene.object_to_world(t, static_cast<int>(k))
              .apply(Eigen::Vector3d::Zero());
      const Eigen::Vector3d center_cam =
          scene.frames_[t].gt_pose.apply(center_world);
      seen = center_cam.z() > kZMin;
    }
    if (!seen) {
      throw DegenerateConfig("generate: object " + std::to_string(k) +
                             " behind the camera in every frame");
    }
  }

  for (int t = 0; t + 1 < config.n_frames; ++t) {
    scene.frames_[t].occlusion = gt_flows(scene, t, t + 1).occlusion;
  }
  return scene;
}

GroundTruthFlows gt_flows(const SimScene& scene, int i, int j) {
  const Intrinsics& intr = scene.intrinsics();
  const SimFrame& fi = scene.frames()[i];
  const SimFrame& fj = scene.frames()[j];
  const PixelGrid grid(intr);
  const int w = intr.width;
  const int h = intr.height;

  GroundTruthFlows out;
  out.f_s = static_flow(intr, fi.gt_pose, fj.gt_pose, fi.gt_inv_depth, grid);
  out.f_d = FlowField(w, h);
  out.mask = DynamicMask(w, h, 1.0);
  out.occlusion = Grid2D<uint8_t>(w, h, 0);

  const PoseSE3 c2w_i = fi.gt_pose.inverse();

  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) {
      const int label = fi.gt_label.at(u, v);
      bool o_ok = out.f_s.valid.at(u, v) != 0;
      const Eigen::Vector3d x_world = c2w_i.apply(
          unproject(intr, grid.at(u, v), fi.gt_inv_depth.at(u, v)));
      Eigen::Vector3d moved_world = x_world;

      if (label != 0) {
        out.mask.values.at(u, v) = 0.0;
        const PoseSE3 motion =
            scene.object_to_world(j, label - 1)
                .compose(scene.object_to_world(i, label - 1).inverse());
        moved_world = motion.apply(x_world);
        const Eigen::Vector3d in_j = fj.gt_pose.apply(moved_world);
        if (in_j.z() > kZMin) {
          // Dynamic-flow residual relative to the static-flow prediction.
          const double px = intr.fx * in_j.x() / in_j.z() + intr.cx;
          const double py = intr.fy * in_j.y() / in_j.z() + intr.cy;
          out.f_d.du.at(u, v) = (px - u) - out.f_s.du.at(u, v);
          out.f_d.dv.at(u, v) = (py - v) - out.f_s.dv.at(u, v);
        } else {
          o_ok = false;  // moved point behind the camera
        }
      }
      // Static pixels keep f_d exactly zero so f_o shares f_s's bits.
      out.f_d.valid.at(u, v) = o_ok ? 1 : 0;

      // Occlusion: re-cast the ray in frame j at the moved projection and
      // require the same depth within the tie epsilon.
      const Eigen::Vector3d in_j = fj.gt_pose.apply(moved_world);
      bool occluded = true;
      if (in_j.z() > kZMin) {
        const auto [p, in_bounds] = project(intr, in_j);
        if (in_bounds) {
          const SimScene::Sample s = scene.render_at(j, p.x(), p.y());
          occluded = !s.ok || std::abs(s.depth - in_j.z()) >
                                  kDepthTieEps * std::max(1.0, in_j.z());
        }
      }
      out.occlusion.at(u, v) = occluded ? 1 : 0;
    }
  }

  // Optical flow is defined as the composed sum, so the decomposition
  // identity f_o == f_s + f_d holds bit for bit.
  out.f_o = compose_flow(out.f_s, out.f_d);
  return out;
}

void perturb(FrameGraph& graph, double pose_sigma, double depth_sigma,
             uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (Frame& f : graph.frames()) {
    if (f.fixed) continue;
    if (pose_sigma > 0.0) {
      Vector6d dir;
      for (int k = 0; k < 6; ++k) dir[k] = gauss(rng);
      if (dir.norm() > 0.0) dir *= pose_sigma / dir.norm();
      f.pose = retract(f.pose, Twist(dir));
    }
    if (depth_sigma > 0.0) {
      for (size_t px = 0; px < f.inv_depth.size(); ++px) {
        const double factor =
            std::max(0.1, 1.0 + depth_sigma * gauss(rng));
        f.inv_depth[px] *= factor;
      }
    }
  }
}

FrameGraph graph_from_scene(const SimScene& scene) {
  std::vector<Frame> frames;
  for (int t = 0; t < scene.n_frames(); ++t) {
    const SimFrame& sf = scene.frames()[t];
    Frame f;
    f.id = t;
    f.timestamp = sf.timestamp;
    f.image = sf.image;
    f.pose = sf.gt_pose;
    f.inv_depth = sf.gt_inv_depth;
    frames.push_back(std::move(f));
  }
  return build_window_graph(scene.intrinsics(), std::move(frames),
                            kTemporalWindow);
}

}  // namespace dualvo
