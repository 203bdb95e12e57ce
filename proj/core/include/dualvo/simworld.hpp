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
#pragma once

#include <cstdint>
#include <vector>

#include "dualvo/camera.hpp"
#include "dualvo/dualflow.hpp"
#include "dualvo/framegraph.hpp"
#include "dualvo/grid.hpp"
#include "dualvo/se3.hpp"

namespace dualvo {

// Rigid-motion scene oracle. The world frame coincides with camera 0;
// surfaces carry band-limited analytic textures, so co-visible pixels are
// photometrically consistent to machine precision (no image resampling).

enum class TrajectoryType { kLine, kArc, kOrbit };

struct TrajectorySpec {
  TrajectoryType type = TrajectoryType::kLine;
  Eigen::Vector3d velocity = Eigen::Vector3d(0.05, 0.0, 0.0);  // units/s
  double angular_rate = 0.0;   // rad/s (arc yaw, orbit sweep)
  double orbit_radius = 2.0;   // scene units
  Eigen::Vector3d orbit_center = Eigen::Vector3d(0.0, 0.0, 5.0);
};

// Textured rectangle moving rigidly: pose(t) = Exp(t * velocity) ∘ base.
struct ObjectSpec {
  double extent_x = 1.0;  // full side lengths, scene units
  double extent_y = 1.0;
  PoseSE3 base_pose;      // object-to-world at t = 0
  Twist velocity;         // per-second body motion, applied on the left
};

struct SimConfig {
  int width = 48;
  int height = 64;
  Intrinsics intrinsics;     // if fx == 0, a default is derived from size
  int n_frames = 6;
  double frame_dt = 0.1;     // seconds between frames
  TrajectorySpec trajectory;
  std::vector<ObjectSpec> objects;
  double background_depth = 5.0;            // plane z = depth + tilt
  Eigen::Vector2d background_tilt = {0, 0}; // dz/dx, dz/dy
  uint64_t texture_seed = 7;
  double texture_freq_min = 1.0;  // rad per scene unit
  double texture_freq_max = 8.0;
  double noise_sigma = 0.0;  // pixels; consumed by the oracle provider
};

struct SimFrame {
  Image image;                  // float intensities in [0, 1]
  PoseSE3 gt_pose;              // world-to-camera
  InverseDepthMap gt_inv_depth;
  Grid2D<int> gt_label;         // 0 = static background, k = object k
  Grid2D<uint8_t> occlusion;    // vs the next frame; empty for the last
  double timestamp = 0.0;
};

struct GroundTruthFlows {
  FlowField f_s, f_d, f_o;      // f_o = f_s + f_d holds bit-exact
  DynamicMask mask;             // 0 = dynamic (from rigid-body labels)
  Grid2D<uint8_t> occlusion;    // 1 where the moved point is hidden in j
};

class SimScene {
 public:
  const SimConfig& config() const { return config_; }
  const Intrinsics& intrinsics() const { return intrinsics_; }
  const std::vector<SimFrame>& frames() const { return frames_; }
  int n_frames() const { return static_cast<int>(frames_.size()); }
  uint64_t seed() const { return seed_; }

  PoseSE3 cam_to_world(int frame) const;
  PoseSE3 object_to_world(int frame, int object) const;

  // Continuous re-render: intensity, camera depth, and label at a subpixel
  // coordinate of a frame. ok = some surface is hit in front of the camera.
  struct Sample {
    double intensity = 0.0;
    double depth = 0.0;
    int label = -1;
    bool ok = false;
  };
  Sample render_at(int frame, double x, double y) const;

 private:
  friend SimScene generate(const SimConfig& config, uint64_t seed);

  struct Texture {
    // intensity(a, b) = 0.5 + 0.4 * sum_i amp[i] sin(fa[i] a + fb[i] b + ph[i])
    double amp[6], fa[6], fb[6], ph[6];
    double eval(double a, double b) const;
  };

  Sample cast_ray(int frame, double x, double y) const;

  SimConfig config_;
  Intrinsics intrinsics_;
  uint64_t seed_ = 0;
  std::vector<SimFrame> frames_;
  std::vector<Texture> textures_;  // [0] background, [k] object k
};

// Deterministic for a given (config, seed). Throws DegenerateConfig when an
// object's center sits behind the camera in every frame.
SimScene generate(const SimConfig& config, uint64_t seed);

// Exact flow decomposition between frames i and j. f_s follows the library
// reprojection path on ground-truth pose/depth; f_o is defined as
// f_s + f_d so the additivity identity is exact by construction.
GroundTruthFlows gt_flows(const SimScene& scene, int i, int j);

// Composes free poses with random unit twists of norm pose_sigma and scales
// depths by (1 + N(0, depth_sigma)); fixed frames are left untouched.
void perturb(FrameGraph& graph, double pose_sigma, double depth_sigma,
             uint64_t seed);

// Window-3 frame graph over all scene frames with ground-truth state.
FrameGraph graph_from_scene(const SimScene& scene);

}  // namespace dualvo
