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

#include <memory>
#include <vector>

#include "dualvo/dba.hpp"
#include "dualvo/dualflow.hpp"
#include "dualvo/framegraph.hpp"
#include "dualvo/photometric.hpp"
#include "dualvo/simworld.hpp"
#include "dualvo/traj_eval.hpp"

namespace dualvo {

enum class TargetProviderKind { kOracle, kCorrelation };

struct UpdateConfig {
  double mu = 0.5;       // artificial-mask threshold, pixels
  double eta = 10.0;     // confidence mask boost
  int radius = 3;        // correlation lookup radius
  TargetProviderKind provider = TargetProviderKind::kOracle;
  double noise_sigma = 0.0;  // oracle target noise, pixels
  int max_outer_iters = 8;
  double step_tol = 1e-8;
  uint64_t seed = 0;
  bool single_flow = false;  // ablation: mask == 1, dynamic flow == 0
  double oracle_logit = 0.0;
  double damping = 1e-4;
  double depth_prior_weight = 1e-3;
  bool invert_mask_logit = false;
  LossConfig loss;
};

// Measured optical-flow correspondences plus confidence logits for one
// edge, from either the simulator (with optional frozen noise) or the
// correlation-volume refiner seeded at the current reprojection.
class TargetProvider {
 public:
  virtual ~TargetProvider() = default;
  virtual std::pair<CorrespondenceField, Grid2D<double>> acquire(
      const FrameGraph& graph, const Edge& edge) = 0;
};

class OracleProvider : public TargetProvider {
 public:
  OracleProvider(const SimScene* scene, double noise_sigma, uint64_t seed,
                 double logit);
  std::pair<CorrespondenceField, Grid2D<double>> acquire(
      const FrameGraph& graph, const Edge& edge) override;

 private:
  const SimScene* scene_;
  double noise_sigma_;
  uint64_t seed_;
  double logit_;
};

class CorrelationProvider : public TargetProvider {
 public:
  explicit CorrelationProvider(int radius, int feature_dim = 25);
  std::pair<CorrespondenceField, Grid2D<double>> acquire(
      const FrameGraph& graph, const Edge& edge) override;

 private:
  int radius_;
  int feature_dim_;
};

struct OuterIteration {
  int iter = 0;
  double cost_before = 0.0;
  double cost_after = 0.0;
  double max_twist_norm = 0.0;
  double damping = 0.0;
  IterationLosses losses;
};

struct RunResult {
  Trajectory trajectory;  // camera-to-world, one entry per frame
  std::vector<OuterIteration> iterations;
  bool converged = false;
};

// Mutable solver state: the graph carries poses, depths, and per-edge
// targets/masks/flows; the provider supplies measurements.
class SolverState {
 public:
  SolverState(FrameGraph graph, UpdateConfig config,
              std::shared_ptr<TargetProvider> provider);

  const FrameGraph& graph() const { return graph_; }
  FrameGraph& graph() { return graph_; }
  const UpdateConfig& config() const { return config_; }
  int iteration() const { return iteration_; }
  double damping() const { return damping_; }

  // One outer iteration: per edge, (1) current static correspondence,
  // (2) measured targets, (3) dynamic flow = measured - static, (4) mask
  // update by the (median-compensated) artificial rule, (5) static BA
  // target = measured - masked dynamic flow, (6) combined confidence via
  // the mask, (7) a single damped DBA step; then the stored decomposition
  // is refreshed against the updated state.
  OuterIteration iterate_once();

  // Repeats iterate_once until the DBA step drops below step_tol or
  // max_outer_iters is reached.
  RunResult run();

  Trajectory trajectory() const;  // camera-to-world from current poses

 private:
  void refresh_edge_outputs();
  IterationLosses compute_losses() const;

  FrameGraph graph_;
  UpdateConfig config_;
  std::shared_ptr<TargetProvider> provider_;
  int iteration_ = 0;
  double damping_ = 1e-4;
  int forced_increases_ = 0;
};

// Builds the provider named by the config; oracle mode requires a scene.
std::shared_ptr<TargetProvider> make_provider(const UpdateConfig& config,
                                              const SimScene* scene);

}  // namespace dualvo
