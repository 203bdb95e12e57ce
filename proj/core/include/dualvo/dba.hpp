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

#include <vector>

#include "dualvo/dualflow.hpp"
#include "dualvo/framegraph.hpp"

namespace dualvo {

// Combined confidence w_d = sigmoid(w + (1 - M) * eta): dynamic pixels
// receive the eta logit boost.
// Strictly inside (0,1), so no valid pixel is ever zeroed out entirely.
struct ConfidenceMap {
  Grid2D<double> logits;
  Grid2D<double> combined;
};

double sigmoid(double x);

ConfidenceMap combine_confidence(const Grid2D<double>& logits,
                                 const DynamicMask& mask, double eta);

struct BAOptions {
  double eta = 10.0;                 // dynamic-mask logit boost
  double damping = 1e-4;             // Levenberg diagonal, x10/÷2 schedule
  double depth_prior_weight = 1e-3;  // zero-mean prior on depth increments
  int max_iters = 20;
  double step_tol = 1e-8;            // max twist norm stopping criterion
  // Flips the mask term to sigmoid(w + M*eta) for the weighting ablation.
  bool invert_mask_logit = false;
  double depth_min = 1e-4;
  double depth_max = 1e4;
};

// Dense bundle adjustment over a graph snapshot. The graph supplies edges
// (targets, confidences, masks) and the initial state; poses of fixed
// frames are never modified. Requires at least two fixed frames (gauge).
struct BAProblem {
  const FrameGraph* graph = nullptr;
  BAOptions opts;

  BAProblem() = default;
  explicit BAProblem(const FrameGraph& g, BAOptions o = {})
      : graph(&g), opts(o) {}
};

// Optimization state: poses and inverse depths indexed like graph.frames().
struct BAState {
  std::vector<PoseSE3> poses;
  std::vector<InverseDepthMap> inv_depths;

  static BAState from_graph(const FrameGraph& graph);
};

struct BAStep {
  std::vector<Twist> pose_increments;           // zero for fixed frames
  std::vector<Grid2D<double>> depth_increments;
  double max_twist_norm = 0.0;
};

struct IterationRecord {
  int iter = 0;
  double cost = 0.0;
  double max_twist_norm = 0.0;
  double damping = 0.0;
};

struct SolveResult {
  std::vector<PoseSE3> poses;
  std::vector<InverseDepthMap> inv_depths;
  std::vector<IterationRecord> log;
  bool converged = false;
  double final_cost = 0.0;
};

// Residual fields target - reproject(state), one per edge in graph order.
// Invalid pixels carry zero residual and valid = 0.
std::vector<FlowField> residuals(const BAProblem& problem,
                                 const BAState& state);

double total_cost(const BAProblem& problem, const BAState& state);

// One damped Gauss-Newton step: weighted normal equations from the
// reprojection Jacobians, per-pixel Schur elimination of the inverse
// depths, dense symmetric solve of the reduced pose system, depth
// back-substitution. Throws SingularSystem if the reduced system is not
// positive definite after damping.
BAStep gauss_newton_step(const BAProblem& problem, const BAState& state,
                         double damping);
BAStep gauss_newton_step(const BAProblem& problem);

// Applies a step: left retraction on free poses, clamped additive depth
// update. Throws if a nonzero twist targets a fixed frame.
BAState apply_step(const FrameGraph& graph, const BAState& state,
                   const BAStep& step, const BAOptions& opts);

// Damped iteration of gauss_newton_step until max twist norm < step_tol
// or max_iters. Rejected steps raise damping x10; accepted steps halve it.
// Throws Diverged when cost rises on 3 consecutive force-accepted steps.
SolveResult solve(const BAProblem& problem);

// CSV dump of the iteration log: "iter,cost,max_twist_norm,damping".
std::string iteration_log_csv(const std::vector<IterationRecord>& log);

}  // namespace dualvo
