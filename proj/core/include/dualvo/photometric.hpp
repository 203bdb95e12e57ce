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

#include <map>
#include <vector>

#include "dualvo/dualflow.hpp"
#include "dualvo/framegraph.hpp"
#include "dualvo/grid.hpp"

namespace dualvo {

// Loss weights and stabilizers. All evaluation runs in double precision
// so thresholds stay reproducible.
struct LossConfig {
  double alpha = 0.85;
  double lambda1 = 100.0;  // geometry photometric
  double lambda2 = 5.0;    // flow photometric
  double lambda3 = 0.05;   // mask
  double gamma = 0.9;      // per-iteration weighting, last iteration = 1
  int ssim_window = 7;
  double ssim_c1 = 0.01 * 0.01;
  double ssim_c2 = 0.03 * 0.03;
};

// Windowed SSIM map with a uniform window (partial at the borders).
// ssim(I, I) = 1 everywhere, including constant images.
Image ssim(const Image& a, const Image& b, int window = 7);

// pe(a, b) = alpha/2 (1 - SSIM) + (1 - alpha) |a - b|, elementwise.
Image pe_geo(const Image& a, const Image& b, double alpha = 0.85,
             int window = 7);

double pe_geo_mean(const Image& a, const Image& b, double alpha = 0.85,
                   int window = 7);

// Analytic gradient of pe_geo_mean w.r.t. image b (the warped image);
// used by the finite-difference check suite.
Image pe_geo_mean_grad_b(const Image& a, const Image& b, double alpha = 0.85,
                         int window = 7);

struct GeoPhotoResult {
  double loss = 0.0;
  size_t static_pixels = 0;  // N' summed over edges
  int empty_edges = 0;       // edges whose aggregated mask was all-dynamic
};

// Masked mean of pe over static pixels across all edges: each edge warps
// I_j to frame i via the current reprojection and is masked by frame i's
// aggregated mask. Edges with N' = 0 contribute nothing and are flagged.
GeoPhotoResult geo_photo_loss(const FrameGraph& graph,
                              const std::map<int, AggregatedMask>& masks,
                              const LossConfig& cfg = {});

// Mean L1 between I_i and I_j warped by the edge's optical flow, over
// valid warped pixels of all edges.
double flow_photo_loss(const FrameGraph& graph);

// Mean binary cross-entropy; predictions clamped to [1e-7, 1 - 1e-7].
double mask_ce_loss(const DynamicMask& pred, const DynamicMask& label);

// d(mask_ce_loss)/d(pred); zero where the clamp is active.
Grid2D<double> mask_ce_grad(const DynamicMask& pred, const DynamicMask& label);

double artificial_mask_loss(const DynamicMask& pred, const Intrinsics& intr,
                            const PoseSE3& g_ij, const InverseDepthMap& d_i,
                            const FlowField& f_o, const PixelGrid& grid,
                            double mu = 0.5);

struct IterationLosses {
  double geo = 0.0;
  double flow = 0.0;
  double mask = 0.0;
};

// sum_k gamma^(K-1-k) (lambda1 geo_k + lambda2 flow_k + lambda3 mask_k);
// the final iteration carries weight gamma^0 = 1.
double total_self_sup_loss(const std::vector<IterationLosses>& per_iteration,
                           const LossConfig& cfg = {});

// CSV dump: "iter,geo,flow,mask,total".
std::string loss_log_csv(const std::vector<IterationLosses>& per_iteration,
                         const LossConfig& cfg = {});

}  // namespace dualvo
