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

#include "dualvo/camera.hpp"
#include "dualvo/grid.hpp"
#include "dualvo/se3.hpp"

namespace dualvo {

class FrameGraph;

// H x W pixel-displacement field. Scene motion decomposes as
// optical = static + dynamic; all three share this representation.
struct FlowField {
  Grid2D<double> du, dv;
  Grid2D<uint8_t> valid;

  FlowField() = default;
  FlowField(int w, int h)
      : du(w, h, 0.0), dv(w, h, 0.0), valid(w, h, 1) {}

  int width() const { return du.width(); }
  int height() const { return du.height(); }
};

// Per-pixel mask in [0, 1]; 0 marks dynamic, 1 marks static. Values stay
// continuous and are binarized at 0.5 only at aggregation/loss boundaries.
struct DynamicMask {
  Grid2D<double> values;

  DynamicMask() = default;
  DynamicMask(int w, int h, double fill = 1.0) : values(w, h, fill) {}

  int width() const { return values.width(); }
  int height() const { return values.height(); }

  bool static_at(int u, int v) const { return values.at(u, v) >= 0.5; }
};

// Pixelwise minimum over the binarized masks of all edges leaving a frame.
struct AggregatedMask {
  Grid2D<uint8_t> values;  // 1 = static, 0 = dynamic

  AggregatedMask() = default;
  AggregatedMask(int w, int h, uint8_t fill = 1) : values(w, h, fill) {}

  int width() const { return values.width(); }
  int height() const { return values.height(); }
};

// Elementwise F_s + F_d; valid where both inputs are valid.
FlowField compose_flow(const FlowField& f_s, const FlowField& f_d);

// Camera-induced flow: reproject(relative(g_i, g_j), d_i) - grid.
FlowField static_flow(const Intrinsics& intr, const PoseSE3& g_i,
                      const PoseSE3& g_j, const InverseDepthMap& d_i,
                      const PixelGrid& grid);

FlowField flow_from_correspondence(const CorrespondenceField& corr,
                                   const PixelGrid& grid);

// F_o - F_s, the object-induced remainder of the scene motion.
FlowField dynamic_residual(const FlowField& f_o, const FlowField& f_s);

// Self-supervised mask label: static (1) where the geometric target
// p_cam = reproject(g_ij, d_i) and the flow target p_flow = grid + f_o
// agree within mu pixels. Pixels whose reprojection has no valid depth
// are labeled dynamic.
DynamicMask artificial_mask(const Intrinsics& intr, const PoseSE3& g_ij,
                            const InverseDepthMap& d_i, const FlowField& f_o,
                            const PixelGrid& grid, double mu);

// Gathers the masks of every edge leaving frame_id (those live on this
// frame's pixel grid) and takes the pixelwise minimum after binarization.
AggregatedMask mask_agg(const FrameGraph& graph, int frame_id);

// Bilinear sample of img_j at the correspondence coordinates. A pixel is
// valid only if the correspondence is valid and all four taps are inside.
std::pair<Image, Grid2D<uint8_t>> warp_image(const Image& img_j,
                                             const CorrespondenceField& corr);

}  // namespace dualvo
