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
#include "dualvo/dualflow.hpp"

#include <cmath>

#include "dualvo/framegraph.hpp"

namespace dualvo {

FlowField compose_flow(const FlowField& f_s, const FlowField& f_d) {
  require_same_shape(f_s.du, f_d.du, "compose_flow");
  FlowField out(f_s.width(), f_s.height());
  for (size_t i = 0; i < f_s.du.size(); ++i) {
    out.du[i] = f_s.du[i] + f_d.du[i];
    out.dv[i] = f_s.dv[i] + f_d.dv[i];
    out.valid[i] = f_s.valid[i] && f_d.valid[i];
  }
  return out;
}

FlowField flow_from_correspondence(const CorrespondenceField& corr,
                                   const PixelGrid& grid) {
  if (corr.width() != grid.width || corr.height() != grid.height) {
    throw ShapeMismatch("flow_from_correspondence: grid size differs");
  }
  FlowField out(corr.width(), corr.height());
  for (int v = 0; v < corr.height(); ++v) {
    for (int u = 0; u < corr.width(); ++u) {
      out.du.at(u, v) = corr.u.at(u, v) - u;
      out.dv.at(u, v) = corr.v.at(u, v) - v;
      out.valid.at(u, v) = corr.valid.at(u, v);
    }
  }
  return out;
}

FlowField static_flow(const Intrinsics& intr, const PoseSE3& g_i,
                      const PoseSE3& g_j, const InverseDepthMap& d_i,
                      const PixelGrid& grid) {
  const CorrespondenceField corr =
      reproject(intr, relative(g_i, g_j), d_i, grid);
  return flow_from_correspondence(corr, grid);
}

FlowField dynamic_residual(const FlowField& f_o, const FlowField& f_s) {
  require_same_shape(f_o.du, f_s.du, "dynamic_residual");
  FlowField out(f_o.width(), f_o.height());
  for (size_t i = 0; i < f_o.du.size(); ++i) {
    out.du[i] = f_o.du[i] - f_s.du[i];
    out.dv[i] = f_o.dv[i] - f_s.dv[i];
    out.valid[i] = f_o.valid[i] && f_s.valid[i];
  }
  return out;
}

DynamicMask artificial_mask(const Intrinsics& intr, const PoseSE3& g_ij,
                            const InverseDepthMap& d_i, const FlowField& f_o,
                            const PixelGrid& grid, double mu) {
  if (!(mu > 0.0)) {
    throw Error("artificial_mask: mu must be positive, got " +
                std::to_string(mu));
  }
  require_same_shape(d_i, f_o.du, "artificial_mask");

  DynamicMask mask(grid.width, grid.height, 0.0);
  const Eigen::Matrix3d rot = g_ij.rotation_matrix();
  const Eigen::Vector3d trans = g_ij.translation();
  for (int v = 0; v < grid.height; ++v) {
    for (int u = 0; u < grid.width; ++u) {
      const PixelReprojection r = reproject_pixel(
          intr, rot, trans, u, v, d_i.at(u, v), /*with_jacobians=*/false);
      if (!r.z_valid) continue;  // geometry cannot vouch for this pixel
      const double dx = r.coords.x() - (u + f_o.du.at(u, v));
      const double dy = r.coords.y() - (v + f_o.dv.at(u, v));
      mask.values.at(u, v) = (std::sqrt(dx * dx + dy * dy) <= mu) ? 1.0 : 0.0;
    }
  }
  return mask;
}

AggregatedMask mask_agg(const FrameGraph& graph, int frame_id) {
  const std::vector<const Edge*> edges = graph.edges_from(frame_id);
  const Edge* first_with_mask = nullptr;
  for (const Edge* e : edges) {
    if (e->mask.width() > 0) {
      first_with_mask = e;
      break;
    }
  }
  if (first_with_mask == nullptr) {
    throw NoIncidentEdges("mask_agg: frame " + std::to_string(frame_id) +
                          " has no incident edge with a mask");
  }

  AggregatedMask agg(first_with_mask->mask.width(),
                     first_with_mask->mask.height(), 1);
  for (const Edge* e : edges) {
    if (e->mask.width() == 0) continue;
    require_same_shape(agg.values, e->mask.values, "mask_agg");
    for (size_t i = 0; i < agg.values.size(); ++i) {
      const uint8_t bin = e->mask.values[i] >= 0.5 ? 1 : 0;
      if (bin < agg.values[i]) agg.values[i] = bin;
    }
  }
  return agg;
}

std::pair<Image, Grid2D<uint8_t>> warp_image(const Image& img_j,
                                             const CorrespondenceField& corr) {
  Image out(corr.width(), corr.height(), 0.0);
  Grid2D<uint8_t> valid(corr.width(), corr.height(), 0);
  const int w = img_j.width();
  const int h = img_j.height();
  for (int v = 0; v < corr.height(); ++v) {
    for (int u = 0; u < corr.width(); ++u) {
      if (!corr.valid.at(u, v)) continue;
      double x = corr.u.at(u, v);
      double y = corr.v.at(u, v);
      // Snap rounding noise at the border back onto it.
      if (x > -1e-9 && x < 0.0) x = 0.0;
      if (x > w - 1.0 && x < w - 1.0 + 1e-9) x = w - 1.0;
      if (y > -1e-9 && y < 0.0) y = 0.0;
      if (y > h - 1.0 && y < h - 1.0 + 1e-9) y = h - 1.0;
      const int x0 = static_cast<int>(std::floor(x));
      const int y0 = static_cast<int>(std::floor(y));
      const double fx = x - x0;
      const double fy = y - y0;
      // Taps collapse on exact integer coordinates, so the image border is
      // sampleable there; any genuinely out-of-bounds tap invalidates the
      // pixel instead of clamping.
      const int x1 = (fx > 0.0) ? x0 + 1 : x0;
      const int y1 = (fy > 0.0) ? y0 + 1 : y0;
      if (x0 < 0 || y0 < 0 || x1 > w - 1 || y1 > h - 1) continue;
      const double i00 = img_j.at(x0, y0);
      const double i10 = img_j.at(x1, y0);
      const double i01 = img_j.at(x0, y1);
      const double i11 = img_j.at(x1, y1);
      out.at(u, v) = (1.0 - fy) * ((1.0 - fx) * i00 + fx * i10) +
                     fy * ((1.0 - fx) * i01 + fx * i11);
      valid.at(u, v) = 1;
    }
  }
  return {out, valid};
}

}  // namespace dualvo
