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

#include <Eigen/Core>
#include <vector>

#include "dualvo/grid.hpp"
#include "dualvo/se3.hpp"

namespace dualvo {

// Minimum camera-frame depth for a projection to count as valid.
constexpr double kZMin = 1e-4;

struct Intrinsics {
  double fx = 0.0, fy = 0.0;  // focal lengths, pixels
  double cx = 0.0, cy = 0.0;  // principal point, pixels
  int width = 0, height = 0;

  bool valid() const {
    return fx > 0.0 && fy > 0.0 && cx > 0.0 && cx < width && cy > 0.0 &&
           cy < height;
  }
};

// Canonical pixel grid: coords(u, v) = (u, v), integer coordinates are
// pixel centers. Storage-free; the invariant is enforced by construction.
struct PixelGrid {
  int width = 0;
  int height = 0;

  PixelGrid() = default;
  PixelGrid(int w, int h) : width(w), height(h) {}
  explicit PixelGrid(const Intrinsics& intr)
      : width(intr.width), height(intr.height) {}

  Eigen::Vector2d at(int u, int v) const {
    return Eigen::Vector2d(static_cast<double>(u), static_cast<double>(v));
  }
};

// Dense pixel correspondences into a target frame. Coordinates are kept
// even when a pixel falls outside the image so flows stay well-defined;
// valid = camera-frame depth > kZMin AND coords inside image bounds.
struct CorrespondenceField {
  Grid2D<double> u, v;
  Grid2D<uint8_t> valid;

  CorrespondenceField() = default;
  CorrespondenceField(int w, int h)
      : u(w, h, 0.0), v(w, h, 0.0), valid(w, h, 0) {}

  int width() const { return u.width(); }
  int height() const { return u.height(); }
};

// Per-pixel derivatives of the reprojected coordinate. Pose columns follow
// the [omega; v] twist packing (left perturbation of g_ij); rows are (u, v).
struct ReprojectionJacobians {
  std::vector<Eigen::Matrix<double, 2, 6>> pose;   // row-major, v * W + u
  std::vector<Eigen::Vector2d> depth;
  Grid2D<uint8_t> valid;  // mirrors the correspondence validity

  int width() const { return valid.width(); }
  int height() const { return valid.height(); }
};

Eigen::Vector3d unproject(const Intrinsics& intr, const Eigen::Vector2d& p,
                          double inv_depth);

// Pinhole projection. The flag reports Z > kZMin and in-bounds coordinates;
// behind-camera points return (0, 0) with valid = false.
std::pair<Eigen::Vector2d, bool> project(const Intrinsics& intr,
                                         const Eigen::Vector3d& x);

CorrespondenceField reproject(const Intrinsics& intr, const PoseSE3& g_ij,
                              const InverseDepthMap& inv_depth,
                              const PixelGrid& grid);

ReprojectionJacobians reproject_jacobians(const Intrinsics& intr,
                                          const PoseSE3& g_ij,
                                          const InverseDepthMap& inv_depth,
                                          const PixelGrid& grid);

// Single-pixel kernel shared by reproject, its Jacobians, and the DBA
// assembly. Returns false when d <= 0 or the transformed depth is <= kZMin;
// in that case coords are the identity fallback (u, v).
struct PixelReprojection {
  Eigen::Vector2d coords;
  bool z_valid = false;     // transformed depth > kZMin and d > 0
  bool in_bounds = false;
  Eigen::Matrix<double, 2, 6> j_pose;
  Eigen::Vector2d j_depth;
};
PixelReprojection reproject_pixel(const Intrinsics& intr,
                                  const Eigen::Matrix3d& rot,
                                  const Eigen::Vector3d& trans, int u, int v,
                                  double inv_depth, bool with_jacobians);

}  // namespace dualvo
