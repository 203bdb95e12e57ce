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
#include "dualvo/camera.hpp"

#include <cmath>

namespace dualvo {

namespace {

// Tolerance so that reprojections landing on the image border up to
// rounding noise (e.g. the identity pose) still count as in-bounds.
constexpr double kBoundsEps = 1e-9;

bool coords_in_bounds(const Intrinsics& intr, const Eigen::Vector2d& p) {
  return p.x() >= -kBoundsEps && p.x() <= intr.width - 1.0 + kBoundsEps &&
         p.y() >= -kBoundsEps && p.y() <= intr.height - 1.0 + kBoundsEps;
}

}  // namespace

Eigen::Vector3d unproject(const Intrinsics& intr, const Eigen::Vector2d& p,
                          double inv_depth) {
  if (!(inv_depth > 0.0)) {
    throw NonPositiveInverseDepth("unproject: inverse depth " +
                                  std::to_string(inv_depth));
  }
  const double z = 1.0 / inv_depth;
  return Eigen::Vector3d((p.x() - intr.cx) / intr.fx * z,
                         (p.y() - intr.cy) / intr.fy * z, z);
}

std::pair<Eigen::Vector2d, bool> project(const Intrinsics& intr,
                                         const Eigen::Vector3d& x) {
  if (!(x.z() > kZMin)) {
    return {Eigen::Vector2d::Zero(), false};
  }
  const Eigen::Vector2d p(intr.fx * x.x() / x.z() + intr.cx,
                          intr.fy * x.y() / x.z() + intr.cy);
  return {p, coords_in_bounds(intr, p)};
}

PixelReprojection reproject_pixel(const Intrinsics& intr,
                                  const Eigen::Matrix3d& rot,
                                  const Eigen::Vector3d& trans, int u, int v,
                                  double inv_depth, bool with_jacobians) {
  PixelReprojection out;
  out.coords = Eigen::Vector2d(u, v);
  out.j_pose.setZero();
  out.j_depth.setZero();
  if (!(inv_depth > 0.0)) return out;

  // Ray through the pixel at unit depth; the 3D point is ray / d.
  const Eigen::Vector3d ray((u - intr.cx) / intr.fx, (v - intr.cy) / intr.fy,
                            1.0);
  const Eigen::Vector3d x_j = rot * (ray / inv_depth) + trans;
  if (!(x_j.z() > kZMin)) return out;

  out.z_valid = true;
  const double inv_z = 1.0 / x_j.z();
  out.coords = Eigen::Vector2d(intr.fx * x_j.x() * inv_z + intr.cx,
                               intr.fy * x_j.y() * inv_z + intr.cy);
  out.in_bounds = coords_in_bounds(intr, out.coords);

  if (with_jacobians) {
    Eigen::Matrix<double, 2, 3> dproj;
    dproj << intr.fx * inv_z, 0.0, -intr.fx * x_j.x() * inv_z * inv_z,
             0.0, intr.fy * inv_z, -intr.fy * x_j.y() * inv_z * inv_z;
    // Left perturbation of g_ij: dx/domega = -[x_j]x, dx/dv = I.
    out.j_pose.block<2, 3>(0, 0) = -dproj * skew(x_j);
    out.j_pose.block<2, 3>(0, 3) = dproj;
    out.j_depth =
        dproj * (rot * ray) * (-1.0 / (inv_depth * inv_depth));
  }
  return out;
}

CorrespondenceField reproject(const Intrinsics& intr, const PoseSE3& g_ij,
                              const InverseDepthMap& inv_depth,
                              const PixelGrid& grid) {
  if (grid.width != inv_depth.width() || grid.height != inv_depth.height()) {
    throw ShapeMismatch("reproject: grid " + std::to_string(grid.width) + "x" +
                        std::to_string(grid.height) + " vs depth " +
                        std::to_string(inv_depth.width()) + "x" +
                        std::to_string(inv_depth.height()));
  }
  CorrespondenceField field(grid.width, grid.height);
  const Eigen::Matrix3d rot = g_ij.rotation_matrix();
  const Eigen::Vector3d trans = g_ij.translation();
  for (int v = 0; v < grid.height; ++v) {
    for (int u = 0; u < grid.width; ++u) {
      const PixelReprojection r = reproject_pixel(
          intr, rot, trans, u, v, inv_depth.at(u, v), /*with_jacobians=*/false);
      field.u.at(u, v) = r.coords.x();
      field.v.at(u, v) = r.coords.y();
      field.valid.at(u, v) = (r.z_valid && r.in_bounds) ? 1 : 0;
    }
  }
  return field;
}

ReprojectionJacobians reproject_jacobians(const Intrinsics& intr,
                                          const PoseSE3& g_ij,
                                          const InverseDepthMap& inv_depth,
                                          const PixelGrid& grid) {
  if (grid.width != inv_depth.width() || grid.height != inv_depth.height()) {
    throw ShapeMismatch("reproject_jacobians: shape mismatch");
  }
  ReprojectionJacobians jac;
  jac.pose.resize(static_cast<size_t>(grid.width) * grid.height,
                  Eigen::Matrix<double, 2, 6>::Zero());
  jac.depth.resize(static_cast<size_t>(grid.width) * grid.height,
                   Eigen::Vector2d::Zero());
  jac.valid = Grid2D<uint8_t>(grid.width, grid.height, 0);

  const Eigen::Matrix3d rot = g_ij.rotation_matrix();
  const Eigen::Vector3d trans = g_ij.translation();
  for (int v = 0; v < grid.height; ++v) {
    for (int u = 0; u < grid.width; ++u) {
      const size_t i = static_cast<size_t>(v) * grid.width + u;
      const PixelReprojection r = reproject_pixel(
          intr, rot, trans, u, v, inv_depth.at(u, v), /*with_jacobians=*/true);
      if (r.z_valid && r.in_bounds) {
        jac.pose[i] = r.j_pose;
        jac.depth[i] = r.j_depth;
        jac.valid.at(u, v) = 1;
      }
    }
  }
  return jac;
}

}  // namespace dualvo
