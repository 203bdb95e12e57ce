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
#include "dualvo/se3.hpp"

#include <cmath>

namespace dualvo {

namespace {
// Taylor switchover. Below this angle the closed-form coefficients lose
// too many bits to cancellation; the quartic truncation error at 1e-4 is
// ~1e-19, far below the 1e-9 round-trip contract.
constexpr double kSmallAngle = 1e-4;
}

Eigen::Matrix3d skew(const Eigen::Vector3d& w) {
  Eigen::Matrix3d m;
  m << 0.0, -w.z(), w.y(),
       w.z(), 0.0, -w.x(),
      -w.y(), w.x(), 0.0;
  return m;
}

Matrix6d PoseSE3::adjoint() const {
  Matrix6d ad = Matrix6d::Zero();
  const Eigen::Matrix3d r = rotation_matrix();
  ad.topLeftCorner<3, 3>() = r;
  ad.bottomRightCorner<3, 3>() = r;
  ad.bottomLeftCorner<3, 3>() = skew(t_) * r;
  return ad;
}

PoseSE3 exp(const Twist& xi) {
  const double theta2 = xi.omega.squaredNorm();
  const double theta = std::sqrt(theta2);

  Eigen::Quaterniond q;
  double b;  // (1 - cos t) / t^2
  double c;  // (t - sin t) / t^3
  if (theta < kSmallAngle) {
    // sin(t/2)/t = 1/2 - t^2/48 + O(t^4); cos(t/2) = 1 - t^2/8 + O(t^4)
    const double half_sinc = 0.5 - theta2 / 48.0;
    q = Eigen::Quaterniond(1.0 - theta2 / 8.0, half_sinc * xi.omega.x(),
                           half_sinc * xi.omega.y(), half_sinc * xi.omega.z());
    b = 0.5 - theta2 / 24.0;
    c = 1.0 / 6.0 - theta2 / 120.0;
  } else {
    const double half = 0.5 * theta;
    const double sh = std::sin(half);
    const double s = sh / theta;
    q = Eigen::Quaterniond(std::cos(half), s * xi.omega.x(),
                           s * xi.omega.y(), s * xi.omega.z());
    // 1 - cos t = 2 sin^2(t/2): no cancellation for small t.
    b = 2.0 * sh * sh / theta2;
    c = (theta - std::sin(theta)) / (theta2 * theta);
  }

  const Eigen::Matrix3d w = skew(xi.omega);
  const Eigen::Matrix3d v_mat =
      Eigen::Matrix3d::Identity() + b * w + c * (w * w);
  return PoseSE3(q, v_mat * xi.v);
}

Twist log(const PoseSE3& g) {
  Eigen::Quaterniond q = g.rotation();
  if (q.w() < 0.0) q.coeffs() = -q.coeffs();

  const double n = q.vec().norm();
  const double theta = 2.0 * std::atan2(n, q.w());
  if (theta >= M_PI - 1e-6) {
    throw AngleNearPi("log: rotation angle " + std::to_string(theta) +
                      " within 1e-6 of pi");
  }

  Eigen::Vector3d omega;
  if (n < kSmallAngle) {
    // theta/sin(theta/2) -> 2 as theta -> 0
    omega = (2.0 / q.w()) * q.vec();
  } else {
    omega = (theta / n) * q.vec();
  }

  const double theta2 = omega.squaredNorm();
  double d;  // coefficient of [w]x^2 in V^{-1}
  if (theta2 < kSmallAngle * kSmallAngle) {
    d = 1.0 / 12.0 + theta2 / 720.0;
  } else {
    // d = (1 - (t/2) cot(t/2)) / t^2, which keeps the cancellation at the
    // eps level instead of amplifying it by 1/t^2.
    const double t = std::sqrt(theta2);
    const double half = 0.5 * t;
    d = (1.0 - half * std::cos(half) / std::sin(half)) / theta2;
  }
  const Eigen::Matrix3d w = skew(omega);
  const Eigen::Matrix3d v_inv =
      Eigen::Matrix3d::Identity() - 0.5 * w + d * (w * w);
  return Twist(omega, v_inv * g.translation());
}

PoseSE3 retract(const PoseSE3& g, const Twist& dxi) {
  const PoseSE3 inc = exp(dxi);
  PoseSE3 out = inc.compose(g);
  return out.renormalized();
}

PoseSE3 relative(const PoseSE3& g_i, const PoseSE3& g_j) {
  return g_j.compose(g_i.inverse());
}

}  // namespace dualvo
