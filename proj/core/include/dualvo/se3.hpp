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
#include <Eigen/Geometry>

#include "dualvo/errors.hpp"

namespace dualvo {

using Vector6d = Eigen::Matrix<double, 6, 1>;
using Matrix6d = Eigen::Matrix<double, 6, 6>;

// Tangent-space increment. Packed order is [omega; v]: rotation first,
// matching the Jacobian column layout used everywhere downstream.
struct Twist {
  Eigen::Vector3d omega = Eigen::Vector3d::Zero();  // radians
  Eigen::Vector3d v = Eigen::Vector3d::Zero();      // scene units

  Twist() = default;
  Twist(const Eigen::Vector3d& omega_, const Eigen::Vector3d& v_)
      : omega(omega_), v(v_) {}
  explicit Twist(const Vector6d& xi) : omega(xi.head<3>()), v(xi.tail<3>()) {}

  Vector6d vector() const {
    Vector6d xi;
    xi << omega, v;
    return xi;
  }

  double norm() const { return vector().norm(); }
};

// Rigid transform stored as unit quaternion + translation. Acts on points
// as x -> q * x + t. Poses in this codebase are world-to-camera.
class PoseSE3 {
 public:
  PoseSE3()
      : q_(Eigen::Quaterniond::Identity()), t_(Eigen::Vector3d::Zero()) {}
  PoseSE3(const Eigen::Quaterniond& q, const Eigen::Vector3d& t)
      : q_(q.normalized()), t_(t) {}

  static PoseSE3 identity() { return PoseSE3(); }

  const Eigen::Quaterniond& rotation() const { return q_; }
  const Eigen::Vector3d& translation() const { return t_; }

  Eigen::Vector3d apply(const Eigen::Vector3d& x) const { return q_ * x + t_; }
  Eigen::Vector3d operator*(const Eigen::Vector3d& x) const {
    return apply(x);
  }

  PoseSE3 compose(const PoseSE3& other) const {
    // this ∘ other: first apply other, then this.
    return PoseSE3(q_ * other.q_, q_ * other.t_ + t_);
  }
  PoseSE3 operator*(const PoseSE3& other) const { return compose(other); }

  PoseSE3 inverse() const {
    Eigen::Quaterniond qi = q_.conjugate();
    return PoseSE3(qi, -(qi * t_));
  }

  Eigen::Matrix3d rotation_matrix() const { return q_.toRotationMatrix(); }

  Eigen::Matrix4d matrix() const {
    Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
    m.topLeftCorner<3, 3>() = rotation_matrix();
    m.topRightCorner<3, 1>() = t_;
    return m;
  }

  // Adjoint in [omega; v] packing: Ad(G) = [[R, 0], [[t]x R, R]], so that
  // G * Exp(xi) = Exp(Ad(G) xi) * G.
  Matrix6d adjoint() const;

  PoseSE3 renormalized() const {
    return PoseSE3(Eigen::Quaterniond(q_.coeffs().normalized()), t_);
  }

 private:
  // Raw constructor used internally once the quaternion is known unit-norm.
  struct RawTag {};
  PoseSE3(const Eigen::Quaterniond& q, const Eigen::Vector3d& t, RawTag)
      : q_(q), t_(t) {}

  Eigen::Quaterniond q_;
  Eigen::Vector3d t_;

  friend PoseSE3 exp(const Twist& xi);
  friend PoseSE3 retract(const PoseSE3& g, const Twist& dxi);
};

Eigen::Matrix3d skew(const Eigen::Vector3d& w);

// Closed-form SE(3) exponential (Rodrigues rotation, V-matrix translation).
// Switches to a Taylor expansion below ||omega|| = 1e-8.
PoseSE3 exp(const Twist& xi);

// Inverse of exp. Throws AngleNearPi when the rotation angle is within
// 1e-6 of pi, where the axis is no longer unambiguous.
Twist log(const PoseSE3& g);

// Left-multiplicative pose update: Exp(dxi) ∘ g, quaternion renormalized.
PoseSE3 retract(const PoseSE3& g, const Twist& dxi);

// Relative transform g_j ∘ g_i^{-1}: maps camera-i coordinates to camera-j.
PoseSE3 relative(const PoseSE3& g_i, const PoseSE3& g_j);

}  // namespace dualvo
