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

#include <string>
#include <vector>

#include "dualvo/se3.hpp"

namespace dualvo {

// Timestamp association window, TUM convention.
constexpr double kAssociationWindow = 0.02;  // seconds

struct TrajectoryEntry {
  double timestamp = 0.0;  // seconds
  PoseSE3 pose;            // camera-to-world, TUM semantics
};

struct Trajectory {
  std::vector<TrajectoryEntry> entries;

  size_t size() const { return entries.size(); }
  void push_back(double t, const PoseSE3& pose) {
    if (!entries.empty() && t <= entries.back().timestamp) {
      throw Error("Trajectory: timestamps must be strictly increasing");
    }
    entries.push_back({t, pose});
  }
};

struct Sim3Alignment {
  double scale = 1.0;
  Eigen::Quaterniond rotation = Eigen::Quaterniond::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  Eigen::Vector3d apply(const Eigen::Vector3d& p) const {
    return scale * (rotation * p) + translation;
  }
};

// Least-squares Sim(3) (SE(3) when with_scale is false) fit of the
// estimated translations onto ground truth over timestamp-associated
// pairs. Collinear point sets fall back to unit scale. Throws
// TooFewCorrespondences below 3 pairs.
Sim3Alignment umeyama_align(const Trajectory& est, const Trajectory& gt,
                            bool with_scale = true);

// RMSE of the translation residuals after alignment.
double ate_rmse(const Trajectory& est, const Trajectory& gt,
                bool with_scale = true);

struct AteBreakdown {
  double rmse = 0.0;
  Eigen::Vector3d per_axis_rmse = Eigen::Vector3d::Zero();
  size_t pairs = 0;
};
AteBreakdown ate_breakdown(const Trajectory& est, const Trajectory& gt,
                           bool with_scale = true);

// TUM text format: "timestamp tx ty tz qx qy qz qw", '#' comments.
// save_tum writes full double precision so a round-trip is lossless;
// load_tum rejects quaternions whose norm is off by more than 1e-3.
Trajectory load_tum(const std::string& path);
void save_tum(const std::string& path, const Trajectory& traj);

}  // namespace dualvo
