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
#include "dualvo/traj_eval.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "dualvo/errors.hpp"

namespace dualvo {

namespace {

std::vector<std::pair<Eigen::Vector3d, Eigen::Vector3d>> associate(
    const Trajectory& est, const Trajectory& gt) {
  std::vector<std::pair<Eigen::Vector3d, Eigen::Vector3d>> pairs;
  for (const TrajectoryEntry& e : est.entries) {
    double best_dt = kAssociationWindow;
    const TrajectoryEntry* best = nullptr;
    for (const TrajectoryEntry& g : gt.entries) {
      const double dt = std::abs(g.timestamp - e.timestamp);
      if (dt <= best_dt) {
        best_dt = dt;
        best = &g;
      }
    }
    if (best != nullptr) {
      pairs.emplace_back(e.pose.translation(), best->pose.translation());
    }
  }
  return pairs;
}

}  // namespace

Sim3Alignment umeyama_align(const Trajectory& est, const Trajectory& gt,
                            bool with_scale) {
  const auto pairs = associate(est, gt);
  const size_t n = pairs.size();
  if (n < 3) {
    throw TooFewCorrespondences("umeyama_align: " + std::to_string(n) +
                                " associated pairs, need 3");
  }

  Eigen::Vector3d mean_p = Eigen::Vector3d::Zero();  // estimate
  Eigen::Vector3d mean_q = Eigen::Vector3d::Zero();  // ground truth
  for (const auto& [p, q] : pairs) {
    mean_p += p;
    mean_q += q;
  }
  mean_p /= double(n);
  mean_q /= double(n);

  Eigen::Matrix3d sigma = Eigen::Matrix3d::Zero();
  double var_p = 0.0;
  for (const auto& [p, q] : pairs) {
    sigma += (q - mean_q) * (p - mean_p).transpose();
    var_p += (p - mean_p).squaredNorm();
  }
  sigma /= double(n);
  var_p /= double(n);

  Eigen::JacobiSVD<Eigen::Matrix3d> svd(
      sigma, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::Vector3d d = svd.singularValues();

  Eigen::Vector3d s_diag = Eigen::Vector3d::Ones();
  if (svd.matrixU().determinant() * svd.matrixV().determinant() < 0.0) {
    s_diag.z() = -1.0;
  }
  const Eigen::Matrix3d rot =
      svd.matrixU() * s_diag.asDiagonal() * svd.matrixV().transpose();

  Sim3Alignment align;
  align.rotation = Eigen::Quaterniond(rot);

  // Collinear (rank < 2) clouds leave the scale ill-conditioned: fall back
  // to the rigid fit.
  const bool degenerate = d(1) <= 1e-9 * std::max(d(0), 1e-300);
  if (with_scale && !degenerate && var_p > 0.0) {
    align.scale = (d(0) * s_diag(0) + d(1) * s_diag(1) + d(2) * s_diag(2)) /
                  var_p;
    if (!(align.scale > 0.0)) align.scale = 1.0;
  } else {
    align.scale = 1.0;
  }
  align.translation = mean_q - align.scale * (align.rotation * mean_p);
  return align;
}

AteBreakdown ate_breakdown(const Trajectory& est, const Trajectory& gt,
                           bool with_scale) {
  const Sim3Alignment align = umeyama_align(est, gt, with_scale);
  const auto pairs = associate(est, gt);

  AteBreakdown out;
  out.pairs = pairs.size();
  Eigen::Vector3d sq = Eigen::Vector3d::Zero();
  for (const auto& [p, q] : pairs) {
    const Eigen::Vector3d r = align.apply(p) - q;
    sq += r.cwiseProduct(r);
  }
  sq /= double(pairs.size());
  out.per_axis_rmse = sq.cwiseSqrt();
  out.rmse = std::sqrt(sq.sum());
  return out;
}

double ate_rmse(const Trajectory& est, const Trajectory& gt, bool with_scale) {
  return ate_breakdown(est, gt, with_scale).rmse;
}

Trajectory load_tum(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("load_tum: cannot open " + path);

  Trajectory traj;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const size_t first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;

    std::istringstream ls(line);
    double t, tx, ty, tz, qx, qy, qz, qw;
    if (!(ls >> t >> tx >> ty >> tz >> qx >> qy >> qz >> qw)) {
      throw ParseError("load_tum: expected 8 fields", line_no);
    }
    const double norm = std::sqrt(qx * qx + qy * qy + qz * qz + qw * qw);
    if (std::abs(norm - 1.0) > 1e-3) {
      throw ParseError("load_tum: quaternion norm " + std::to_string(norm),
                       line_no);
    }
    if (!traj.entries.empty() && t <= traj.entries.back().timestamp) {
      throw ParseError("load_tum: timestamps must increase", line_no);
    }
    traj.entries.push_back(
        {t, PoseSE3(Eigen::Quaterniond(qw, qx, qy, qz),
                    Eigen::Vector3d(tx, ty, tz))});
  }
  return traj;
}

void save_tum(const std::string& path, const Trajectory& traj) {
  std::ofstream out(path);
  if (!out) throw IoError("save_tum: cannot open " + path);
  out << "# timestamp tx ty tz qx qy qz qw\n";
  char buf[360];
  for (const TrajectoryEntry& e : traj.entries) {
    const Eigen::Quaterniond& q = e.pose.rotation();
    const Eigen::Vector3d& t = e.pose.translation();
    std::snprintf(buf, sizeof(buf),
                  "%.9f %.17g %.17g %.17g %.17g %.17g %.17g %.17g\n",
                  e.timestamp, t.x(), t.y(), t.z(), q.x(), q.y(), q.z(),
                  q.w());
    out << buf;
  }
  if (!out) throw IoError("save_tum: write failed for " + path);
}

}  // namespace dualvo
