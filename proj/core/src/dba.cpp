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
#include "dualvo/dba.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace dualvo {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

ConfidenceMap combine_confidence(const Grid2D<double>& logits,
                                 const DynamicMask& mask, double eta) {
  require_same_shape(logits, mask.values, "combine_confidence");
  ConfidenceMap out;
  out.logits = logits;
  out.combined = Grid2D<double>(logits.width(), logits.height(), 0.0);
  for (size_t i = 0; i < logits.size(); ++i) {
    out.combined[i] = sigmoid(logits[i] + (1.0 - mask.values[i]) * eta);
  }
  return out;
}

namespace {

void check_problem(const BAProblem& problem) {
  if (problem.graph == nullptr) throw Error("BAProblem: null graph");
  int fixed = 0;
  for (const Frame& f : problem.graph->frames()) fixed += f.fixed ? 1 : 0;
  if (fixed < 2) {
    throw Error("BAProblem: gauge requires >= 2 fixed frames, got " +
                std::to_string(fixed));
  }
}

Grid2D<double> edge_weights(const Edge& e, const BAOptions& opts) {
  ConfidenceMap conf;
  if (opts.invert_mask_logit) {
    DynamicMask inverted = e.mask;
    for (size_t i = 0; i < inverted.values.size(); ++i) {
      inverted.values[i] = 1.0 - inverted.values[i];
    }
    conf = combine_confidence(e.confidence_logit, inverted, opts.eta);
  } else {
    conf = combine_confidence(e.confidence_logit, e.mask, opts.eta);
  }
  return conf.combined;
}

// Pose-depth coupling retained per source frame for back-substitution.
struct DepthElimination {
  size_t frame = 0;
  int n_cols = 0;
  std::vector<int> col_slot;              // -1 for fixed poses
  std::vector<double> c_total;            // damped per-pixel depth Hessian
  std::vector<double> b_d;                // per-pixel depth gradient
  std::vector<Eigen::Matrix<double, 6, 1>> e_blocks;  // n_px * n_cols
};

}  // namespace

BAState BAState::from_graph(const FrameGraph& graph) {
  BAState s;
  for (const Frame& f : graph.frames()) {
    s.poses.push_back(f.pose);
    s.inv_depths.push_back(f.inv_depth);
  }
  return s;
}

std::vector<FlowField> residuals(const BAProblem& problem,
                                 const BAState& state) {
  check_problem(problem);
  const FrameGraph& graph = *problem.graph;
  const Intrinsics& intr = graph.intrinsics();

  std::vector<FlowField> out;
  out.reserve(graph.edges().size());
  for (const Edge& e : graph.edges()) {
    const size_t ii = graph.frame_index(e.i);
    const size_t ji = graph.frame_index(e.j);
    const PoseSE3 g_ij = relative(state.poses[ii], state.poses[ji]);
    const Eigen::Matrix3d rot = g_ij.rotation_matrix();
    const Eigen::Vector3d trans = g_ij.translation();
    const InverseDepthMap& depth = state.inv_depths[ii];

    FlowField res(e.target.width(), e.target.height());
    res.valid.fill(0);
    for (int v = 0; v < res.height(); ++v) {
      for (int u = 0; u < res.width(); ++u) {
        if (!e.target.valid.at(u, v)) continue;
        const PixelReprojection r = reproject_pixel(
            intr, rot, trans, u, v, depth.at(u, v), /*with_jacobians=*/false);
        if (!r.z_valid || !r.in_bounds) continue;
        res.du.at(u, v) = e.target.u.at(u, v) - r.coords.x();
        res.dv.at(u, v) = e.target.v.at(u, v) - r.coords.y();
        res.valid.at(u, v) = 1;
      }
    }
    out.push_back(std::move(res));
  }
  return out;
}

double total_cost(const BAProblem& problem, const BAState& state) {
  const FrameGraph& graph = *problem.graph;
  const std::vector<FlowField> res = residuals(problem, state);
  double cost = 0.0;
  for (size_t k = 0; k < res.size(); ++k) {
    const Grid2D<double> w = edge_weights(graph.edges()[k], problem.opts);
    for (size_t i = 0; i < res[k].du.size(); ++i) {
      if (!res[k].valid[i]) continue;
      cost += w[i] * (res[k].du[i] * res[k].du[i] +
                      res[k].dv[i] * res[k].dv[i]);
    }
  }
  return cost;
}

BAStep gauss_newton_step(const BAProblem& problem, const BAState& state,
                         double damping) {
  check_problem(problem);
  const FrameGraph& graph = *problem.graph;
  const Intrinsics& intr = graph.intrinsics();
  const BAOptions& opts = problem.opts;
  const size_t n_frames = graph.frames().size();

  std::vector<int> slot_of(n_frames, -1);
  int n_free = 0;
  for (size_t fi = 0; fi < n_frames; ++fi) {
    if (!graph.frames()[fi].fixed) slot_of[fi] = n_free++;
  }
  if (n_free == 0) throw Error("gauss_newton_step: no free frames");
  const int dim = 6 * n_free;

  Eigen::MatrixXd h_pp = Eigen::MatrixXd::Zero(dim, dim);
  Eigen::VectorXd g_pose = Eigen::VectorXd::Zero(dim);

  BAStep step;
  step.pose_increments.assign(n_frames, Twist());
  step.depth_increments.reserve(n_frames);
  for (size_t fi = 0; fi < n_frames; ++fi) {
    const InverseDepthMap& d = state.inv_depths[fi];
    step.depth_increments.emplace_back(d.width(), d.height(), 0.0);
  }

  std::vector<DepthElimination> eliminations;

  // A pixel's inverse depth couples the source pose and the target pose of
  // every outgoing edge of its frame, so the Schur pass gathers all
  // outgoing edges of one source frame before eliminating its depths.
  for (size_t fi = 0; fi < n_frames; ++fi) {
    std::vector<const Edge*> out_edges;
    for (const Edge& e : graph.edges()) {
      if (graph.frame_index(e.i) == fi) out_edges.push_back(&e);
    }
    const InverseDepthMap& depth = state.inv_depths[fi];
    const int w = depth.width();
    const int h = depth.height();
    const size_t n_px = depth.size();
    if (out_edges.empty() || n_px == 0) continue;

    DepthElimination elim;
    elim.frame = fi;
    std::vector<size_t> frame_of_col;
    auto col_of_frame = [&](size_t idx) -> int {
      for (size_t k = 0; k < frame_of_col.size(); ++k) {
        if (frame_of_col[k] == idx) return static_cast<int>(k);
      }
      frame_of_col.push_back(idx);
      elim.col_slot.push_back(slot_of[idx]);
      return static_cast<int>(frame_of_col.size()) - 1;
    };
    col_of_frame(fi);
    for (const Edge* e : out_edges) col_of_frame(graph.frame_index(e->j));
    elim.n_cols = static_cast<int>(frame_of_col.size());
    elim.c_total.assign(n_px, 0.0);
    elim.b_d.assign(n_px, 0.0);
    elim.e_blocks.assign(n_px * elim.n_cols,
                         Eigen::Matrix<double, 6, 1>::Zero());

    for (const Edge* e : out_edges) {
      const size_t ji = graph.frame_index(e->j);
      const int col_i = 0;  // source registered first
      const int col_j = col_of_frame(ji);
      const int slot_i = slot_of[fi];
      const int slot_j = slot_of[ji];

      const PoseSE3 g_ij = relative(state.poses[fi], state.poses[ji]);
      const Eigen::Matrix3d rot = g_ij.rotation_matrix();
      const Eigen::Vector3d trans = g_ij.translation();
      const Matrix6d adj = g_ij.adjoint();
      const Grid2D<double> weights = edge_weights(*e, opts);

      for (int v = 0; v < h; ++v) {
        for (int u = 0; u < w; ++u) {
          if (!e->target.valid.at(u, v)) continue;
          const PixelReprojection pr =
              reproject_pixel(intr, rot, trans, u, v, depth.at(u, v),
                              /*with_jacobians=*/true);
          if (!pr.z_valid || !pr.in_bounds) continue;

          const size_t px = static_cast<size_t>(v) * w + u;
          const double wt = weights.at(u, v);
          const Eigen::Vector2d r(e->target.u.at(u, v) - pr.coords.x(),
                                  e->target.v.at(u, v) - pr.coords.y());

          const Eigen::Matrix<double, 2, 6>& j_j = pr.j_pose;
          const Eigen::Matrix<double, 2, 6> j_i = -pr.j_pose * adj;
          const Eigen::Vector2d j_d = pr.j_depth;

          if (slot_i >= 0) {
            h_pp.block<6, 6>(6 * slot_i, 6 * slot_i) +=
                wt * j_i.transpose() * j_i;
            g_pose.segment<6>(6 * slot_i) += wt * j_i.transpose() * r;
          }
          if (slot_j >= 0) {
            h_pp.block<6, 6>(6 * slot_j, 6 * slot_j) +=
                wt * j_j.transpose() * j_j;
            g_pose.segment<6>(6 * slot_j) += wt * j_j.transpose() * r;
          }
          if (slot_i >= 0 && slot_j >= 0) {
            const Eigen::Matrix<double, 6, 6> hij =
                wt * j_i.transpose() * j_j;
            h_pp.block<6, 6>(6 * slot_i, 6 * slot_j) += hij;
            h_pp.block<6, 6>(6 * slot_j, 6 * slot_i) += hij.transpose();
          }

          elim.c_total[px] += wt * j_d.squaredNorm();
          elim.b_d[px] += wt * j_d.dot(r);
          elim.e_blocks[px * elim.n_cols + col_i] +=
              wt * j_i.transpose() * j_d;
          elim.e_blocks[px * elim.n_cols + col_j] +=
              wt * j_j.transpose() * j_d;
        }
      }
    }

    // Schur complement: H_pp -= E C^-1 E^T, g -= E C^-1 b_d, with C the
    // damped per-pixel scalar, inverted elementwise.
    for (size_t px = 0; px < n_px; ++px) {
      elim.c_total[px] += damping + opts.depth_prior_weight;
      const double inv_c = 1.0 / elim.c_total[px];
      for (int a = 0; a < elim.n_cols; ++a) {
        if (elim.col_slot[a] < 0) continue;
        const auto& ea = elim.e_blocks[px * elim.n_cols + a];
        g_pose.segment<6>(6 * elim.col_slot[a]) -= ea * (elim.b_d[px] * inv_c);
        for (int b = 0; b < elim.n_cols; ++b) {
          if (elim.col_slot[b] < 0) continue;
          h_pp.block<6, 6>(6 * elim.col_slot[a], 6 * elim.col_slot[b]) -=
              ea * inv_c * elim.e_blocks[px * elim.n_cols + b].transpose();
        }
      }
    }
    eliminations.push_back(std::move(elim));
  }

  for (int k = 0; k < dim; ++k) h_pp(k, k) += damping;

  Eigen::LLT<Eigen::MatrixXd> llt(h_pp);
  if (llt.info() != Eigen::Success) {
    throw SingularSystem(
        "gauss_newton_step: reduced pose system not positive definite");
  }
  const Eigen::VectorXd dxi = llt.solve(g_pose);

  for (size_t fi = 0; fi < n_frames; ++fi) {
    if (slot_of[fi] < 0) continue;
    const Vector6d seg = dxi.segment<6>(6 * slot_of[fi]);
    step.pose_increments[fi] = Twist(seg);
    step.max_twist_norm = std::max(step.max_twist_norm, seg.norm());
  }

  // Depth back-substitution: dd = C^-1 (b_d - E^T dxi).
  for (const DepthElimination& elim : eliminations) {
    Grid2D<double>& dd = step.depth_increments[elim.frame];
    const size_t n_px = elim.c_total.size();
    for (size_t px = 0; px < n_px; ++px) {
      double num = elim.b_d[px];
      for (int a = 0; a < elim.n_cols; ++a) {
        if (elim.col_slot[a] < 0) continue;
        num -= elim.e_blocks[px * elim.n_cols + a].dot(
            dxi.segment<6>(6 * elim.col_slot[a]));
      }
      dd[px] = num / elim.c_total[px];
    }
  }

  return step;
}

BAStep gauss_newton_step(const BAProblem& problem) {
  return gauss_newton_step(problem, BAState::from_graph(*problem.graph),
                           problem.opts.damping);
}

BAState apply_step(const FrameGraph& graph, const BAState& state,
                   const BAStep& step, const BAOptions& opts) {
  BAState next = state;
  for (size_t fi = 0; fi < state.poses.size(); ++fi) {
    const Twist& xi = step.pose_increments[fi];
    if (graph.frames()[fi].fixed) {
      if (xi.norm() > 0.0) {
        throw Error("apply_step: nonzero increment for fixed frame " +
                    std::to_string(graph.frames()[fi].id));
      }
      continue;
    }
    next.poses[fi] = retract(state.poses[fi], xi);
    InverseDepthMap& d = next.inv_depths[fi];
    const Grid2D<double>& dd = step.depth_increments[fi];
    for (size_t px = 0; px < d.size(); ++px) {
      d[px] = std::clamp(d[px] + dd[px], opts.depth_min, opts.depth_max);
    }
  }
  // Depths of fixed-pose frames are still free variables.
  for (size_t fi = 0; fi < state.poses.size(); ++fi) {
    if (!graph.frames()[fi].fixed) continue;
    InverseDepthMap& d = next.inv_depths[fi];
    const Grid2D<double>& dd = step.depth_increments[fi];
    for (size_t px = 0; px < d.size(); ++px) {
      d[px] = std::clamp(d[px] + dd[px], opts.depth_min, opts.depth_max);
    }
  }
  return next;
}

SolveResult solve(const BAProblem& problem) {
  check_problem(problem);
  const FrameGraph& graph = *problem.graph;
  const BAOptions& opts = problem.opts;

  BAState state = BAState::from_graph(graph);
  double damping = opts.damping;
  double cost = total_cost(problem, state);

  SolveResult result;
  int forced_increases = 0;

  for (int iter = 0; iter < opts.max_iters; ++iter) {
    BAStep step;
    BAState candidate;
    double new_cost = 0.0;
    bool accepted = false;
    int rejects = 0;

    while (!accepted) {
      step = gauss_newton_step(problem, state, damping);
      candidate = apply_step(graph, state, step, opts);
      new_cost = total_cost(problem, candidate);
      if (new_cost <= cost * (1.0 + 1e-12)) {
        accepted = true;
        damping = std::max(damping / 2.0, 1e-8);
      } else if (++rejects >= 5) {
        // Forced acceptance after repeated rejections; three increases in
        // a row is declared divergence.
        accepted = true;
        if (++forced_increases >= 3) {
          throw Diverged("solve: cost increased on 3 consecutive steps");
        }
      } else {
        damping *= 10.0;
      }
    }
    if (new_cost <= cost) forced_increases = 0;

    state = std::move(candidate);
    cost = new_cost;
    result.log.push_back({iter, cost, step.max_twist_norm, damping});
    if (step.max_twist_norm < opts.step_tol) {
      result.converged = true;
      break;
    }
  }

  result.poses = std::move(state.poses);
  result.inv_depths = std::move(state.inv_depths);
  result.final_cost = cost;
  return result;
}

std::string iteration_log_csv(const std::vector<IterationRecord>& log) {
  std::ostringstream os;
  os << "iter,cost,max_twist_norm,damping\n";
  os.precision(17);
  for (const IterationRecord& r : log) {
    os << r.iter << "," << r.cost << "," << r.max_twist_norm << ","
       << r.damping << "\n";
  }
  return os.str();
}

}  // namespace dualvo
