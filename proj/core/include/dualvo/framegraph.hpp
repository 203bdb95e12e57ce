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
#include <string>
#include <vector>

#include "dualvo/camera.hpp"
#include "dualvo/correlation.hpp"
#include "dualvo/dualflow.hpp"
#include "dualvo/grid.hpp"
#include "dualvo/se3.hpp"

namespace dualvo {

// Number of frames buffered before the initial graph is built, and the
// temporal edge window / nearest-neighbor count used by the frontend.
constexpr int kInitFrames = 12;
constexpr int kTemporalWindow = 3;

struct Frame {
  int id = -1;
  double timestamp = 0.0;   // seconds
  Image image;
  FeatureMap features;      // may be empty when the provider does not need it
  PoseSE3 pose;             // world-to-camera
  InverseDepthMap inv_depth;
  bool fixed = false;       // gauge: pose held constant during optimization
};

// Directed co-visibility edge i -> j. All per-edge rasters live on frame
// i's pixel grid. target is the static-flow correspondence p*_s fed to the
// bundle adjustment; opt_flow is the edge's optical flow, stored so that
// opt_flow == compose_flow(static, dyn_flow) holds exactly.
struct Edge {
  int i = -1;
  int j = -1;
  CorrespondenceField target;
  Grid2D<double> confidence_logit;
  DynamicMask mask;
  FlowField dyn_flow;
  FlowField opt_flow;
};

class FrameGraph {
 public:
  FrameGraph() = default;
  explicit FrameGraph(const Intrinsics& intr) : intrinsics_(intr) {}

  const Intrinsics& intrinsics() const { return intrinsics_; }
  void set_intrinsics(const Intrinsics& intr) { intrinsics_ = intr; }

  const std::vector<Frame>& frames() const { return frames_; }
  std::vector<Frame>& frames() { return frames_; }
  const std::vector<Edge>& edges() const { return edges_; }
  std::vector<Edge>& edges() { return edges_; }

  bool has_frame(int id) const { return index_of_.count(id) > 0; }
  const Frame& frame(int id) const { return frames_[index_of_.at(id)]; }
  Frame& frame(int id) { return frames_[index_of_.at(id)]; }
  size_t frame_index(int id) const { return index_of_.at(id); }

  // Appends a node; establishes no edges. Throws DuplicateFrame.
  void add_frame(Frame frame);

  // Adds a directed edge pair i<->j. Exact duplicates are rejected; no
  // further redundancy rule is applied.
  void add_bidirectional_edge(int i, int j);
  bool has_edge(int i, int j) const;

  std::vector<const Edge*> edges_from(int frame_id) const;
  std::vector<Edge*> edges_from(int frame_id);

  // Line-oriented debug dump: "NODE id timestamp fixed" / "EDGE i j".
  std::string dump() const;

 private:
  Intrinsics intrinsics_;
  std::vector<Frame> frames_;
  std::vector<Edge> edges_;
  std::map<int, size_t> index_of_;
  std::map<std::pair<int, int>, size_t> edge_index_;
};

// Graph over frames with edges between all pairs within `window` positions
// of each other in the given order; the first two frames are fixed. Used
// both by initialize() and directly for short (e.g. 6-frame) sequences.
FrameGraph build_window_graph(const Intrinsics& intr,
                              std::vector<Frame> frames,
                              int window = kTemporalWindow);

// SLAM-style initialization: requires at least kInitFrames buffered frames
// and builds the window graph over the first kInitFrames of them.
FrameGraph initialize(const Intrinsics& intr, std::vector<Frame> frames);

// Frontend policy: connect the new frame to its 3 temporally nearest
// keyframes (smallest |dt|), both directions.
void add_keyframe(FrameGraph& graph, Frame frame);

// Mean static-flow magnitude between frames i and j over valid pixels.
// Callers admit keyframes when this lies in [8, 96] pixels.
double mean_flow_distance(const FrameGraph& graph, int i, int j);

constexpr double kFlowAdmissionMin = 8.0;   // pixels
constexpr double kFlowAdmissionMax = 96.0;  // pixels

}  // namespace dualvo
