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
#include "dualvo/framegraph.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace dualvo {

void FrameGraph::add_frame(Frame frame) {
  if (index_of_.count(frame.id)) {
    throw DuplicateFrame("frame id " + std::to_string(frame.id) +
                         " already in graph");
  }
  index_of_[frame.id] = frames_.size();
  frames_.push_back(std::move(frame));
}

bool FrameGraph::has_edge(int i, int j) const {
  return edge_index_.count({i, j}) > 0;
}

void FrameGraph::add_bidirectional_edge(int i, int j) {
  if (i == j) throw Error("self-edge rejected: " + std::to_string(i));
  if (!has_frame(i) || !has_frame(j)) {
    throw Error("edge endpoints must exist: " + std::to_string(i) + "," +
                std::to_string(j));
  }
  for (const auto [a, b] : {std::pair{i, j}, std::pair{j, i}}) {
    if (has_edge(a, b)) continue;
    Edge e;
    e.i = a;
    e.j = b;
    edge_index_[{a, b}] = edges_.size();
    edges_.push_back(std::move(e));
  }
}

std::vector<const Edge*> FrameGraph::edges_from(int frame_id) const {
  std::vector<const Edge*> out;
  for (const Edge& e : edges_) {
    if (e.i == frame_id) out.push_back(&e);
  }
  return out;
}

std::vector<Edge*> FrameGraph::edges_from(int frame_id) {
  std::vector<Edge*> out;
  for (Edge& e : edges_) {
    if (e.i == frame_id) out.push_back(&e);
  }
  return out;
}

std::string FrameGraph::dump() const {
  std::ostringstream os;
  for (const Frame& f : frames_) {
    os << "NODE " << f.id << " " << f.timestamp << " " << (f.fixed ? 1 : 0)
       << "\n";
  }
  for (const Edge& e : edges_) {
    os << "EDGE " << e.i << " " << e.j << "\n";
  }
  return os.str();
}

FrameGraph build_window_graph(const Intrinsics& intr,
                              std::vector<Frame> frames, int window) {
  if (frames.size() < 2) {
    throw InsufficientFrames("window graph needs >= 2 frames, got " +
                             std::to_string(frames.size()));
  }
  FrameGraph graph(intr);
  for (size_t k = 0; k < frames.size(); ++k) {
    frames[k].fixed = (k < 2);
    graph.add_frame(std::move(frames[k]));
  }
  const auto& fs = graph.frames();
  for (size_t a = 0; a < fs.size(); ++a) {
    for (size_t b = a + 1; b < fs.size() && b <= a + window; ++b) {
      graph.add_bidirectional_edge(fs[a].id, fs[b].id);
    }
  }
  return graph;
}

FrameGraph initialize(const Intrinsics& intr, std::vector<Frame> frames) {
  if (frames.size() < static_cast<size_t>(kInitFrames)) {
    throw InsufficientFrames("initialize needs " +
                             std::to_string(kInitFrames) + " frames, got " +
                             std::to_string(frames.size()));
  }
  frames.resize(kInitFrames);
  return build_window_graph(intr, std::move(frames), kTemporalWindow);
}

void add_keyframe(FrameGraph& graph, Frame frame) {
  const double t_new = frame.timestamp;
  const int id_new = frame.id;

  std::vector<std::pair<double, int>> by_dt;
  for (const Frame& f : graph.frames()) {
    by_dt.emplace_back(std::abs(f.timestamp - t_new), f.id);
  }
  std::sort(by_dt.begin(), by_dt.end());

  graph.add_frame(std::move(frame));
  const int n = std::min<int>(kTemporalWindow, static_cast<int>(by_dt.size()));
  for (int k = 0; k < n; ++k) {
    graph.add_bidirectional_edge(id_new, by_dt[k].second);
  }
}

double mean_flow_distance(const FrameGraph& graph, int i, int j) {
  const Frame& fi = graph.frame(i);
  const Frame& fj = graph.frame(j);
  const PixelGrid grid(graph.intrinsics());
  const FlowField flow =
      static_flow(graph.intrinsics(), fi.pose, fj.pose, fi.inv_depth, grid);

  double sum = 0.0;
  size_t count = 0;
  for (size_t k = 0; k < flow.du.size(); ++k) {
    if (!flow.valid[k]) continue;
    sum += std::hypot(flow.du[k], flow.dv[k]);
    ++count;
  }
  if (count == 0) {
    throw NoValidPixels("mean_flow_distance: no valid pixels between " +
                        std::to_string(i) + " and " + std::to_string(j));
  }
  return sum / static_cast<double>(count);
}

}  // namespace dualvo
