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
#include <benchmark/benchmark.h>

#include <random>

#include "dualvo/dba.hpp"
#include "dualvo/simworld.hpp"

using namespace dualvo;

namespace {

FrameGraph benchmark_graph(int n_frames, int w, int h) {
  SimConfig sim;
  sim.width = w;
  sim.height = h;
  sim.n_frames = n_frames;
  sim.trajectory.velocity = Eigen::Vector3d(0.35, 0.0, 0.1);
  const SimScene scene = generate(sim, 17);
  FrameGraph graph = graph_from_scene(scene);
  const PixelGrid grid(graph.intrinsics());
  for (Edge& e : graph.edges()) {
    const Frame& fi = graph.frame(e.i);
    const Frame& fj = graph.frame(e.j);
    e.target = reproject(graph.intrinsics(), relative(fi.pose, fj.pose),
                         fi.inv_depth, grid);
    e.confidence_logit = Grid2D<double>(w, h, 0.0);
    e.mask = DynamicMask(w, h, 1.0);
  }
  perturb(graph, 0.02, 0.05, 23);
  return graph;
}

}  // namespace

static void BM_gauss_newton_step(benchmark::State& state) {
  const FrameGraph graph =
      benchmark_graph(static_cast<int>(state.range(0)), 48, 64);
  const BAProblem problem(graph);
  for (auto _ : state) {
    benchmark::DoNotOptimize(gauss_newton_step(problem));
  }
}
BENCHMARK(BM_gauss_newton_step)->Arg(4)->Arg(6)->Arg(8);

static void BM_total_cost(benchmark::State& state) {
  const FrameGraph graph =
      benchmark_graph(static_cast<int>(state.range(0)), 48, 64);
  const BAProblem problem(graph);
  const BAState ba_state = BAState::from_graph(graph);
  for (auto _ : state) {
    benchmark::DoNotOptimize(total_cost(problem, ba_state));
  }
}
BENCHMARK(BM_total_cost)->Arg(6);

static void BM_solve(benchmark::State& state) {
  const FrameGraph graph = benchmark_graph(6, 48, 64);
  BAOptions opts;
  opts.max_iters = 8;
  for (auto _ : state) {
    benchmark::DoNotOptimize(solve(BAProblem(graph, opts)));
  }
}
BENCHMARK(BM_solve);
