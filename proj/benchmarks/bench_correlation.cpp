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

#include "dualvo/correlation.hpp"

using namespace dualvo;

namespace {

Image random_image(int w, int h, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  Image img(w, h, 0.0);
  for (size_t i = 0; i < img.size(); ++i) img[i] = uni(rng);
  return img;
}

}  // namespace

static void BM_extract_features(benchmark::State& state) {
  const int side = static_cast<int>(state.range(0));
  const Image img = random_image(side, side, 1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(extract_features(img, 25));
  }
}
BENCHMARK(BM_extract_features)->Arg(32)->Arg(48)->Arg(64);

static void BM_build_volume(benchmark::State& state) {
  const int side = static_cast<int>(state.range(0));
  const FeatureMap fa = extract_features(random_image(side, side, 2), 25);
  const FeatureMap fb = extract_features(random_image(side, side, 3), 25);
  for (auto _ : state) {
    benchmark::DoNotOptimize(build_volume(fa, fb));
  }
}
BENCHMARK(BM_build_volume)->Arg(16)->Arg(32)->Arg(48);

static void BM_refine_targets(benchmark::State& state) {
  const int side = static_cast<int>(state.range(0));
  const FeatureMap fa = extract_features(random_image(side, side, 4), 25);
  const FeatureMap fb = extract_features(random_image(side, side, 5), 25);
  const CorrelationPyramid pyr = build_volume(fa, fb);
  CorrespondenceField init(side, side);
  for (int v = 0; v < side; ++v) {
    for (int u = 0; u < side; ++u) {
      init.u.at(u, v) = u;
      init.v.at(u, v) = v;
      init.valid.at(u, v) = 1;
    }
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(refine_targets(pyr, init, 3));
  }
}
BENCHMARK(BM_refine_targets)->Arg(16)->Arg(32);

BENCHMARK_MAIN();
