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

#include <vector>

#include "dualvo/camera.hpp"
#include "dualvo/grid.hpp"

namespace dualvo {

// Dense per-pixel descriptors, H x W x D row-major (pixel-major, then
// channel). Stand-in for a learned encoder: zero-mean, unit-norm local
// intensity patches.
struct FeatureMap {
  int width = 0;
  int height = 0;
  int dim = 0;
  std::vector<double> values;

  FeatureMap() = default;
  FeatureMap(int w, int h, int d)
      : width(w), height(h), dim(d),
        values(static_cast<size_t>(w) * h * d, 0.0) {}

  double* at(int u, int v) {
    return values.data() + (static_cast<size_t>(v) * width + u) * dim;
  }
  const double* at(int u, int v) const {
    return values.data() + (static_cast<size_t>(v) * width + u) * dim;
  }
};

// All-pairs correlation volume plus its 3 average-pooled coarsenings.
// Level 0 holds dot(f_i[ui,vi], f_j[uj,vj]); level k+1 pools 2x2 over the
// (uj, vj) dimensions. Memory is O(H^2 W^2): keep frames <= 64x96.
class CorrelationPyramid {
 public:
  static constexpr int kLevels = 4;

  CorrelationPyramid() = default;

  int width() const { return width_; }    // source frame, all levels
  int height() const { return height_; }
  int target_width(int level) const { return target_w_[level]; }
  int target_height(int level) const { return target_h_[level]; }

  // Correlation of source pixel (ui, vi) against target pixel (uj, vj).
  double value(int level, int ui, int vi, int uj, int vj) const {
    const size_t slice = static_cast<size_t>(target_w_[level]) *
                         static_cast<size_t>(target_h_[level]);
    return levels_[level][(static_cast<size_t>(vi) * width_ + ui) * slice +
                          static_cast<size_t>(vj) * target_w_[level] + uj];
  }

  // Bilinear sample over the target dims; taps outside the volume read 0.
  double sample(int level, int ui, int vi, double uj, double vj) const;

 private:
  int width_ = 0, height_ = 0;
  int target_w_[kLevels] = {0, 0, 0, 0};
  int target_h_[kLevels] = {0, 0, 0, 0};
  std::vector<double> levels_[kLevels];

  friend CorrelationPyramid build_volume(const FeatureMap& f_i,
                                         const FeatureMap& f_j);
};

// Zero-mean, unit-norm intensity patches of side ceil(sqrt(dim)), sampled
// with replicated borders. Flat patches produce the zero vector.
FeatureMap extract_features(const Image& img, int dim = 25);

CorrelationPyramid build_volume(const FeatureMap& f_i, const FeatureMap& f_j);

// Concatenated (2r+1)^2 bilinear taps per level, centered at coords scaled
// into each level. Output layout: level-major, then dv row-major.
std::vector<double> lookup(const CorrelationPyramid& pyr,
                           const CorrespondenceField& coords, int radius,
                           int u, int v);

struct RefinedTargets {
  CorrespondenceField coords;
  Grid2D<double> confidence;  // raw logits; flat windows clamp to -20
};

// Classical correspondence refiner: argmax of level-0 correlation in a
// (2r+1)^2 window around the initial coords, sub-pixel peak by separable
// quadratic fit, displacement clamped to radius. Confidence logit is
// peak minus window mean.
RefinedTargets refine_targets(const CorrelationPyramid& pyr,
                              const CorrespondenceField& init, int radius);

}  // namespace dualvo
