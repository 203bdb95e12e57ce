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
#include "dualvo/correlation.hpp"

#include <algorithm>
#include <cmath>

namespace dualvo {

namespace {
constexpr double kFlatLogit = -20.0;
constexpr double kFlatEps = 1e-12;

int clamp_coord(int x, int lo, int hi) { return std::min(std::max(x, lo), hi); }
}  // namespace

FeatureMap extract_features(const Image& img, int dim) {
  if (dim < 1) throw Error("extract_features: dim must be >= 1");
  const int side = static_cast<int>(std::ceil(std::sqrt(double(dim))));
  const int lo = -(side - 1) / 2;
  FeatureMap f(img.width(), img.height(), dim);

  std::vector<double> patch(static_cast<size_t>(side) * side, 0.0);
  for (int v = 0; v < img.height(); ++v) {
    for (int u = 0; u < img.width(); ++u) {
      double mean = 0.0;
      int k = 0;
      for (int dy = 0; dy < side && k < dim; ++dy) {
        for (int dx = 0; dx < side && k < dim; ++dx, ++k) {
          const int su = clamp_coord(u + lo + dx, 0, img.width() - 1);
          const int sv = clamp_coord(v + lo + dy, 0, img.height() - 1);
          patch[k] = img.at(su, sv);
          mean += patch[k];
        }
      }
      mean /= dim;
      double norm2 = 0.0;
      for (int i = 0; i < dim; ++i) {
        patch[i] -= mean;
        norm2 += patch[i] * patch[i];
      }
      double* out = f.at(u, v);
      if (norm2 < kFlatEps) {
        std::fill(out, out + dim, 0.0);
      } else {
        const double inv = 1.0 / std::sqrt(norm2);
        for (int i = 0; i < dim; ++i) out[i] = patch[i] * inv;
      }
    }
  }
  return f;
}

CorrelationPyramid build_volume(const FeatureMap& f_i, const FeatureMap& f_j) {
  if (f_i.width != f_j.width || f_i.height != f_j.height ||
      f_i.dim != f_j.dim) {
    throw ShapeMismatch("build_volume: feature maps differ in shape");
  }
  CorrelationPyramid pyr;
  pyr.width_ = f_i.width;
  pyr.height_ = f_i.height;

  const int w = f_i.width, h = f_i.height, d = f_i.dim;
  const size_t n_src = static_cast<size_t>(w) * h;

  pyr.target_w_[0] = w;
  pyr.target_h_[0] = h;
  pyr.levels_[0].resize(n_src * n_src);
  for (int vi = 0; vi < h; ++vi) {
    for (int ui = 0; ui < w; ++ui) {
      const double* fi = f_i.at(ui, vi);
      double* row = pyr.levels_[0].data() +
                    (static_cast<size_t>(vi) * w + ui) * n_src;
      for (int vj = 0; vj < h; ++vj) {
        for (int uj = 0; uj < w; ++uj) {
          const double* fj = f_j.at(uj, vj);
          double acc = 0.0;
          for (int k = 0; k < d; ++k) acc += fi[k] * fj[k];
          row[static_cast<size_t>(vj) * w + uj] = acc;
        }
      }
    }
  }

  for (int level = 1; level < CorrelationPyramid::kLevels; ++level) {
    const int pw = pyr.target_w_[level - 1];
    const int ph = pyr.target_h_[level - 1];
    const int cw = pw / 2;
    const int ch = ph / 2;
    pyr.target_w_[level] = cw;
    pyr.target_h_[level] = ch;
    pyr.levels_[level].resize(n_src * cw * ch);
    const size_t prev_slice = static_cast<size_t>(pw) * ph;
    const size_t cur_slice = static_cast<size_t>(cw) * ch;
    for (size_t s = 0; s < n_src; ++s) {
      const double* prev = pyr.levels_[level - 1].data() + s * prev_slice;
      double* cur = pyr.levels_[level].data() + s * cur_slice;
      for (int vj = 0; vj < ch; ++vj) {
        for (int uj = 0; uj < cw; ++uj) {
          const int u0 = 2 * uj, v0 = 2 * vj;
          cur[static_cast<size_t>(vj) * cw + uj] =
              0.25 * (prev[static_cast<size_t>(v0) * pw + u0] +
                      prev[static_cast<size_t>(v0) * pw + u0 + 1] +
                      prev[static_cast<size_t>(v0 + 1) * pw + u0] +
                      prev[static_cast<size_t>(v0 + 1) * pw + u0 + 1]);
        }
      }
    }
  }
  return pyr;
}

double CorrelationPyramid::sample(int level, int ui, int vi, double uj,
                                  double vj) const {
  const int tw = target_w_[level];
  const int th = target_h_[level];
  const int x0 = static_cast<int>(std::floor(uj));
  const int y0 = static_cast<int>(std::floor(vj));
  const double fx = uj - x0;
  const double fy = vj - y0;

  auto tap = [&](int x, int y) -> double {
    if (x < 0 || x >= tw || y < 0 || y >= th) return 0.0;
    return value(level, ui, vi, x, y);
  };
  return (1.0 - fy) * ((1.0 - fx) * tap(x0, y0) + fx * tap(x0 + 1, y0)) +
         fy * ((1.0 - fx) * tap(x0, y0 + 1) + fx * tap(x0 + 1, y0 + 1));
}

std::vector<double> lookup(const CorrelationPyramid& pyr,
                           const CorrespondenceField& coords, int radius,
                           int u, int v) {
  if (radius < 1) throw Error("lookup: radius must be >= 1");
  const int side = 2 * radius + 1;
  std::vector<double> out;
  out.reserve(static_cast<size_t>(CorrelationPyramid::kLevels) * side * side);
  const double cx = coords.u.at(u, v);
  const double cy = coords.v.at(u, v);
  for (int level = 0; level < CorrelationPyramid::kLevels; ++level) {
    const double scale = 1.0 / double(1 << level);
    const double lx = cx * scale;
    const double ly = cy * scale;
    for (int dy = -radius; dy <= radius; ++dy) {
      for (int dx = -radius; dx <= radius; ++dx) {
        out.push_back(pyr.sample(level, u, v, lx + dx, ly + dy));
      }
    }
  }
  return out;
}

RefinedTargets refine_targets(const CorrelationPyramid& pyr,
                              const CorrespondenceField& init, int radius) {
  if (radius < 1) throw Error("refine_targets: radius must be >= 1");
  const int w = init.width();
  const int h = init.height();
  RefinedTargets out;
  out.coords = CorrespondenceField(w, h);
  out.confidence = Grid2D<double>(w, h, kFlatLogit);

  const int side = 2 * radius + 1;
  std::vector<double> win(static_cast<size_t>(side) * side);

  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) {
      const double cx = init.u.at(u, v);
      const double cy = init.v.at(u, v);
      out.coords.u.at(u, v) = cx;
      out.coords.v.at(u, v) = cy;
      out.coords.valid.at(u, v) = init.valid.at(u, v);

      double best = -1e300, worst = 1e300, sum = 0.0;
      int best_ix = 0, best_iy = 0;
      for (int dy = -radius; dy <= radius; ++dy) {
        for (int dx = -radius; dx <= radius; ++dx) {
          const double s = pyr.sample(0, u, v, cx + dx, cy + dy);
          win[static_cast<size_t>(dy + radius) * side + (dx + radius)] = s;
          sum += s;
          if (s > best) {
            best = s;
            best_ix = dx;
            best_iy = dy;
          }
          worst = std::min(worst, s);
        }
      }
      if (best - worst < kFlatEps) continue;  // textureless: keep init

      auto at = [&](int dx, int dy) {
        return win[static_cast<size_t>(dy + radius) * side + (dx + radius)];
      };
      // Least-squares 2D quadratic over the 3x3 around the peak; fall back
      // to the integer argmax when the fitted Hessian is not negative
      // definite or the peak sits on the window border.
      double off_x = 0.0, off_y = 0.0;
      if (std::abs(best_ix) < radius && std::abs(best_iy) < radius) {
        double s = 0, sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            const double val = at(best_ix + dx, best_iy + dy);
            s += val;
            sx += dx * val;
            sy += dy * val;
            sxx += dx * dx * val;
            syy += dy * dy * val;
            sxy += dx * dy * val;
          }
        }
        const double a1 = sx / 6.0;
        const double a2 = sy / 6.0;
        const double a3 = (3.0 * sxx - 2.0 * s) / 6.0;
        const double a4 = (3.0 * syy - 2.0 * s) / 6.0;
        const double a5 = sxy / 4.0;
        const double det = 4.0 * a3 * a4 - a5 * a5;
        if (a3 < 0.0 && det > 0.0) {
          off_x = std::clamp(-(2.0 * a4 * a1 - a5 * a2) / det, -0.5, 0.5);
          off_y = std::clamp(-(2.0 * a3 * a2 - a5 * a1) / det, -0.5, 0.5);
        }
      }
      const double mx =
          std::clamp(best_ix + off_x, -double(radius), double(radius));
      const double my =
          std::clamp(best_iy + off_y, -double(radius), double(radius));
      out.coords.u.at(u, v) = cx + mx;
      out.coords.v.at(u, v) = cy + my;
      out.confidence.at(u, v) = best - sum / (side * side);
    }
  }
  return out;
}

}  // namespace dualvo
