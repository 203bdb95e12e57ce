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
#include "dualvo/photometric.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace dualvo {

namespace {

constexpr double kClamp = 1e-7;

struct WindowStats {
  double mu_a, mu_b, var_a, var_b, cov;
  int count;
};

// Uniform window intersected with the image; second moments use the same
// 1/n normalization as the means.
template <typename Fn>
void for_each_window(const Image& a, const Image& b, int window, Fn&& fn) {
  const int r = window / 2;
  const int w = a.width();
  const int h = a.height();
  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) {
      const int u0 = std::max(0, u - r), u1 = std::min(w - 1, u + r);
      const int v0 = std::max(0, v - r), v1 = std::min(h - 1, v + r);
      double sa = 0.0, sb = 0.0, saa = 0.0, sbb = 0.0, sab = 0.0;
      int n = 0;
      for (int y = v0; y <= v1; ++y) {
        for (int x = u0; x <= u1; ++x) {
          const double pa = a.at(x, y);
          const double pb = b.at(x, y);
          sa += pa;
          sb += pb;
          saa += pa * pa;
          sbb += pb * pb;
          sab += pa * pb;
          ++n;
        }
      }
      WindowStats s;
      s.count = n;
      s.mu_a = sa / n;
      s.mu_b = sb / n;
      s.var_a = saa / n - s.mu_a * s.mu_a;
      s.var_b = sbb / n - s.mu_b * s.mu_b;
      s.cov = sab / n - s.mu_a * s.mu_b;
      fn(u, v, u0, u1, v0, v1, s);
    }
  }
}

double ssim_value(const WindowStats& s, double c1, double c2) {
  const double num = (2.0 * s.mu_a * s.mu_b + c1) * (2.0 * s.cov + c2);
  const double den =
      (s.mu_a * s.mu_a + s.mu_b * s.mu_b + c1) * (s.var_a + s.var_b + c2);
  return num / den;
}

}  // namespace

Image ssim(const Image& a, const Image& b, int window) {
  require_same_shape(a, b, "ssim");
  const LossConfig defaults;
  Image out(a.width(), a.height(), 0.0);
  for_each_window(a, b, window,
                  [&](int u, int v, int, int, int, int, const WindowStats& s) {
                    out.at(u, v) =
                        ssim_value(s, defaults.ssim_c1, defaults.ssim_c2);
                  });
  return out;
}

Image pe_geo(const Image& a, const Image& b, double alpha, int window) {
  require_same_shape(a, b, "pe_geo");
  Image s = ssim(a, b, window);
  Image out(a.width(), a.height(), 0.0);
  for (size_t i = 0; i < out.size(); ++i) {
    out[i] = 0.5 * alpha * (1.0 - s[i]) + (1.0 - alpha) * std::abs(a[i] - b[i]);
  }
  return out;
}

double pe_geo_mean(const Image& a, const Image& b, double alpha, int window) {
  const Image pe = pe_geo(a, b, alpha, window);
  double sum = 0.0;
  for (size_t i = 0; i < pe.size(); ++i) sum += pe[i];
  return sum / static_cast<double>(pe.size());
}

Image pe_geo_mean_grad_b(const Image& a, const Image& b, double alpha,
                         int window) {
  require_same_shape(a, b, "pe_geo_mean_grad_b");
  const LossConfig defaults;
  const double c1 = defaults.ssim_c1;
  const double c2 = defaults.ssim_c2;
  const double inv_n_px = 1.0 / static_cast<double>(a.size());

  Image grad(a.width(), a.height(), 0.0);
  for_each_window(
      a, b, window,
      [&](int u, int v, int u0, int u1, int v0, int v1,
          const WindowStats& s) {
        const double num =
            (2.0 * s.mu_a * s.mu_b + c1) * (2.0 * s.cov + c2);
        const double den = (s.mu_a * s.mu_a + s.mu_b * s.mu_b + c1) *
                           (s.var_a + s.var_b + c2);
        const double d_mu =
            (2.0 * s.mu_a * (2.0 * s.cov + c2) * den -
             num * 2.0 * s.mu_b * (s.var_a + s.var_b + c2)) /
            (den * den);
        const double d_var =
            -num * (s.mu_a * s.mu_a + s.mu_b * s.mu_b + c1) / (den * den);
        const double d_cov = 2.0 * (2.0 * s.mu_a * s.mu_b + c1) / den;

        // d(mean pe)/dS at this pixel is -alpha/2 * 1/N.
        const double scale = -0.5 * alpha * inv_n_px;
        const double inv_cnt = 1.0 / s.count;
        for (int y = v0; y <= v1; ++y) {
          for (int x = u0; x <= u1; ++x) {
            const double db = d_mu * inv_cnt +
                              d_var * 2.0 * (b.at(x, y) - s.mu_b) * inv_cnt +
                              d_cov * (a.at(x, y) - s.mu_a) * inv_cnt;
            grad.at(x, y) += scale * db;
          }
        }
        // L1 term contributes only at the center pixel.
        const double diff = a.at(u, v) - b.at(u, v);
        if (diff != 0.0) {
          grad.at(u, v) +=
              (1.0 - alpha) * inv_n_px * (diff > 0.0 ? -1.0 : 1.0);
        }
      });
  return grad;
}

GeoPhotoResult geo_photo_loss(const FrameGraph& graph,
                              const std::map<int, AggregatedMask>& masks,
                              const LossConfig& cfg) {
  GeoPhotoResult result;
  double sum = 0.0;
  size_t count = 0;

  const PixelGrid grid(graph.intrinsics());
  for (const Edge& e : graph.edges()) {
    const Frame& fi = graph.frame(e.i);
    const Frame& fj = graph.frame(e.j);
    const CorrespondenceField corr = reproject(
        graph.intrinsics(), relative(fi.pose, fj.pose), fi.inv_depth, grid);
    auto [warped, warp_valid] = warp_image(fj.image, corr);
    // Invalid pixels take the source value so they cannot contaminate the
    // SSIM windows of counted neighbors.
    for (size_t k = 0; k < warped.size(); ++k) {
      if (!warp_valid[k]) warped[k] = fi.image[k];
    }
    const Image pe = pe_geo(fi.image, warped, cfg.alpha, cfg.ssim_window);

    const auto mask_it = masks.find(e.i);
    size_t edge_count = 0;
    for (int v = 0; v < pe.height(); ++v) {
      for (int u = 0; u < pe.width(); ++u) {
        if (!warp_valid.at(u, v)) continue;
        if (mask_it != masks.end() && !mask_it->second.values.at(u, v))
          continue;
        sum += pe.at(u, v);
        ++edge_count;
      }
    }
    if (edge_count == 0) ++result.empty_edges;
    count += edge_count;
  }

  result.static_pixels = count;
  result.loss = (count == 0) ? 0.0 : sum / static_cast<double>(count);
  return result;
}

double flow_photo_loss(const FrameGraph& graph) {
  double sum = 0.0;
  size_t count = 0;
  for (const Edge& e : graph.edges()) {
    if (e.opt_flow.width() == 0) continue;
    const Frame& fi = graph.frame(e.i);
    const Frame& fj = graph.frame(e.j);

    CorrespondenceField corr(e.opt_flow.width(), e.opt_flow.height());
    for (int v = 0; v < corr.height(); ++v) {
      for (int u = 0; u < corr.width(); ++u) {
        corr.u.at(u, v) = u + e.opt_flow.du.at(u, v);
        corr.v.at(u, v) = v + e.opt_flow.dv.at(u, v);
        corr.valid.at(u, v) = e.opt_flow.valid.at(u, v);
      }
    }
    const auto [warped, warp_valid] = warp_image(fj.image, corr);
    for (int v = 0; v < corr.height(); ++v) {
      for (int u = 0; u < corr.width(); ++u) {
        if (!warp_valid.at(u, v)) continue;
        sum += std::abs(fi.image.at(u, v) - warped.at(u, v));
        ++count;
      }
    }
  }
  return (count == 0) ? 0.0 : sum / static_cast<double>(count);
}

double mask_ce_loss(const DynamicMask& pred, const DynamicMask& label) {
  require_same_shape(pred.values, label.values, "mask_ce_loss");
  double sum = 0.0;
  for (size_t i = 0; i < pred.values.size(); ++i) {
    const double p = std::clamp(pred.values[i], kClamp, 1.0 - kClamp);
    const double y = label.values[i];
    sum -= y * std::log(p) + (1.0 - y) * std::log(1.0 - p);
  }
  return sum / static_cast<double>(pred.values.size());
}

Grid2D<double> mask_ce_grad(const DynamicMask& pred,
                            const DynamicMask& label) {
  require_same_shape(pred.values, label.values, "mask_ce_grad");
  Grid2D<double> grad(pred.width(), pred.height(), 0.0);
  const double inv_n = 1.0 / static_cast<double>(pred.values.size());
  for (size_t i = 0; i < pred.values.size(); ++i) {
    const double raw = pred.values[i];
    if (raw <= kClamp || raw >= 1.0 - kClamp) continue;  // clamp region
    const double y = label.values[i];
    grad[i] = inv_n * (-y / raw + (1.0 - y) / (1.0 - raw));
  }
  return grad;
}

double artificial_mask_loss(const DynamicMask& pred, const Intrinsics& intr,
                            const PoseSE3& g_ij, const InverseDepthMap& d_i,
                            const FlowField& f_o, const PixelGrid& grid,
                            double mu) {
  const DynamicMask label = artificial_mask(intr, g_ij, d_i, f_o, grid, mu);
  return mask_ce_loss(pred, label);
}

double total_self_sup_loss(const std::vector<IterationLosses>& per_iteration,
                           const LossConfig& cfg) {
  if (per_iteration.empty()) {
    throw EmptyInput("total_self_sup_loss: no iterations");
  }
  const int k_total = static_cast<int>(per_iteration.size());
  double total = 0.0;
  for (int k = 0; k < k_total; ++k) {
    const IterationLosses& l = per_iteration[k];
    const double weighted =
        cfg.lambda1 * l.geo + cfg.lambda2 * l.flow + cfg.lambda3 * l.mask;
    total += std::pow(cfg.gamma, k_total - 1 - k) * weighted;
  }
  return total;
}

std::string loss_log_csv(const std::vector<IterationLosses>& per_iteration,
                         const LossConfig& cfg) {
  std::ostringstream os;
  os << "iter,geo,flow,mask,total\n";
  os.precision(17);
  for (size_t k = 0; k < per_iteration.size(); ++k) {
    const IterationLosses& l = per_iteration[k];
    const double total =
        cfg.lambda1 * l.geo + cfg.lambda2 * l.flow + cfg.lambda3 * l.mask;
    os << k << "," << l.geo << "," << l.flow << "," << l.mask << "," << total
       << "\n";
  }
  return os.str();
}

}  // namespace dualvo
