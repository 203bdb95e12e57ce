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

#include <cstdint>
#include <vector>

#include "dualvo/errors.hpp"

namespace dualvo {

// Dense row-major H x W raster. (u, v) = (column, row); index = v * W + u.
template <typename T>
class Grid2D {
 public:
  Grid2D() = default;
  Grid2D(int width, int height, T fill = T{})
      : width_(width), height_(height),
        data_(static_cast<size_t>(width) * height, fill) {}

  int width() const { return width_; }
  int height() const { return height_; }
  size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T& at(int u, int v) { return data_[static_cast<size_t>(v) * width_ + u]; }
  const T& at(int u, int v) const {
    return data_[static_cast<size_t>(v) * width_ + u];
  }

  T& operator[](size_t i) { return data_[i]; }
  const T& operator[](size_t i) const { return data_[i]; }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }

  bool in_bounds(int u, int v) const {
    return u >= 0 && u < width_ && v >= 0 && v < height_;
  }

  template <typename U>
  bool same_shape(const Grid2D<U>& other) const {
    return width_ == other.width() && height_ == other.height();
  }

  void fill(const T& value) { data_.assign(data_.size(), value); }

  bool operator==(const Grid2D&) const = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
};

using Image = Grid2D<double>;          // intensities in [0, 1]
using InverseDepthMap = Grid2D<double>;

template <typename A, typename B>
void require_same_shape(const Grid2D<A>& a, const Grid2D<B>& b,
                        const char* what) {
  if (!a.same_shape(b)) {
    throw ShapeMismatch(std::string(what) + ": " + std::to_string(a.width()) +
                        "x" + std::to_string(a.height()) + " vs " +
                        std::to_string(b.width()) + "x" +
                        std::to_string(b.height()));
  }
}

}  // namespace dualvo
