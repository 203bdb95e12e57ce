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

#include <string>

#include "dualvo/dualflow.hpp"
#include "dualvo/grid.hpp"

namespace dualvo {

// Middlebury .flo: little-endian, float magic 202021.25, int32 width and
// height, then row-major interleaved (du, dv) float32 pairs.
void save_flo(const std::string& path, const FlowField& flow);
FlowField load_flo(const std::string& path);

// Binary PGM (P5). Masks use maxval 255 with 255 = static; images pick
// maxval 65535 for enough intensity resolution.
void save_pgm_mask(const std::string& path, const DynamicMask& mask);
DynamicMask load_pgm_mask(const std::string& path);
void save_pgm_image(const std::string& path, const Image& img);
Image load_pgm_image(const std::string& path);

// PFM, grayscale "Pf": scale -1.0 (little-endian), rows bottom-to-top.
void save_pfm(const std::string& path, const Grid2D<double>& values);
Grid2D<double> load_pfm(const std::string& path);

// FNV-1a 64-bit, hex-encoded; used for config digests in run manifests.
std::string fnv1a_hex(const std::string& data);

}  // namespace dualvo
