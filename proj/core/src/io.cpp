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
#include "dualvo/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

namespace dualvo {

namespace {

constexpr float kFloMagic = 202021.25f;

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  return out;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for reading: " + path);
  return in;
}

template <typename T>
void write_raw(std::ofstream& out, const T& value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_raw(std::ifstream& in, const std::string& path) {
  T value;
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw IoError("truncated file: " + path);
  return value;
}

}  // namespace

void save_flo(const std::string& path, const FlowField& flow) {
  std::ofstream out = open_out(path);
  write_raw(out, kFloMagic);
  write_raw(out, static_cast<int32_t>(flow.width()));
  write_raw(out, static_cast<int32_t>(flow.height()));
  for (int v = 0; v < flow.height(); ++v) {
    for (int u = 0; u < flow.width(); ++u) {
      write_raw(out, static_cast<float>(flow.du.at(u, v)));
      write_raw(out, static_cast<float>(flow.dv.at(u, v)));
    }
  }
  if (!out) throw IoError("write failed: " + path);
}

FlowField load_flo(const std::string& path) {
  std::ifstream in = open_in(path);
  const float magic = read_raw<float>(in, path);
  if (magic != kFloMagic) {
    throw ParseError("load_flo: bad magic in " + path, 1);
  }
  const int32_t w = read_raw<int32_t>(in, path);
  const int32_t h = read_raw<int32_t>(in, path);
  if (w <= 0 || h <= 0 || w > 1 << 16 || h > 1 << 16) {
    throw ParseError("load_flo: implausible size in " + path, 1);
  }
  FlowField flow(w, h);
  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) {
      flow.du.at(u, v) = read_raw<float>(in, path);
      flow.dv.at(u, v) = read_raw<float>(in, path);
    }
  }
  return flow;
}

namespace {

void write_pnm_header(std::ofstream& out, const char* tag, int w, int h,
                      int maxval) {
  out << tag << "\n" << w << " " << h << "\n" << maxval << "\n";
}

struct PnmHeader {
  std::string tag;
  int width = 0, height = 0, maxval = 0;
};

PnmHeader read_pnm_header(std::ifstream& in, const std::string& path) {
  PnmHeader hd;
  // Token reader skipping whitespace and '#' comments.
  auto next = [&]() -> std::string {
    std::string tok;
    int c;
    while ((c = in.get()) != EOF) {
      if (c == '#') {
        while ((c = in.get()) != EOF && c != '\n') {
        }
        continue;
      }
      if (std::isspace(c)) {
        if (!tok.empty()) break;
        continue;
      }
      tok.push_back(static_cast<char>(c));
    }
    if (tok.empty()) throw ParseError("PNM header truncated: " + path, 1);
    return tok;
  };
  hd.tag = next();
  hd.width = std::stoi(next());
  hd.height = std::stoi(next());
  hd.maxval = std::stoi(next());
  return hd;
}

}  // namespace

void save_pgm_mask(const std::string& path, const DynamicMask& mask) {
  std::ofstream out = open_out(path);
  write_pnm_header(out, "P5", mask.width(), mask.height(), 255);
  for (int v = 0; v < mask.height(); ++v) {
    for (int u = 0; u < mask.width(); ++u) {
      out.put(mask.values.at(u, v) >= 0.5 ? char(255) : char(0));
    }
  }
  if (!out) throw IoError("write failed: " + path);
}

DynamicMask load_pgm_mask(const std::string& path) {
  std::ifstream in = open_in(path);
  const PnmHeader hd = read_pnm_header(in, path);
  if (hd.tag != "P5" || hd.maxval != 255) {
    throw ParseError("load_pgm_mask: expected P5 maxval 255 in " + path, 1);
  }
  DynamicMask mask(hd.width, hd.height, 0.0);
  for (int v = 0; v < hd.height; ++v) {
    for (int u = 0; u < hd.width; ++u) {
      const int c = in.get();
      if (c == EOF) throw IoError("truncated file: " + path);
      mask.values.at(u, v) = c >= 128 ? 1.0 : 0.0;
    }
  }
  return mask;
}

void save_pgm_image(const std::string& path, const Image& img) {
  std::ofstream out = open_out(path);
  write_pnm_header(out, "P5", img.width(), img.height(), 65535);
  for (int v = 0; v < img.height(); ++v) {
    for (int u = 0; u < img.width(); ++u) {
      const double clamped = std::clamp(img.at(u, v), 0.0, 1.0);
      const uint16_t q = static_cast<uint16_t>(std::lround(clamped * 65535.0));
      out.put(static_cast<char>(q >> 8));  // PGM 16-bit is big-endian
      out.put(static_cast<char>(q & 0xff));
    }
  }
  if (!out) throw IoError("write failed: " + path);
}

Image load_pgm_image(const std::string& path) {
  std::ifstream in = open_in(path);
  const PnmHeader hd = read_pnm_header(in, path);
  if (hd.tag != "P5") throw ParseError("load_pgm_image: not P5: " + path, 1);
  Image img(hd.width, hd.height, 0.0);
  for (int v = 0; v < hd.height; ++v) {
    for (int u = 0; u < hd.width; ++u) {
      int value;
      if (hd.maxval > 255) {
        const int hi = in.get();
        const int lo = in.get();
        if (lo == EOF) throw IoError("truncated file: " + path);
        value = (hi << 8) | lo;
      } else {
        value = in.get();
        if (value == EOF) throw IoError("truncated file: " + path);
      }
      img.at(u, v) = static_cast<double>(value) / hd.maxval;
    }
  }
  return img;
}

void save_pfm(const std::string& path, const Grid2D<double>& values) {
  std::ofstream out = open_out(path);
  out << "Pf\n" << values.width() << " " << values.height() << "\n-1.0\n";
  // Negative scale marks little-endian; rows run bottom-to-top.
  for (int v = values.height() - 1; v >= 0; --v) {
    for (int u = 0; u < values.width(); ++u) {
      write_raw(out, static_cast<float>(values.at(u, v)));
    }
  }
  if (!out) throw IoError("write failed: " + path);
}

Grid2D<double> load_pfm(const std::string& path) {
  std::ifstream in = open_in(path);
  std::string tag;
  int w = 0, h = 0;
  double scale = 0.0;
  in >> tag >> w >> h >> scale;
  if (tag != "Pf" || w <= 0 || h <= 0) {
    throw ParseError("load_pfm: bad header in " + path, 1);
  }
  if (scale >= 0.0) {
    throw ParseError("load_pfm: big-endian PFM unsupported: " + path, 1);
  }
  in.get();  // single whitespace after the scale line
  Grid2D<double> values(w, h, 0.0);
  for (int v = h - 1; v >= 0; --v) {
    for (int u = 0; u < w; ++u) {
      values.at(u, v) = read_raw<float>(in, path);
    }
  }
  return values;
}

std::string fnv1a_hex(const std::string& data) {
  uint64_t hash = 0xcbf29ce484222325ull;
  for (unsigned char c : data) {
    hash ^= c;
    hash *= 0x100000001b3ull;
  }
  std::ostringstream os;
  os << std::hex << hash;
  return os.str();
}

}  // namespace dualvo
