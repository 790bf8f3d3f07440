// Copyright 2026 The pairdist Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <vector>

#include "pairdist/image.hpp"

namespace pairdist {

// Unconstrained H x W x C array of real coefficients.
struct CoeffPlane {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<double> data;

  CoeffPlane() = default;
  CoeffPlane(int h, int w, int c) : height(h), width(w), channels(c), data(static_cast<std::size_t>(h) * w * c, 0.0) {}

  double at(int y, int x, int c) const noexcept {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  double& at(int y, int x, int c) noexcept {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  bool same_shape(const CoeffPlane& o) const noexcept {
    return height == o.height && width == o.width && channels == o.channels;
  }
};

// Detail subbands of one decomposition level. For a 2x2 block
// [[a, b], [c, d]]:
//   LL = (a + b + c + d) / 2
//   LH = (a + b - c - d) / 2   (vertical difference)
//   HL = (a - b + c - d) / 2   (horizontal difference)
//   HH = (a - b - c + d) / 2
struct WaveletLevel {
  CoeffPlane lh;
  CoeffPlane hl;
  CoeffPlane hh;
};

struct WaveletSubbands {
  CoeffPlane ll;                     // coarsest approximation
  std::vector<WaveletLevel> details; // details[0] is the finest level
  ColorSpace colorspace = ColorSpace::RGB;

  int levels() const noexcept { return static_cast<int>(details.size()); }
};

// Orthonormal 2-D Haar decomposition applied independently per channel.
// Throws InvalidShape unless H and W are divisible by 2^levels.
WaveletSubbands haar_forward(const ImageTensor& img, int levels = 1);

// Exact inverse of haar_forward. The result is clipped to [0, 1]; for
// subbands produced by haar_forward the clip is a no-op up to rounding.
ImageTensor haar_inverse(const WaveletSubbands& sub);

// Sum of squared coefficients across all subbands.
double subband_energy(const WaveletSubbands& sub);

}  // namespace pairdist
