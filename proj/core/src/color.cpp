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

#include "pairdist/color.hpp"

#include <algorithm>

#include "pairdist/error.hpp"

namespace pairdist {

namespace {

constexpr double kKr = 0.299;
constexpr double kKg = 0.587;
constexpr double kKb = 0.114;

}  // namespace

ImageTensor rgb_to_ycbcr(const ImageTensor& rgb) {
  if (rgb.colorspace() != ColorSpace::RGB || rgb.channels() != 3) {
    throw InvalidInput("rgb_to_ycbcr expects a 3-channel RGB image");
  }
  ImageTensor out(rgb.height(), rgb.width(), 3, ColorSpace::YCbCr);
  for (int y = 0; y < rgb.height(); ++y) {
    for (int x = 0; x < rgb.width(); ++x) {
      const double r = rgb.at(y, x, 0), g = rgb.at(y, x, 1), b = rgb.at(y, x, 2);
      // Written relative to g so gray inputs map to Y == gray exactly.
      const double luma = g + kKr * (r - g) + kKb * (b - g);
      out.at(y, x, 0) = std::clamp(luma, 0.0, 1.0);
      out.at(y, x, 1) = std::clamp(0.5 + (b - luma) / (2.0 * (1.0 - kKb)), 0.0, 1.0);
      out.at(y, x, 2) = std::clamp(0.5 + (r - luma) / (2.0 * (1.0 - kKr)), 0.0, 1.0);
    }
  }
  out.set_source(rgb.source());
  return out;
}

ImageTensor ycbcr_to_rgb(const ImageTensor& ycc) {
  if (ycc.colorspace() != ColorSpace::YCbCr || ycc.channels() != 3) {
    throw InvalidInput("ycbcr_to_rgb expects a 3-channel YCbCr image");
  }
  ImageTensor out(ycc.height(), ycc.width(), 3, ColorSpace::RGB);
  for (int y = 0; y < ycc.height(); ++y) {
    for (int x = 0; x < ycc.width(); ++x) {
      const double luma = ycc.at(y, x, 0);
      const double cb = ycc.at(y, x, 1) - 0.5, cr = ycc.at(y, x, 2) - 0.5;
      const double r = luma + 2.0 * (1.0 - kKr) * cr;
      const double b = luma + 2.0 * (1.0 - kKb) * cb;
      const double g = (luma - kKr * r - kKb * b) / kKg;
      out.at(y, x, 0) = std::clamp(r, 0.0, 1.0);
      out.at(y, x, 1) = std::clamp(g, 0.0, 1.0);
      out.at(y, x, 2) = std::clamp(b, 0.0, 1.0);
    }
  }
  out.set_source(ycc.source());
  return out;
}

ImageTensor luma(const ImageTensor& img) {
  if (img.colorspace() == ColorSpace::YCbCr) return img.channel(0);
  if (img.channels() == 1) return img;
  return rgb_to_ycbcr(img).channel(0);
}

}  // namespace pairdist
