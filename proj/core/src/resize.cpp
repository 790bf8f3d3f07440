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

#include "pairdist/resize.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "pairdist/error.hpp"

namespace pairdist {

std::string to_string(Interp interp) {
  switch (interp) {
    case Interp::Bicubic: return "bicubic";
    case Interp::Bilinear: return "bilinear";
    case Interp::Nearest: return "nearest";
  }
  return "unknown";
}

Interp interp_from_string(const std::string& name) {
  if (name == "bicubic") return Interp::Bicubic;
  if (name == "bilinear") return Interp::Bilinear;
  if (name == "nearest") return Interp::Nearest;
  throw ConfigError("unknown interpolation '" + name + "'");
}

double cubic_kernel(double x) noexcept {
  const double ax = std::abs(x);
  const double ax2 = ax * ax, ax3 = ax2 * ax;
  if (ax <= 1.0) return 1.5 * ax3 - 2.5 * ax2 + 1.0;
  if (ax <= 2.0) return -0.5 * ax3 + 2.5 * ax2 - 4.0 * ax + 2.0;
  return 0.0;
}

namespace {

double linear_kernel(double x) noexcept {
  const double ax = std::abs(x);
  return ax < 1.0 ? 1.0 - ax : 0.0;
}

// Sparse resampling matrix for one axis: out[i] = sum_k weight[i][k] * in[index[i][k]].
struct AxisWeights {
  std::vector<std::vector<int>> index;
  std::vector<std::vector<double>> weight;
};

int mirror(int i, int n) {
  // Symmetric extension: ... 1 0 | 0 1 ... n-1 | n-1 n-2 ...
  const int period = 2 * n;
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - 1 - i;
}

AxisWeights axis_weights(int in_len, int out_len, Interp interp) {
  AxisWeights aw;
  aw.index.resize(out_len);
  aw.weight.resize(out_len);
  const double scale = static_cast<double>(out_len) / in_len;

  if (interp == Interp::Nearest) {
    for (int i = 0; i < out_len; ++i) {
      const int src = std::min(in_len - 1, static_cast<int>(std::floor((i + 0.5) / scale)));
      aw.index[i] = {src};
      aw.weight[i] = {1.0};
    }
    return aw;
  }

  const double base_width = interp == Interp::Bicubic ? 4.0 : 2.0;
  const bool shrink = scale < 1.0;
  const double width = shrink ? base_width / scale : base_width;
  const int taps = static_cast<int>(std::ceil(width)) + 2;

  for (int i = 0; i < out_len; ++i) {
    // 1-based MATLAB coordinates.
    const double u = (i + 1) / scale + 0.5 * (1.0 - 1.0 / scale);
    const int left = static_cast<int>(std::floor(u - width / 2.0));
    double total = 0.0;
    std::vector<int> idx;
    std::vector<double> wts;
    for (int k = 0; k < taps; ++k) {
      const int j = left + k;  // 1-based source index
      const double dist = u - j;
      double w = 0.0;
      if (interp == Interp::Bicubic) {
        w = shrink ? scale * cubic_kernel(scale * dist) : cubic_kernel(dist);
      } else {
        w = shrink ? scale * linear_kernel(scale * dist) : linear_kernel(dist);
      }
      if (w == 0.0) continue;
      idx.push_back(mirror(j - 1, in_len));
      wts.push_back(w);
      total += w;
    }
    for (double& w : wts) w /= total;
    aw.index[i] = std::move(idx);
    aw.weight[i] = std::move(wts);
  }
  return aw;
}

}  // namespace

ImageTensor resize(const ImageTensor& img, int out_h, int out_w, Interp interp) {
  if (img.empty()) throw InvalidShape("cannot resize an empty image");
  if (out_h <= 0 || out_w <= 0) throw InvalidShape("resize target must be positive");
  const int h = img.height(), w = img.width(), c = img.channels();
  if (out_h == h && out_w == w) return img;

  // Rows first, then columns (MATLAB resizes the dimension with the smaller
  // scale first; for the separable kernels used here the order only changes
  // rounding).
  const AxisWeights wy = axis_weights(h, out_h, interp);
  const AxisWeights wx = axis_weights(w, out_w, interp);

  std::vector<double> tmp(static_cast<std::size_t>(out_h) * w * c, 0.0);
  for (int i = 0; i < out_h; ++i) {
    for (std::size_t k = 0; k < wy.index[i].size(); ++k) {
      const int src = wy.index[i][k];
      const double wt = wy.weight[i][k];
      for (int x = 0; x < w; ++x)
        for (int ch = 0; ch < c; ++ch)
          tmp[(static_cast<std::size_t>(i) * w + x) * c + ch] += wt * img.at(src, x, ch);
    }
  }
  std::vector<double> out(static_cast<std::size_t>(out_h) * out_w * c, 0.0);
  for (int y = 0; y < out_h; ++y) {
    for (int j = 0; j < out_w; ++j) {
      for (std::size_t k = 0; k < wx.index[j].size(); ++k) {
        const int src = wx.index[j][k];
        const double wt = wx.weight[j][k];
        for (int ch = 0; ch < c; ++ch)
          out[(static_cast<std::size_t>(y) * out_w + j) * c + ch] +=
              wt * tmp[(static_cast<std::size_t>(y) * w + src) * c + ch];
      }
    }
  }
  ImageTensor result =
      ImageTensor::from_data_clipped(out_h, out_w, c, std::move(out), img.colorspace());
  result.set_source(img.source());
  return result;
}

ImageTensor bicubic_downsample(const ImageTensor& hr, int scale) {
  if (scale < 1) throw InvalidInput("scale must be >= 1");
  if (hr.empty() || hr.height() % scale != 0 || hr.width() % scale != 0) {
    throw InvalidShape("image " + std::to_string(hr.height()) + "x" + std::to_string(hr.width()) +
                       " not divisible by scale " + std::to_string(scale));
  }
  if (scale == 1) return hr;
  return resize(hr, hr.height() / scale, hr.width() / scale, Interp::Bicubic);
}

ImageTensor mod_crop(const ImageTensor& img, int scale) {
  if (scale < 1) throw InvalidInput("scale must be >= 1");
  const int h = img.height() - img.height() % scale;
  const int w = img.width() - img.width() % scale;
  if (h == 0 || w == 0) throw InvalidShape("image smaller than scale");
  if (h == img.height() && w == img.width()) return img;
  return img.crop(0, 0, h, w);
}

}  // namespace pairdist
