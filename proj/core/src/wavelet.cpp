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

#include "pairdist/wavelet.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "pairdist/error.hpp"

namespace pairdist {

namespace {

struct OneLevel {
  CoeffPlane ll;
  WaveletLevel detail;
};

OneLevel split(const CoeffPlane& in) {
  const int h = in.height / 2, w = in.width / 2, c = in.channels;
  OneLevel out{CoeffPlane(h, w, c), {CoeffPlane(h, w, c), CoeffPlane(h, w, c), CoeffPlane(h, w, c)}};
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int k = 0; k < c; ++k) {
        const double a = in.at(2 * y, 2 * x, k), b = in.at(2 * y, 2 * x + 1, k);
        const double cc = in.at(2 * y + 1, 2 * x, k), d = in.at(2 * y + 1, 2 * x + 1, k);
        out.ll.at(y, x, k) = 0.5 * (a + b + cc + d);
        out.detail.lh.at(y, x, k) = 0.5 * (a + b - cc - d);
        out.detail.hl.at(y, x, k) = 0.5 * (a - b + cc - d);
        out.detail.hh.at(y, x, k) = 0.5 * (a - b - cc + d);
      }
    }
  }
  return out;
}

CoeffPlane merge(const CoeffPlane& ll, const WaveletLevel& det) {
  const int h = ll.height, w = ll.width, c = ll.channels;
  CoeffPlane out(2 * h, 2 * w, c);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int k = 0; k < c; ++k) {
        const double s = ll.at(y, x, k), v = det.lh.at(y, x, k);
        const double u = det.hl.at(y, x, k), t = det.hh.at(y, x, k);
        out.at(2 * y, 2 * x, k) = 0.5 * (s + v + u + t);
        out.at(2 * y, 2 * x + 1, k) = 0.5 * (s + v - u - t);
        out.at(2 * y + 1, 2 * x, k) = 0.5 * (s - v + u - t);
        out.at(2 * y + 1, 2 * x + 1, k) = 0.5 * (s - v - u + t);
      }
    }
  }
  return out;
}

}  // namespace

WaveletSubbands haar_forward(const ImageTensor& img, int levels) {
  if (levels < 1) throw InvalidInput("wavelet levels must be >= 1");
  const int block = 1 << levels;
  if (img.empty() || img.height() % block != 0 || img.width() % block != 0) {
    throw InvalidShape("image " + std::to_string(img.height()) + "x" +
                       std::to_string(img.width()) + " not divisible by 2^" +
                       std::to_string(levels));
  }
  CoeffPlane current(img.height(), img.width(), img.channels());
  std::copy(img.data().begin(), img.data().end(), current.data.begin());

  WaveletSubbands out;
  out.colorspace = img.colorspace();
  for (int l = 0; l < levels; ++l) {
    OneLevel step = split(current);
    out.details.push_back(std::move(step.detail));
    current = std::move(step.ll);
  }
  out.ll = std::move(current);
  return out;
}

ImageTensor haar_inverse(const WaveletSubbands& sub) {
  if (sub.details.empty()) throw InvalidShape("subbands carry no decomposition level");
  CoeffPlane current = sub.ll;
  for (int l = sub.levels() - 1; l >= 0; --l) {
    const WaveletLevel& det = sub.details[l];
    if (!current.same_shape(det.lh) || !current.same_shape(det.hl) ||
        !current.same_shape(det.hh)) {
      throw InvalidShape("inconsistent subband shapes at level " + std::to_string(l + 1));
    }
    current = merge(current, det);
  }
  return ImageTensor::from_data_clipped(current.height, current.width, current.channels,
                                        std::move(current.data), sub.colorspace);
}

double subband_energy(const WaveletSubbands& sub) {
  auto sq = [](const CoeffPlane& p) {
    double s = 0.0;
    for (double v : p.data) s += v * v;
    return s;
  };
  double total = sq(sub.ll);
  for (const auto& d : sub.details) total += sq(d.lh) + sq(d.hl) + sq(d.hh);
  return total;
}

}  // namespace pairdist
