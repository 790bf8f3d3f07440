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

#include "pairdist/procedural.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>

#include "pairdist/degradation.hpp"
#include "pairdist/error.hpp"
#include "pairdist/resize.hpp"

namespace pairdist {

namespace {

struct Rgb {
  double r, g, b;
};

Rgb random_color(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.05, 0.95);
  return {u(rng), u(rng), u(rng)};
}

}  // namespace

ImageTensor procedural_image(int height, int width, std::uint64_t seed) {
  if (height < 8 || width < 8) throw InvalidShape("procedural images need at least 8x8");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  const int H = 2 * height, W = 2 * width;
  std::vector<double> px(static_cast<std::size_t>(H) * W * 3);
  auto put = [&](int y, int x, const Rgb& c, double alpha) {
    double* p = &px[(static_cast<std::size_t>(y) * W + x) * 3];
    p[0] = (1 - alpha) * p[0] + alpha * c.r;
    p[1] = (1 - alpha) * p[1] + alpha * c.g;
    p[2] = (1 - alpha) * p[2] + alpha * c.b;
  };

  // Background: bilinear blend of four corner colors.
  const Rgb c00 = random_color(rng), c01 = random_color(rng), c10 = random_color(rng),
            c11 = random_color(rng);
  for (int y = 0; y < H; ++y) {
    const double ty = static_cast<double>(y) / (H - 1);
    for (int x = 0; x < W; ++x) {
      const double tx = static_cast<double>(x) / (W - 1);
      double* p = &px[(static_cast<std::size_t>(y) * W + x) * 3];
      p[0] = (1 - ty) * ((1 - tx) * c00.r + tx * c01.r) + ty * ((1 - tx) * c10.r + tx * c11.r);
      p[1] = (1 - ty) * ((1 - tx) * c00.g + tx * c01.g) + ty * ((1 - tx) * c10.g + tx * c11.g);
      p[2] = (1 - ty) * ((1 - tx) * c00.b + tx * c01.b) + ty * ((1 - tx) * c10.b + tx * c11.b);
    }
  }

  const int shapes = 6 + static_cast<int>(rng() % 7);
  for (int s = 0; s < shapes; ++s) {
    const int kind = static_cast<int>(rng() % 4);
    const Rgb color = random_color(rng);
    const Rgb color2 = random_color(rng);
    const double cy = u01(rng) * H, cx = u01(rng) * W;
    const double ry = (0.08 + 0.3 * u01(rng)) * H, rx = (0.08 + 0.3 * u01(rng)) * W;
    const double angle = u01(rng) * std::numbers::pi;
    const double ca = std::cos(angle), sa = std::sin(angle);
    // Grating period in render pixels; short periods produce fine detail.
    const double period = 3.0 + 10.0 * u01(rng);
    const double alpha = 0.6 + 0.4 * u01(rng);
    for (int y = 0; y < H; ++y) {
      for (int x = 0; x < W; ++x) {
        const double dy = y - cy, dx = x - cx;
        const double a = (ca * dx + sa * dy) / rx;
        const double b = (-sa * dx + ca * dy) / ry;
        bool inside = false;
        Rgb c = color;
        switch (kind) {
          case 0:  // ellipse
            inside = a * a + b * b <= 1.0;
            break;
          case 1:  // rotated rectangle
            inside = std::abs(a) <= 1.0 && std::abs(b) <= 1.0;
            break;
          case 2: {  // striped rectangle
            inside = std::abs(a) <= 1.0 && std::abs(b) <= 1.0;
            const double phase = (ca * dx + sa * dy) / period;
            if (std::fmod(std::floor(phase), 2.0) == 0.0) c = color2;
            break;
          }
          case 3: {  // thick line
            inside = std::abs(b) <= 0.06 && std::abs(a) <= 1.5;
            break;
          }
        }
        if (inside) put(y, x, c, alpha);
      }
    }
  }

  // Sparse dot texture.
  const int dots = (H * W) / 180;
  for (int d = 0; d < dots; ++d) {
    const int y = static_cast<int>(rng() % H), x = static_cast<int>(rng() % W);
    const double v = u01(rng) < 0.5 ? 0.1 : 0.9;
    put(y, x, {v, v, v}, 0.5);
    if (x + 1 < W) put(y, x + 1, {v, v, v}, 0.5);
  }

  ImageTensor big = ImageTensor::from_data_clipped(H, W, 3, std::move(px));
  ImageTensor out = resize(big, height, width, Interp::Bicubic);
  out.set_source("procedural_" + std::to_string(seed));
  return out;
}

std::vector<std::filesystem::path> write_procedural_corpus(const std::filesystem::path& dir,
                                                          int count, int height, int width,
                                                          std::uint64_t seed) {
  if (count < 1) throw InvalidInput("corpus count must be >= 1");
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  std::vector<std::filesystem::path> paths;
  for (int i = 0; i < count; ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "img_%04d.png", i);
    const auto path = dir / name;
    write_png(procedural_image(height, width, mix_seed(seed, static_cast<std::uint64_t>(i))), path);
    paths.push_back(path);
  }
  return paths;
}

}  // namespace pairdist
