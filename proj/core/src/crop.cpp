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

#include "pairdist/crop.hpp"

#include <random>
#include <string>

#include "pairdist/error.hpp"

namespace pairdist {

PairedCrop paired_random_crop(const ImageTensor& lr, const ImageTensor& hr, int lr_size, int scale,
                              std::uint64_t seed) {
  if (scale < 1 || lr_size < 1) throw InvalidInput("lr_size and scale must be positive");
  if (hr.height() != scale * lr.height() || hr.width() != scale * lr.width() ||
      hr.channels() != lr.channels()) {
    throw InvalidInput("HR size must be exactly scale x LR size");
  }
  if (lr.height() < lr_size || lr.width() < lr_size) {
    throw InvalidInput("patch size " + std::to_string(lr_size) + " exceeds LR image " +
                       std::to_string(lr.height()) + "x" + std::to_string(lr.width()));
  }
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> row(0, lr.height() - lr_size);
  std::uniform_int_distribution<int> col(0, lr.width() - lr_size);
  PairedCrop out;
  out.lr_top = row(rng);
  out.lr_left = col(rng);
  out.hr_top = scale * out.lr_top;
  out.hr_left = scale * out.lr_left;
  out.lr = lr.crop(out.lr_top, out.lr_left, lr_size, lr_size);
  out.hr = hr.crop(out.hr_top, out.hr_left, scale * lr_size, scale * lr_size);
  return out;
}

}  // namespace pairdist
