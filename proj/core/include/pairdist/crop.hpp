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

#include <cstdint>

#include "pairdist/image.hpp"

namespace pairdist {

struct PairedCrop {
  ImageTensor lr;
  ImageTensor hr;
  int lr_top = 0;
  int lr_left = 0;
  int hr_top = 0;   // always scale * lr_top
  int hr_left = 0;  // always scale * lr_left
};

// Aligned LR/HR patch pair. The LR offset is drawn uniformly from all valid
// positions using a generator seeded with `seed`.
PairedCrop paired_random_crop(const ImageTensor& lr, const ImageTensor& hr, int lr_size, int scale,
                              std::uint64_t seed);

}  // namespace pairdist
