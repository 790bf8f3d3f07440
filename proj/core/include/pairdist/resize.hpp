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

#include <string>

#include "pairdist/image.hpp"

namespace pairdist {

enum class Interp { Bicubic, Bilinear, Nearest };

std::string to_string(Interp interp);
Interp interp_from_string(const std::string& name);

// Cubic convolution kernel with a = -0.5 (Keys).
double cubic_kernel(double x) noexcept;

// Resamples to out_h x out_w. Bicubic and bilinear follow the MATLAB
// imresize convention: pixel-center alignment, symmetric boundary
// extension, and kernel stretching (antialiasing) when shrinking.
// The result is clipped to [0, 1].
ImageTensor resize(const ImageTensor& img, int out_h, int out_w, Interp interp = Interp::Bicubic);

// Downsamples by an integer factor. Throws InvalidShape unless H and W are
// divisible by scale.
ImageTensor bicubic_downsample(const ImageTensor& hr, int scale);

// Crops the bottom/right edges so H and W become multiples of scale.
ImageTensor mod_crop(const ImageTensor& img, int scale);

}  // namespace pairdist
