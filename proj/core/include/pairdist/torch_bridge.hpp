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

#include <span>

#include <torch/torch.h>

#include "pairdist/image.hpp"

namespace pairdist {

// HWC image -> 1 x C x H x W tensor.
torch::Tensor to_tensor(const ImageTensor& img, torch::Dtype dtype = torch::kFloat32);

// Stacks equally sized images into N x C x H x W.
torch::Tensor stack_images(std::span<const ImageTensor> images,
                           torch::Dtype dtype = torch::kFloat32);

// C x H x W (or 1 x C x H x W) tensor -> image. Values are clamped to [0, 1].
ImageTensor to_image(const torch::Tensor& chw, ColorSpace cs = ColorSpace::RGB);

}  // namespace pairdist
