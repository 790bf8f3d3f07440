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

#include "pairdist/torch_bridge.hpp"

#include "pairdist/error.hpp"

namespace pairdist {

torch::Tensor to_tensor(const ImageTensor& img, torch::Dtype dtype) {
  if (img.empty()) throw InvalidShape("empty image");
  auto hwc = torch::from_blob(const_cast<double*>(img.data().data()),
                              {img.height(), img.width(), img.channels()}, torch::kFloat64);
  return hwc.permute({2, 0, 1}).unsqueeze(0).to(dtype).contiguous();
}

torch::Tensor stack_images(std::span<const ImageTensor> images, torch::Dtype dtype) {
  if (images.empty()) throw InvalidInput("no images to stack");
  std::vector<torch::Tensor> parts;
  parts.reserve(images.size());
  for (const auto& img : images) {
    if (!img.same_shape(images.front())) throw InvalidShape("images differ in shape");
    parts.push_back(to_tensor(img, dtype));
  }
  return torch::cat(parts, 0);
}

ImageTensor to_image(const torch::Tensor& chw, ColorSpace cs) {
  torch::Tensor t = chw.detach();
  if (t.dim() == 4) {
    if (t.size(0) != 1) throw InvalidShape("expected a single image tensor");
    t = t.squeeze(0);
  }
  if (t.dim() != 3) throw InvalidShape("expected C x H x W tensor");
  if (!torch::isfinite(t).all().item<bool>()) throw InvalidInput("non-finite tensor values");
  t = t.clamp(0.0, 1.0).permute({1, 2, 0}).to(torch::kFloat64).contiguous();
  const auto h = static_cast<int>(t.size(0)), w = static_cast<int>(t.size(1)),
             c = static_cast<int>(t.size(2));
  std::vector<double> data(t.data_ptr<double>(), t.data_ptr<double>() + t.numel());
  return ImageTensor::from_data(h, w, c, std::move(data), cs);
}

}  // namespace pairdist
