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
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <torch/torch.h>

#include "pairdist/image.hpp"
#include "pairdist/stats.hpp"
#include "pairdist/tensor_archive.hpp"

namespace pairdist {

// Names a convolution inside the backbone: block i (1-based), conv j (1-based).
struct TapId {
  int block = 1;
  int conv = 1;

  std::string name() const;
  // Parses "block{i}_conv{j}". Throws ConfigError on malformed names.
  static TapId parse(const std::string& name);

  auto operator<=>(const TapId&) const = default;
};

// Plain VGG-style stack: 3x3 convs with ReLU, 2x2 max pooling between
// blocks. Taps are read before the ReLU.
class ConvStackImpl : public torch::nn::Module {
 public:
  explicit ConvStackImpl(std::vector<std::vector<int>> block_channels);

  // Returns the pre-activation output of every requested tap, in the order
  // given. Computation stops at the deepest requested tap. When `pattern` is
  // given, it receives the ReLU on/off states and max-pool argmax indices
  // that fix the piecewise-linear region of x.
  std::vector<torch::Tensor> forward_taps(const torch::Tensor& x, std::span<const TapId> taps,
                                          std::vector<torch::Tensor>* pattern = nullptr);

  const std::vector<std::vector<int>>& block_channels() const { return block_channels_; }
  // Weights keyed "block{i}_conv{j}.weight" / ".bias".
  std::vector<NamedTensor> named_weights() const;

 private:
  std::vector<std::vector<int>> block_channels_;
  std::vector<std::vector<torch::nn::Conv2d>> convs_;
};

TORCH_MODULE(ConvStack);

// Feature maps for one image, one entry per tap (c x h x w), tap order kept.
struct FeaturePack {
  std::vector<std::string> names;
  std::vector<torch::Tensor> maps;

  std::size_t size() const noexcept { return maps.size(); }
};

enum class BackboneKind { RandomSmall, Vgg19 };

// Frozen feature extractor. Immutable after construction; copies share the
// backbone weights.
class FeatureExtractor {
 public:
  // Small stack (channels 16/32/64/64, two convs per block) initialized from
  // a fixed seed. Default taps: block2_conv2, block3_conv2, block4_conv2.
  static FeatureExtractor random_small(std::uint64_t seed = 0,
                                       std::vector<TapId> taps = default_taps());
  // VGG-19 layout with ImageNet input normalization; weights from a tensor
  // archive whose names follow "block{i}_conv{j}.weight|bias".
  static FeatureExtractor vgg19(const std::filesystem::path& weights,
                                std::vector<TapId> taps = vgg19_default_taps());

  static std::vector<TapId> default_taps();
  static std::vector<TapId> vgg19_default_taps();

  // Differentiable w.r.t. `images` (N x 3 x H x W in [0, 1]); returns one
  // N x c x h x w tensor per tap.
  std::vector<torch::Tensor> forward(const torch::Tensor& images) const;
  // Same, for an arbitrary tap list.
  std::vector<torch::Tensor> forward(const torch::Tensor& images, std::span<const TapId> taps) const;

  FeaturePack extract(const ImageTensor& img) const;

  // Flattened ReLU states and pooling indices up to the deepest tap. Two
  // inputs with equal patterns lie in the same linear region of the backbone.
  torch::Tensor activation_pattern(const torch::Tensor& images) const;

  // Copy running in another floating dtype (double for gradient checks).
  FeatureExtractor to(torch::Dtype dtype) const;

  const std::vector<TapId>& taps() const noexcept { return taps_; }
  std::vector<std::string> tap_names() const;
  torch::Dtype dtype() const noexcept { return dtype_; }
  BackboneKind kind() const noexcept { return kind_; }
  // Smallest spatial size the deepest tap needs (one pixel after pooling).
  int min_input_size() const noexcept;
  // CRC of all backbone weights; constant for a frozen extractor.
  std::uint32_t weights_digest() const;

 private:
  FeatureExtractor() = default;

  ConvStack net_{nullptr};
  std::vector<TapId> taps_;
  torch::Tensor mean_;  // 1 x 3 x 1 x 1
  torch::Tensor std_;
  torch::Dtype dtype_ = torch::kFloat32;
  BackboneKind kind_ = BackboneKind::RandomSmall;
};

// G[p, q] = (1 / (h w)) sum_{m,n} f[p, m, n] f[q, m, n]. Accepts c x h x w
// or N x c x h x w and returns c x c or N x c x c. Differentiable.
torch::Tensor gram(const torch::Tensor& f);

// Per-channel spatial mean followed by per-channel spatial (population)
// standard deviation: length 2c.
Eigen::VectorXd pooled_descriptor(const torch::Tensor& chw);

// Fits a Gaussian to the pooled descriptors of `images` at `tap`.
// Throws InvalidInput for fewer than two images.
GaussianStats fit_feature_gaussian(std::span<const ImageTensor> images, const FeatureExtractor& ex,
                                   const TapId& tap);

}  // namespace pairdist
