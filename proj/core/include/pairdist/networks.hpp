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
#include <vector>

#include <nlohmann/json.hpp>
#include <torch/torch.h>

#include "pairdist/tensor_archive.hpp"

namespace pairdist {

// Residual-dense SR generator, a desk-scale relative of the RRDB network.
struct GeneratorConfig {
  int scale = 4;
  int num_feat = 32;
  int num_blocks = 4;     // residual dense blocks
  int growth = 16;        // channels added per dense layer
  int dense_layers = 4;   // convolutions per dense block, the last one fuses
  bool global_skip = true;  // add a bicubic upsample of the input to the output
  std::uint64_t seed = 0;

  void validate() const;
  bool same_architecture(const GeneratorConfig& other) const;
};

nlohmann::json to_json(const GeneratorConfig& cfg);
GeneratorConfig generator_config_from_json(const nlohmann::json& j);

class ResidualDenseBlockImpl : public torch::nn::Module {
 public:
  ResidualDenseBlockImpl(int num_feat, int growth, int layers);
  torch::Tensor forward(const torch::Tensor& x);

 private:
  std::vector<torch::nn::Conv2d> convs_;
};
TORCH_MODULE(ResidualDenseBlock);

class GeneratorImpl : public torch::nn::Module {
 public:
  explicit GeneratorImpl(const GeneratorConfig& cfg);

  // N x 3 x H x W -> N x 3 x (scale H) x (scale W). Output is not clamped.
  torch::Tensor forward(const torch::Tensor& x);

  const GeneratorConfig& config() const noexcept { return cfg_; }
  // Parameters in registration order with stable names.
  std::vector<NamedTensor> named_tensors() const;
  std::int64_t parameter_count() const;

 private:
  GeneratorConfig cfg_;
  torch::nn::Conv2d conv_first_{nullptr};
  std::vector<ResidualDenseBlock> blocks_;
  torch::nn::Conv2d conv_body_{nullptr};
  std::vector<torch::nn::Conv2d> up_convs_;
  std::vector<int> up_factors_;
  torch::nn::Conv2d conv_hr_{nullptr};
  torch::nn::Conv2d conv_last_{nullptr};
};
TORCH_MODULE(Generator);

Generator build_generator(const GeneratorConfig& cfg);

// Patch critic: 5 convolutions, two stride-2, LeakyReLU(0.2) between,
// spectral normalization on the three middle layers.
struct DiscriminatorConfig {
  int num_feat = 32;
  bool spectral_norm = true;
  std::uint64_t seed = 1;

  void validate() const;
};

nlohmann::json to_json(const DiscriminatorConfig& cfg);
DiscriminatorConfig discriminator_config_from_json(const nlohmann::json& j);

// Conv2d whose weight is divided by its largest singular value, estimated
// with persistent power-iteration vectors. forward() never changes the
// estimate; power_iteration() advances it by one step.
class SpectralConv2dImpl : public torch::nn::Module {
 public:
  SpectralConv2dImpl(int in_ch, int out_ch, int kernel, int stride, int padding, bool normalize,
                     torch::Generator& gen);
  torch::Tensor forward(const torch::Tensor& x);
  void power_iteration();
  torch::Tensor sigma() const;

  torch::Tensor weight, bias, u, v;

 private:
  int stride_, padding_;
  bool normalize_;
};
TORCH_MODULE(SpectralConv2d);

class DiscriminatorImpl : public torch::nn::Module {
 public:
  explicit DiscriminatorImpl(const DiscriminatorConfig& cfg);

  // Patch logits, N x 1 x H/4 x W/4. Pure function of the current state.
  torch::Tensor forward(const torch::Tensor& x);
  // LeakyReLU on/off states; equal patterns mean the same linear region.
  torch::Tensor activation_pattern(const torch::Tensor& x);
  void power_iteration();

  const DiscriminatorConfig& config() const noexcept { return cfg_; }
  std::vector<NamedTensor> named_tensors() const;

 private:
  DiscriminatorConfig cfg_;
  std::vector<SpectralConv2d> layers_;
};
TORCH_MODULE(Discriminator);

// Copies values (not storage) from src into dst; names and shapes must match.
void copy_named_tensors(std::vector<NamedTensor>& dst, const std::vector<NamedTensor>& src);

}  // namespace pairdist
