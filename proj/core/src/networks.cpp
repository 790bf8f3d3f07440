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

#include "pairdist/networks.hpp"

#include <cmath>

#include <ATen/CPUGeneratorImpl.h>

#include "pairdist/error.hpp"

namespace pairdist {

namespace F = torch::nn::functional;

namespace {

constexpr double kLeakySlope = 0.2;

torch::Tensor lrelu(const torch::Tensor& x) { return F::leaky_relu(x, F::LeakyReLUFuncOptions().negative_slope(kLeakySlope)); }

// Kaiming-normal for LeakyReLU(0.2) fan-in, multiplied by `scale`.
void init_conv(torch::nn::Conv2d& conv, torch::Generator& gen, double scale) {
  torch::NoGradGuard no_grad;
  auto& w = conv->weight;
  const double fan_in = static_cast<double>(w[0].numel());
  const double gain = std::sqrt(2.0 / (1.0 + kLeakySlope * kLeakySlope));
  w.copy_(torch::randn(w.sizes(), gen) * (scale * gain / std::sqrt(fan_in)));
  conv->bias.zero_();
}

torch::nn::Conv2d make_conv(int in, int out, int k = 3) {
  return torch::nn::Conv2d(torch::nn::Conv2dOptions(in, out, k).padding(k / 2));
}

std::vector<int> upsample_factors(int scale) {
  switch (scale) {
    case 1: return {};
    case 2: return {2};
    case 3: return {3};
    case 4: return {2, 2};
    case 8: return {2, 2, 2};
  }
  throw ConfigError("unsupported scale " + std::to_string(scale) + " (expected 1, 2, 3, 4 or 8)");
}

std::vector<NamedTensor> collect(const torch::nn::Module& m) {
  std::vector<NamedTensor> out;
  for (const auto& item : m.named_parameters(/*recurse=*/true)) out.push_back({item.key(), item.value()});
  for (const auto& item : m.named_buffers(/*recurse=*/true)) out.push_back({item.key(), item.value()});
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Generator
// ---------------------------------------------------------------------------

void GeneratorConfig::validate() const {
  upsample_factors(scale);
  if (num_feat < 1 || num_blocks < 0 || growth < 1 || dense_layers < 2) {
    throw ConfigError("generator needs num_feat >= 1, num_blocks >= 0, growth >= 1, dense_layers >= 2");
  }
}

bool GeneratorConfig::same_architecture(const GeneratorConfig& o) const {
  return scale == o.scale && num_feat == o.num_feat && num_blocks == o.num_blocks &&
         growth == o.growth && dense_layers == o.dense_layers && global_skip == o.global_skip;
}

nlohmann::json to_json(const GeneratorConfig& cfg) {
  return {{"scale", cfg.scale},           {"num_feat", cfg.num_feat},
          {"num_blocks", cfg.num_blocks}, {"growth", cfg.growth},
          {"dense_layers", cfg.dense_layers}, {"global_skip", cfg.global_skip},
          {"seed", cfg.seed}};
}

GeneratorConfig generator_config_from_json(const nlohmann::json& j) {
  GeneratorConfig cfg;
  for (const auto& [key, value] : j.items()) {
    if (key == "scale") cfg.scale = value.get<int>();
    else if (key == "num_feat") cfg.num_feat = value.get<int>();
    else if (key == "num_blocks") cfg.num_blocks = value.get<int>();
    else if (key == "growth") cfg.growth = value.get<int>();
    else if (key == "dense_layers") cfg.dense_layers = value.get<int>();
    else if (key == "global_skip") cfg.global_skip = value.get<bool>();
    else if (key == "seed") cfg.seed = value.get<std::uint64_t>();
    else throw ConfigError("unknown generator key '" + key + "'");
  }
  cfg.validate();
  return cfg;
}

ResidualDenseBlockImpl::ResidualDenseBlockImpl(int num_feat, int growth, int layers) {
  for (int i = 0; i < layers; ++i) {
    const int in = num_feat + i * growth;
    const int out = i + 1 < layers ? growth : num_feat;
    convs_.push_back(register_module("conv" + std::to_string(i), make_conv(in, out)));
  }
}

torch::Tensor ResidualDenseBlockImpl::forward(const torch::Tensor& x) {
  std::vector<torch::Tensor> feats{x};
  for (std::size_t i = 0; i + 1 < convs_.size(); ++i) {
    feats.push_back(lrelu(convs_[i]->forward(torch::cat(feats, 1))));
  }
  return x + 0.2 * convs_.back()->forward(torch::cat(feats, 1));
}

GeneratorImpl::GeneratorImpl(const GeneratorConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  auto gen = at::make_generator<at::CPUGeneratorImpl>(cfg_.seed);
  const int nf = cfg_.num_feat;

  conv_first_ = register_module("conv_first", make_conv(3, nf));
  init_conv(conv_first_, gen, 1.0);
  for (int b = 0; b < cfg_.num_blocks; ++b) {
    auto block = register_module("block" + std::to_string(b),
                                 ResidualDenseBlock(nf, cfg_.growth, cfg_.dense_layers));
    for (auto& child : block->children()) {
      auto conv = std::dynamic_pointer_cast<torch::nn::Conv2dImpl>(child);
      if (conv) {
        torch::nn::Conv2d holder(conv);
        init_conv(holder, gen, 0.1);
      }
    }
    blocks_.push_back(block);
  }
  conv_body_ = register_module("conv_body", make_conv(nf, nf));
  init_conv(conv_body_, gen, 1.0);
  up_factors_ = upsample_factors(cfg_.scale);
  for (std::size_t i = 0; i < up_factors_.size(); ++i) {
    const int r = up_factors_[i];
    torch::nn::Conv2d conv = register_module("conv_up" + std::to_string(i), make_conv(nf, nf * r * r));
    init_conv(conv, gen, 1.0);
    up_convs_.push_back(conv);
  }
  conv_hr_ = register_module("conv_hr", make_conv(nf, nf));
  init_conv(conv_hr_, gen, 1.0);
  conv_last_ = register_module("conv_last", make_conv(nf, 3));
  // Small output layer: with the global skip the initial network is close
  // to bicubic upsampling.
  init_conv(conv_last_, gen, cfg_.global_skip ? 0.1 : 1.0);
}

torch::Tensor GeneratorImpl::forward(const torch::Tensor& x) {
  if (x.dim() != 4 || x.size(1) != 3) throw InvalidShape("generator expects N x 3 x H x W");
  torch::Tensor fea = conv_first_->forward(x);
  torch::Tensor body = fea;
  for (auto& b : blocks_) body = b->forward(body);
  fea = fea + conv_body_->forward(body);
  for (std::size_t i = 0; i < up_convs_.size(); ++i) {
    fea = lrelu(F::pixel_shuffle(up_convs_[i]->forward(fea), up_factors_[i]));
  }
  torch::Tensor out = conv_last_->forward(lrelu(conv_hr_->forward(fea)));
  if (cfg_.global_skip) {
    if (cfg_.scale == 1) {
      out = out + x;
    } else {
      out = out + F::interpolate(x, F::InterpolateFuncOptions()
                                        .scale_factor(std::vector<double>{double(cfg_.scale), double(cfg_.scale)})
                                        .mode(torch::kBicubic)
                                        .align_corners(false));
    }
  }
  return out;
}

std::vector<NamedTensor> GeneratorImpl::named_tensors() const { return collect(*this); }

std::int64_t GeneratorImpl::parameter_count() const {
  std::int64_t n = 0;
  for (const auto& p : parameters()) n += p.numel();
  return n;
}

Generator build_generator(const GeneratorConfig& cfg) { return Generator(cfg); }

// ---------------------------------------------------------------------------
// Discriminator
// ---------------------------------------------------------------------------

void DiscriminatorConfig::validate() const {
  if (num_feat < 1) throw ConfigError("discriminator num_feat must be >= 1");
}

nlohmann::json to_json(const DiscriminatorConfig& cfg) {
  return {{"num_feat", cfg.num_feat}, {"spectral_norm", cfg.spectral_norm}, {"seed", cfg.seed}};
}

DiscriminatorConfig discriminator_config_from_json(const nlohmann::json& j) {
  DiscriminatorConfig cfg;
  for (const auto& [key, value] : j.items()) {
    if (key == "num_feat") cfg.num_feat = value.get<int>();
    else if (key == "spectral_norm") cfg.spectral_norm = value.get<bool>();
    else if (key == "seed") cfg.seed = value.get<std::uint64_t>();
    else throw ConfigError("unknown discriminator key '" + key + "'");
  }
  cfg.validate();
  return cfg;
}

SpectralConv2dImpl::SpectralConv2dImpl(int in_ch, int out_ch, int kernel, int stride, int padding,
                                       bool normalize, torch::Generator& gen)
    : stride_(stride), padding_(padding), normalize_(normalize) {
  const double fan_in = static_cast<double>(in_ch) * kernel * kernel;
  const double gain = std::sqrt(2.0 / (1.0 + kLeakySlope * kLeakySlope));
  weight = register_parameter(
      "weight", torch::randn({out_ch, in_ch, kernel, kernel}, gen) * (gain / std::sqrt(fan_in)));
  bias = register_parameter("bias", torch::zeros({out_ch}));
  u = register_buffer("u", F::normalize(torch::randn({out_ch}, gen), F::NormalizeFuncOptions().dim(0)));
  v = register_buffer("v", F::normalize(torch::randn({static_cast<int64_t>(fan_in)}, gen),
                                        F::NormalizeFuncOptions().dim(0)));
  if (normalize_) {
    for (int i = 0; i < 10; ++i) power_iteration();
  }
}

void SpectralConv2dImpl::power_iteration() {
  if (!normalize_) return;
  torch::NoGradGuard no_grad;
  const torch::Tensor w = weight.reshape({weight.size(0), -1});
  const auto opts = F::NormalizeFuncOptions().dim(0).eps(1e-12);
  v.copy_(F::normalize(torch::mv(w.t(), u), opts));
  u.copy_(F::normalize(torch::mv(w, v), opts));
}

torch::Tensor SpectralConv2dImpl::sigma() const {
  const torch::Tensor w = weight.reshape({weight.size(0), -1});
  return torch::dot(u, torch::mv(w, v));
}

torch::Tensor SpectralConv2dImpl::forward(const torch::Tensor& x) {
  const torch::Tensor w = normalize_ ? weight / sigma() : weight;
  return F::conv2d(x, w, F::Conv2dFuncOptions().bias(bias).stride(stride_).padding(padding_));
}

DiscriminatorImpl::DiscriminatorImpl(const DiscriminatorConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  auto gen = at::make_generator<at::CPUGeneratorImpl>(cfg_.seed);
  const int nf = cfg_.num_feat;
  const bool sn = cfg_.spectral_norm;
  struct Spec {
    int in, out, k, s, p;
    bool sn;
  };
  const std::vector<Spec> specs = {{3, nf, 3, 1, 1, false},
                                   {nf, 2 * nf, 4, 2, 1, sn},
                                   {2 * nf, 4 * nf, 4, 2, 1, sn},
                                   {4 * nf, 4 * nf, 3, 1, 1, sn},
                                   {4 * nf, 1, 3, 1, 1, false}};
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const auto& s = specs[i];
    layers_.push_back(register_module("layer" + std::to_string(i),
                                      SpectralConv2d(s.in, s.out, s.k, s.s, s.p, s.sn, gen)));
  }
}

torch::Tensor DiscriminatorImpl::forward(const torch::Tensor& x) {
  if (x.dim() != 4 || x.size(1) != 3) throw InvalidShape("discriminator expects N x 3 x H x W");
  torch::Tensor h = x;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    h = layers_[i]->forward(h);
    if (i + 1 < layers_.size()) h = lrelu(h);
  }
  return h;
}

torch::Tensor DiscriminatorImpl::activation_pattern(const torch::Tensor& x) {
  torch::NoGradGuard no_grad;
  std::vector<torch::Tensor> pattern;
  torch::Tensor h = x;
  for (std::size_t i = 0; i + 1 < layers_.size(); ++i) {
    h = layers_[i]->forward(h);
    pattern.push_back((h > 0).to(torch::kInt64).reshape({-1}));
    h = lrelu(h);
  }
  return torch::cat(pattern);
}

void DiscriminatorImpl::power_iteration() {
  for (auto& l : layers_) l->power_iteration();
}

std::vector<NamedTensor> DiscriminatorImpl::named_tensors() const { return collect(*this); }

void copy_named_tensors(std::vector<NamedTensor>& dst, const std::vector<NamedTensor>& src) {
  if (dst.size() != src.size()) throw IntegrityError("tensor count mismatch");
  torch::NoGradGuard no_grad;
  for (std::size_t i = 0; i < dst.size(); ++i) {
    if (dst[i].name != src[i].name || !dst[i].tensor.sizes().equals(src[i].tensor.sizes())) {
      throw IntegrityError("tensor '" + dst[i].name + "' does not match '" + src[i].name + "'");
    }
    dst[i].tensor.copy_(src[i].tensor);
  }
}

}  // namespace pairdist
