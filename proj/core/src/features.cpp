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

#include "pairdist/features.hpp"

#include <algorithm>
#include <cmath>
#include <regex>

#include <ATen/CPUGeneratorImpl.h>

#include "pairdist/error.hpp"
#include "pairdist/torch_bridge.hpp"

namespace pairdist {

std::string TapId::name() const {
  return "block" + std::to_string(block) + "_conv" + std::to_string(conv);
}

TapId TapId::parse(const std::string& name) {
  static const std::regex re(R"(block(\d+)_conv(\d+))");
  std::smatch m;
  if (!std::regex_match(name, m, re)) throw ConfigError("malformed tap name '" + name + "'");
  TapId t{std::stoi(m[1].str()), std::stoi(m[2].str())};
  if (t.block < 1 || t.conv < 1) throw ConfigError("tap indices are 1-based: '" + name + "'");
  return t;
}

ConvStackImpl::ConvStackImpl(std::vector<std::vector<int>> block_channels)
    : block_channels_(std::move(block_channels)) {
  int in_ch = 3;
  for (std::size_t b = 0; b < block_channels_.size(); ++b) {
    std::vector<torch::nn::Conv2d> block;
    for (std::size_t j = 0; j < block_channels_[b].size(); ++j) {
      const int out_ch = block_channels_[b][j];
      auto conv = torch::nn::Conv2d(torch::nn::Conv2dOptions(in_ch, out_ch, 3).padding(1));
      register_module("block" + std::to_string(b + 1) + "_conv" + std::to_string(j + 1), conv);
      block.push_back(conv);
      in_ch = out_ch;
    }
    convs_.push_back(std::move(block));
  }
}

std::vector<torch::Tensor> ConvStackImpl::forward_taps(const torch::Tensor& x,
                                                       std::span<const TapId> taps,
                                                       std::vector<torch::Tensor>* pattern) {
  TapId deepest{0, 0};
  for (const auto& t : taps) {
    if (t.block > static_cast<int>(convs_.size()) ||
        t.conv > static_cast<int>(convs_[t.block - 1].size())) {
      throw ConfigError("tap " + t.name() + " does not exist in this backbone");
    }
    deepest = std::max(deepest, t);
  }
  std::vector<torch::Tensor> out(taps.size());
  torch::Tensor h = x;
  for (int b = 1; b <= deepest.block; ++b) {
    if (b > 1) {
      if (pattern) {
        auto [pooled, idx] = torch::max_pool2d_with_indices(h, 2, 2);
        pattern->push_back(idx.reshape({-1}));
        h = pooled;
      } else {
        h = torch::max_pool2d(h, 2, 2);
      }
    }
    auto& block = convs_[b - 1];
    for (int j = 1; j <= static_cast<int>(block.size()); ++j) {
      torch::Tensor pre = block[j - 1]->forward(h);
      for (std::size_t k = 0; k < taps.size(); ++k)
        if (taps[k].block == b && taps[k].conv == j) out[k] = pre;
      if (b == deepest.block && j == deepest.conv) return out;
      if (pattern) pattern->push_back((pre > 0).to(torch::kInt64).reshape({-1}));
      h = torch::relu(pre);
    }
  }
  return out;
}

std::vector<NamedTensor> ConvStackImpl::named_weights() const {
  std::vector<NamedTensor> out;
  for (std::size_t b = 0; b < convs_.size(); ++b) {
    for (std::size_t j = 0; j < convs_[b].size(); ++j) {
      const std::string base = "block" + std::to_string(b + 1) + "_conv" + std::to_string(j + 1);
      out.push_back({base + ".weight", convs_[b][j]->weight});
      out.push_back({base + ".bias", convs_[b][j]->bias});
    }
  }
  return out;
}

namespace {

void freeze(ConvStack& net) {
  for (auto& p : net->parameters()) p.set_requires_grad(false);
  net->eval();
}

}  // namespace

std::vector<TapId> FeatureExtractor::default_taps() { return {{2, 2}, {3, 2}, {4, 2}}; }
std::vector<TapId> FeatureExtractor::vgg19_default_taps() { return {{2, 2}, {3, 4}, {4, 4}}; }

FeatureExtractor FeatureExtractor::random_small(std::uint64_t seed, std::vector<TapId> taps) {
  FeatureExtractor ex;
  ex.kind_ = BackboneKind::RandomSmall;
  ex.net_ = ConvStack(std::vector<std::vector<int>>{{16, 16}, {32, 32}, {64, 64}, {64, 64}});
  auto gen = at::make_generator<at::CPUGeneratorImpl>(seed);
  {
    torch::NoGradGuard no_grad;
    for (auto& nt : ex.net_->named_weights()) {
      if (nt.tensor.dim() == 4) {
        const double fan_in = static_cast<double>(nt.tensor[0].numel());
        nt.tensor.copy_(torch::randn(nt.tensor.sizes(), gen) * std::sqrt(2.0 / fan_in));
      } else {
        nt.tensor.zero_();
      }
    }
  }
  freeze(ex.net_);
  ex.taps_ = std::move(taps);
  ex.mean_ = torch::zeros({1, 3, 1, 1});
  ex.std_ = torch::ones({1, 3, 1, 1});
  ex.net_->forward_taps(torch::zeros({1, 3, ex.min_input_size(), ex.min_input_size()}), ex.taps_);
  return ex;
}

FeatureExtractor FeatureExtractor::vgg19(const std::filesystem::path& weights,
                                         std::vector<TapId> taps) {
  FeatureExtractor ex;
  ex.kind_ = BackboneKind::Vgg19;
  ex.net_ = ConvStack(std::vector<std::vector<int>>{
      {64, 64}, {128, 128}, {256, 256, 256, 256}, {512, 512, 512, 512}, {512, 512, 512, 512}});
  const auto loaded = read_tensor_archive(weights);
  {
    torch::NoGradGuard no_grad;
    for (auto& nt : ex.net_->named_weights()) {
      auto it = std::find_if(loaded.begin(), loaded.end(),
                             [&](const NamedTensor& l) { return l.name == nt.name; });
      if (it == loaded.end()) throw IntegrityError("VGG-19 weights missing " + nt.name);
      if (!it->tensor.sizes().equals(nt.tensor.sizes())) {
        throw IntegrityError("VGG-19 weight " + nt.name + " has the wrong shape");
      }
      nt.tensor.copy_(it->tensor.to(torch::kFloat32));
    }
  }
  freeze(ex.net_);
  ex.taps_ = std::move(taps);
  ex.mean_ = torch::tensor({0.485, 0.456, 0.406}, torch::kFloat32).view({1, 3, 1, 1});
  ex.std_ = torch::tensor({0.229, 0.224, 0.225}, torch::kFloat32).view({1, 3, 1, 1});
  ex.net_->forward_taps(torch::zeros({1, 3, ex.min_input_size(), ex.min_input_size()}), ex.taps_);
  return ex;
}

std::vector<torch::Tensor> FeatureExtractor::forward(const torch::Tensor& images) const {
  return forward(images, taps_);
}

std::vector<torch::Tensor> FeatureExtractor::forward(const torch::Tensor& images,
                                                     std::span<const TapId> taps) const {
  if (images.dim() != 4 || images.size(1) != 3) throw InvalidShape("expected N x 3 x H x W input");
  int deepest = 1;
  for (const auto& t : taps) deepest = std::max(deepest, t.block);
  const int min_side = 1 << (deepest - 1);
  if (images.size(2) < min_side || images.size(3) < min_side) {
    throw InvalidShape("input " + std::to_string(images.size(2)) + "x" +
                       std::to_string(images.size(3)) + " too small for tap depth (needs " +
                       std::to_string(min_side) + ")");
  }
  torch::Tensor x = images.to(dtype_);
  x = (x - mean_) / std_;
  ConvStack net = net_;  // shares the frozen weights
  return net->forward_taps(x, taps);
}

torch::Tensor FeatureExtractor::activation_pattern(const torch::Tensor& images) const {
  torch::NoGradGuard no_grad;
  const torch::Tensor x = (images.to(dtype_) - mean_) / std_;
  std::vector<torch::Tensor> pattern;
  ConvStack net = net_;
  net->forward_taps(x, taps_, &pattern);
  return pattern.empty() ? torch::zeros({0}, torch::kInt64) : torch::cat(pattern);
}

FeaturePack FeatureExtractor::extract(const ImageTensor& img) const {
  if (img.channels() != 3 || img.colorspace() != ColorSpace::RGB) {
    throw InvalidInput("feature extraction expects an RGB image");
  }
  torch::NoGradGuard no_grad;
  auto maps = forward(to_tensor(img, dtype_));
  FeaturePack pack;
  pack.names = tap_names();
  for (auto& m : maps) pack.maps.push_back(m.squeeze(0));
  return pack;
}

FeatureExtractor FeatureExtractor::to(torch::Dtype dtype) const {
  FeatureExtractor ex;
  ex.kind_ = kind_;
  ex.taps_ = taps_;
  ex.dtype_ = dtype;
  ex.net_ = ConvStack(net_->block_channels());
  {
    torch::NoGradGuard no_grad;
    auto dst = ex.net_->named_weights();
    auto src = net_->named_weights();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i].tensor.set_data(src[i].tensor.to(dtype).clone());
  }
  freeze(ex.net_);
  ex.mean_ = mean_.to(dtype);
  ex.std_ = std_.to(dtype);
  return ex;
}

std::vector<std::string> FeatureExtractor::tap_names() const {
  std::vector<std::string> names;
  for (const auto& t : taps_) names.push_back(t.name());
  return names;
}

int FeatureExtractor::min_input_size() const noexcept {
  int deepest = 1;
  for (const auto& t : taps_) deepest = std::max(deepest, t.block);
  return 1 << (deepest - 1);
}

std::uint32_t FeatureExtractor::weights_digest() const {
  // Skip the archive's trailing checksum: a CRC over data plus its own CRC
  // is a constant.
  const auto bytes = encode_tensor_archive(net_->named_weights());
  return crc32_of(std::span<const unsigned char>(bytes.data(), bytes.size() - 4));
}

torch::Tensor gram(const torch::Tensor& f) {
  if (f.dim() == 3) return gram(f.unsqueeze(0)).squeeze(0);
  if (f.dim() != 4) throw InvalidShape("gram expects c x h x w or N x c x h x w");
  const auto n = f.size(0), c = f.size(1), hw = f.size(2) * f.size(3);
  torch::Tensor flat = f.reshape({n, c, hw});
  return torch::bmm(flat, flat.transpose(1, 2)) / static_cast<double>(hw);
}

Eigen::VectorXd pooled_descriptor(const torch::Tensor& chw) {
  if (chw.dim() != 3) throw InvalidShape("descriptor expects c x h x w");
  torch::Tensor flat = chw.detach().to(torch::kFloat64).reshape({chw.size(0), -1});
  torch::Tensor mean = flat.mean(1);
  torch::Tensor sd = flat.std(1, /*unbiased=*/false);
  const auto c = chw.size(0);
  Eigen::VectorXd d(2 * c);
  for (int64_t k = 0; k < c; ++k) {
    d(k) = mean[k].item<double>();
    d(c + k) = sd[k].item<double>();
  }
  return d;
}

GaussianStats fit_feature_gaussian(std::span<const ImageTensor> images, const FeatureExtractor& ex,
                                   const TapId& tap) {
  if (images.size() < 2) throw InvalidInput("need at least two images");
  torch::NoGradGuard no_grad;
  const std::vector<TapId> one{tap};
  Eigen::MatrixXd rows;
  for (std::size_t i = 0; i < images.size(); ++i) {
    const auto maps = ex.forward(to_tensor(images[i], ex.dtype()), one);
    const Eigen::VectorXd d = pooled_descriptor(maps[0].squeeze(0));
    if (i == 0) rows.resize(static_cast<Eigen::Index>(images.size()), d.size());
    rows.row(static_cast<Eigen::Index>(i)) = d.transpose();
  }
  return fit_gaussian(rows);
}

}  // namespace pairdist
