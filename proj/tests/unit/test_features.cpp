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

#include <cmath>
#include <vector>

#include <gtest/gtest.h>
#include <torch/torch.h>

#include "pairdist/degradation.hpp"
#include "pairdist/error.hpp"
#include "pairdist/features.hpp"
#include "pairdist/procedural.hpp"
#include "pairdist/stats.hpp"
#include "pairdist/torch_bridge.hpp"
#include "test_util.hpp"

namespace pairdist {
namespace {

using testing::random_image;

TEST(Features, TapNames) {
  EXPECT_EQ(TapId::parse("block3_conv2"), (TapId{3, 2}));
  EXPECT_EQ((TapId{1, 2}).name(), "block1_conv2");
  EXPECT_THROW(TapId::parse("conv3"), ConfigError);
  EXPECT_THROW(TapId::parse("block0_conv1"), ConfigError);
}

TEST(Features, ExtractIsPure) {
  const auto ex = FeatureExtractor::random_small(0);
  const ImageTensor img = random_image(32, 32, 1);
  const FeaturePack a = ex.extract(img);
  const FeaturePack b = ex.extract(img);
  ASSERT_EQ(a.size(), 3u);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_TRUE(torch::equal(a.maps[i], b.maps[i]));
  EXPECT_EQ(a.names, ex.tap_names());
}

TEST(Features, StridesThroughTwoPools) {
  // block3 sits after two stride-2 poolings.
  const auto ex = FeatureExtractor::random_small(0, {TapId{3, 2}});
  const auto f = ex.forward(torch::rand({1, 3, 192, 192}));
  ASSERT_EQ(f.size(), 1u);
  EXPECT_EQ(f[0].size(2), 48);
  EXPECT_EQ(f[0].size(3), 48);
  EXPECT_EQ(f[0].size(1), 64);
}

TEST(Features, WeightsStayFrozen) {
  const auto ex = FeatureExtractor::random_small(4);
  const auto digest = ex.weights_digest();
  torch::Tensor x = torch::rand({2, 3, 16, 16}, torch::requires_grad());
  for (int i = 0; i < 1000; ++i) {
    auto f = ex.forward(x);
    if (i % 250 == 0) f.back().sum().backward();
  }
  EXPECT_EQ(ex.weights_digest(), digest);
  EXPECT_TRUE(x.grad().defined());
}

TEST(Features, SameSeedSameWeights) {
  EXPECT_EQ(FeatureExtractor::random_small(3).weights_digest(), FeatureExtractor::random_small(3).weights_digest());
  EXPECT_NE(FeatureExtractor::random_small(3).weights_digest(), FeatureExtractor::random_small(4).weights_digest());
}

TEST(Gram, SpotValues) {
  EXPECT_TRUE(torch::equal(gram(torch::zeros({3, 4, 4})), torch::zeros({3, 3})));
  const auto one = torch::rand({1, 3, 5}, torch::kFloat64);
  EXPECT_NEAR(gram(one).item<double>(), one.pow(2).mean().item<double>(), 1e-14);
  // c=2, h=1, w=2: f = [[1, 0]], [[0, 1]].
  const auto f = torch::tensor({1.0, 0.0, 0.0, 1.0}, torch::kFloat64).view({2, 1, 2});
  const auto g = gram(f);
  EXPECT_DOUBLE_EQ(g[0][0].item<double>(), 0.5);
  EXPECT_DOUBLE_EQ(g[1][1].item<double>(), 0.5);
  EXPECT_DOUBLE_EQ(g[0][1].item<double>(), 0.0);
  EXPECT_DOUBLE_EQ(g[1][0].item<double>(), 0.0);
}

TEST(Gram, PropertiesOnRandomMaps) {
  torch::manual_seed(0);
  for (int i = 0; i < 1000; ++i) {
    const int c = 1 + i % 5, h = 1 + (i / 5) % 4, w = 2 + i % 3;
    const auto f = torch::randn({c, h, w}, torch::kFloat64);
    const auto g = gram(f);
    ASSERT_TRUE(torch::allclose(g, g.t(), 0.0, 1e-15));
    const double min_eig = torch::linalg_eigvalsh(g).min().item<double>();
    ASSERT_GE(min_eig, -1e-12) << "map " << i;
    // Same spatial permutation for every channel.
    const auto perm = torch::randperm(h * w, torch::kLong);
    const auto fp = f.reshape({c, h * w}).index_select(1, perm).reshape({c, h, w});
    ASSERT_TRUE(torch::allclose(gram(fp), g, 0.0, 1e-14));
    ASSERT_TRUE(torch::allclose(gram(2.5 * f), 6.25 * g, 1e-6, 1e-12));
  }
}

TEST(Gram, BatchedMatchesSingle) {
  const auto f = torch::randn({3, 4, 5, 6}, torch::kFloat64);
  const auto g = gram(f);
  for (int n = 0; n < 3; ++n) EXPECT_TRUE(torch::allclose(g[n], gram(f[n])));
}

TEST(FeatureGaussian, DuplicatesHaveZeroCovariance) {
  const auto ex = FeatureExtractor::random_small(0);
  const ImageTensor img = random_image(32, 32, 8);
  const std::vector<ImageTensor> same(6, img);
  const GaussianStats s = fit_feature_gaussian(same, ex, TapId{2, 2});
  EXPECT_EQ(s.dim(), 2 * 32);
  EXPECT_LT(s.cov.norm(), 1e-8);
}

TEST(FeatureGaussian, BlurSeparatesSets) {
  const auto ex = FeatureExtractor::random_small(0);
  std::vector<ImageTensor> clean, blurred;
  for (int i = 0; i < 12; ++i) {
    clean.push_back(procedural_image(32, 32, 100 + i));
    blurred.push_back(gaussian_blur(clean.back(), 2.5));
  }
  const TapId tap{1, 2};
  const auto p = regularized(fit_feature_gaussian(clean, ex, tap));
  const auto q = regularized(fit_feature_gaussian(blurred, ex, tap));
  EXPECT_NEAR(kl_gaussian(p, p), 0.0, 1e-8);
  EXPECT_GT(kl_gaussian(p, q), 1.0);
}

TEST(FeatureGaussian, PooledDescriptor) {
  const auto f = torch::tensor({1.0, 3.0, 2.0, 2.0}, torch::kFloat64).view({2, 1, 2});
  const Eigen::VectorXd d = pooled_descriptor(f);
  ASSERT_EQ(d.size(), 4);
  EXPECT_DOUBLE_EQ(d[0], 2.0);
  EXPECT_DOUBLE_EQ(d[1], 2.0);
  EXPECT_DOUBLE_EQ(d[2], 1.0);
  EXPECT_DOUBLE_EQ(d[3], 0.0);
}

}  // namespace
}  // namespace pairdist
