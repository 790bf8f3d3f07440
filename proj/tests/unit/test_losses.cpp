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

#include "pairdist/error.hpp"
#include "pairdist/features.hpp"
#include "pairdist/losses.hpp"
#include "pairdist/networks.hpp"

namespace pairdist {
namespace {

constexpr auto kF64 = torch::kFloat64;

double val(const torch::Tensor& t) { return t.item<double>(); }

// Critic whose last layer is zeroed: logit 0 everywhere.
Discriminator zero_logit_critic() {
  Discriminator d(DiscriminatorConfig{.num_feat = 8, .spectral_norm = false});
  torch::NoGradGuard ng;
  auto named = d->named_tensors();
  for (auto& nt : named)
    if (nt.name.rfind("layer4.", 0) == 0 && (nt.name.ends_with("weight") || nt.name.ends_with("bias"))) nt.tensor.zero_();
  return d;
}

TEST(IntraDistance, Basics) {
  const auto a = torch::rand({2, 3, 4, 4}, kF64);
  EXPECT_EQ(val(intra_distance({a}, {a})[0].abs().max()), 0.0);
  EXPECT_EQ(val(intra_distance({torch::full({1, 1, 1, 1}, 3.0)}, {torch::full({1, 1, 1, 1}, 1.0)})[0].squeeze()), 2.0);
  const auto b = torch::rand({2, 3, 4, 4}, kF64);
  const auto d = intra_distance({a}, {b})[0];
  for (int i = 0; i < 2 * 3 * 4 * 4; ++i) {
    const double x = a.flatten()[i].item<double>(), y = b.flatten()[i].item<double>();
    ASSERT_NEAR(d.flatten()[i].item<double>(), std::abs(x - y), 1e-7);
  }
}

TEST(RIntra, UniformChannelsGiveLogC) {
  const auto d = torch::full({1, 4, 3, 3}, 0.7, kF64);
  EXPECT_NEAR(val(r_intra({d}, {d})), std::log(4.0), 1e-12);
  EXPECT_NEAR(val(r_intra({d}, {d})), 1.38629, 1e-5);
}

TEST(RIntra, TwoChannelHandCase) {
  // dG = (1, 0), dS = (0, 1): softmax(dG) = (s(1), s(-1)), log softmax(dS) =
  // (log s(-1), log s(1)) with s the logistic function.
  const auto dg = torch::tensor({1.0, 0.0}, kF64).view({1, 2, 1, 1});
  const auto ds = torch::tensor({0.0, 1.0}, kF64).view({1, 2, 1, 1});
  auto s = [](double x) { return 1.0 / (1.0 + std::exp(-x)); };
  const double want = -(s(1) * std::log(s(-1)) + s(-1) * std::log(s(1)));
  EXPECT_NEAR(val(r_intra({dg}, {ds})), want, 1e-12);
  EXPECT_NEAR(want, 1.04432, 1e-5);
}

TEST(RIntra, ShiftInvarianceAndLowerBound) {
  torch::manual_seed(1);
  for (int i = 0; i < 500; ++i) {
    const auto dg = torch::rand({2, 5, 3, 3}, kF64) * 4;
    const auto ds = torch::rand({2, 5, 3, 3}, kF64) * 4;
    const double ce = val(r_intra({dg}, {ds}));
    ASSERT_GE(ce, val(r_intra({dg}, {dg})) - 1e-12);
    const auto shift = torch::randn({2, 1, 3, 3}, kF64) * 3;
    ASSERT_NEAR(val(r_intra({dg}, {ds + shift})), ce, 1e-6);
    ASSERT_NEAR(val(r_intra({dg + shift}, {ds})), ce, 1e-6);
  }
}

TEST(RIntra, SumsOverTapsAndRejectsOneChannel) {
  const auto a = torch::rand({1, 3, 2, 2}, kF64), b = torch::rand({1, 3, 2, 2}, kF64);
  const auto c = torch::rand({1, 4, 1, 1}, kF64), d = torch::rand({1, 4, 1, 1}, kF64);
  EXPECT_NEAR(val(r_intra({a, c}, {b, d})), val(r_intra({a}, {b})) + val(r_intra({c}, {d})), 1e-12);
  EXPECT_NEAR(val(r_intra({a}, {b}, IntraMeasure::L1)), val((a - b).abs().mean()), 1e-12);
  const auto one = torch::rand({1, 1, 2, 2}, kF64);
  EXPECT_THROW(r_intra({one}, {one}), InvalidInput);
}

TEST(RIntra, GeneralistSideIsATarget) {
  const auto dg = torch::rand({1, 3, 2, 2}, torch::dtype(kF64).requires_grad(true));
  const auto ds = torch::rand({1, 3, 2, 2}, torch::dtype(kF64).requires_grad(true));
  r_intra({dg}, {ds}).backward();
  EXPECT_FALSE(dg.grad().defined() && dg.grad().abs().sum().item<double>() > 0);
  EXPECT_GT(ds.grad().abs().sum().item<double>(), 0);
}

TEST(InterDistance, MatchesGramOfDifference) {
  const auto fs = torch::rand({1, 2, 3, 3}, kF64), fg = torch::rand({1, 2, 3, 3}, kF64);
  const auto d = inter_distance({fs}, {fg})[0];
  EXPECT_TRUE(torch::allclose(d, gram(fs - fg)));
  EXPECT_TRUE(torch::allclose(d[0], d[0].t()));
  EXPECT_GE(torch::linalg_eigvalsh(d[0]).min().item<double>(), -1e-12);
  EXPECT_EQ(val(inter_distance({fs}, {fs})[0].abs().max()), 0.0);
}

TEST(RInter, HandCaseAndSymmetry) {
  const auto a = torch::rand({1, 2, 2}, kF64);
  const auto b = a + torch::tensor({3.0, 0.0, 0.0, 4.0}, kF64).view({1, 2, 2});
  EXPECT_NEAR(val(r_inter({a}, {b})), 5.0, 1e-12);
  EXPECT_DOUBLE_EQ(val(r_inter({a}, {b})), val(r_inter({b}, {a})));
  EXPECT_EQ(val(r_inter({a}, {a})), 0.0);
}

TEST(RInter, ZeroIffEqualOnRandomPairs) {
  torch::manual_seed(2);
  for (int i = 0; i < 200; ++i) {
    const auto f = torch::randn({2, 3, 3, 3}, kF64);
    const auto g = torch::randn({2, 3, 3, 3}, kF64);
    const auto du = inter_distance({f}, {g});
    ASSERT_EQ(val(r_inter(du, du)), 0.0);
    const auto dl = inter_distance({g}, {f * 0.5});
    const double v = val(r_inter(du, dl));
    ASSERT_GE(v, 0.0);
    ASSERT_EQ(v > 1e-8, (du[0] - dl[0]).abs().max().item<double>() > 1e-8);
  }
}

TEST(RInter, ZeroGradientAtEquality) {
  const auto a = torch::rand({1, 2, 2}, torch::dtype(kF64).requires_grad(true));
  const auto b = a.detach().clone();
  r_inter({a}, {b}).backward();
  EXPECT_TRUE(torch::isfinite(a.grad()).all().item<bool>());
  EXPECT_EQ(a.grad().abs().sum().item<double>(), 0.0);
}

TEST(Wavelet, SpotValues) {
  const auto x = torch::rand({2, 3, 8, 8}, kF64);
  EXPECT_EQ(val(wavelet_loss(x, x, {1, 1, 1, 1})), 0.0);
  EXPECT_EQ(val(wavelet_loss(x, torch::rand({2, 3, 8, 8}, kF64), {0, 0, 0, 0})), 0.0);
  // Constant c vs c + delta: LL differs by 2 delta, details vanish.
  const double delta = 0.125;
  const auto c = torch::full({1, 3, 4, 4}, 0.3, kF64);
  EXPECT_NEAR(val(wavelet_loss(c, c + delta, {1, 0, 0, 0})), 2 * delta, 1e-12);
  EXPECT_NEAR(val(wavelet_loss(c, c + delta, {1, 1, 1, 1})), 2 * delta, 1e-12);
  EXPECT_THROW(wavelet_loss(x, x, {1, 1}), InvalidInput);
}

TEST(Wavelet, ChannelsInvert) {
  const auto x = torch::rand({1, 3, 8, 8}, kF64);
  const auto ch = haar_channels(x, 1);
  ASSERT_EQ(ch.size(), 4u);
  double energy = 0.0;
  for (const auto& c : ch) energy += c.pow(2).sum().item<double>();
  EXPECT_NEAR(energy, x.pow(2).sum().item<double>(), 1e-10);
  EXPECT_EQ(haar_channels(x, 2).size(), 7u);
}

TEST(Perceptual, ZeroMonotoneAndSingleTap) {
  const auto ex = FeatureExtractor::random_small(0).to(kF64);
  torch::manual_seed(3);
  const auto gt = torch::rand({2, 3, 16, 16}, kF64);
  EXPECT_EQ(val(perceptual_loss(gt, gt, ex)), 0.0);
  double prev = 0.0;
  const auto noise = torch::randn({2, 3, 16, 16}, kF64);
  for (double sigma : {0.01, 0.03, 0.1, 0.3}) {
    const double v = val(perceptual_loss(gt + sigma * noise, gt, ex));
    EXPECT_GT(v, prev) << sigma;
    prev = v;
  }
  const auto pred = gt + 0.1 * noise;
  const auto fp = ex.forward(pred), fg = ex.forward(gt);
  EXPECT_NEAR(val(perceptual_loss(pred, gt, ex, {0, 1, 0})), val((fp[1] - fg[1]).abs().mean()), 1e-12);
}

TEST(Gan, SpotValues) {
  EXPECT_NEAR(val(generator_loss_from_logits(torch::zeros({4, 1, 2, 2}, kF64))), std::log(2.0), 1e-12);
  const double sp = std::log1p(std::exp(-1.0));
  EXPECT_NEAR(val(discriminator_loss_from_logits(torch::ones({3}, kF64), -torch::ones({3}, kF64))), 2 * sp, 1e-12);
  EXPECT_NEAR(2 * sp, 0.6265, 1e-4);
  const double big = 1e3;
  EXPECT_LT(val(discriminator_loss_from_logits(torch::full({1}, big, kF64), torch::full({1}, -big, kF64))), 1e-12);
}

TEST(Gan, ZeroLogitCritic) {
  Discriminator d = zero_logit_critic();
  const auto fake = torch::rand({2, 3, 16, 16});
  EXPECT_NEAR(val(gan_generator_loss(d, fake)), std::log(2.0), 1e-6);
  const GanLosses both = gan_losses(d, torch::rand({2, 3, 16, 16}), fake, true);
  EXPECT_NEAR(val(*both.disc), 2 * std::log(2.0), 1e-6);
  EXPECT_THROW(gan_losses(d, std::nullopt, fake, true), InvalidInput);
}

class CompositeTest : public ::testing::Test {
 protected:
  CompositeTest() : ex_(FeatureExtractor::random_small(0)), disc_(DiscriminatorConfig{.num_feat = 8}) {
    torch::manual_seed(5);
    quad_.x_l = torch::rand({2, 3, 4, 4});
    quad_.x_u = torch::rand({2, 3, 4, 4});
    quad_.ys_l = torch::rand({2, 3, 16, 16});
    quad_.ys_u = torch::rand({2, 3, 16, 16});
    quad_.yg_l = torch::rand({2, 3, 16, 16});
    quad_.yg_u = torch::rand({2, 3, 16, 16});
    y_l_ = torch::rand({2, 3, 16, 16});
  }
  LossContext ctx(const LossWeights& w) { return {ex_, disc_, w}; }

  FeatureExtractor ex_;
  Discriminator disc_;
  PredictionQuad quad_;
  torch::Tensor y_l_;
};

TEST_F(CompositeTest, SupervisedComposition) {
  LossWeights w;
  w.alpha_wavelet = w.alpha_perceptual = w.alpha_gan = 0.0;
  EXPECT_EQ(val(supervised_loss(quad_.ys_l, y_l_, ctx(w))), 0.0);
  w.alpha_wavelet = 0.7;
  EXPECT_NEAR(val(supervised_loss(quad_.ys_l, y_l_, ctx(w))),
              0.7 * val(wavelet_loss(quad_.ys_l, y_l_, w.wavelet_weights)), 1e-7);
  w = LossWeights{};
  LossReport r;
  const double total = val(supervised_loss(quad_.ys_l, y_l_, ctx(w), &r));
  const double wv = val(wavelet_loss(quad_.ys_l, y_l_, w.wavelet_weights));
  const double vgg = val(perceptual_loss(quad_.ys_l, y_l_, ex_));
  const double gan = val(gan_generator_loss(disc_, quad_.ys_l));
  EXPECT_NEAR(total, 1.0 * wv + 1.0 * vgg + 0.1 * gan, 1e-6);
  EXPECT_NEAR(r.l_wv, wv, 1e-6);
  EXPECT_NEAR(r.l_vgg, vgg, 1e-6);
  EXPECT_NEAR(r.l_gan_lab, gan, 1e-6);
  EXPECT_NEAR(r.l_L, total, 1e-6);
}

TEST_F(CompositeTest, UnsupervisedComposition) {
  LossWeights w;
  w.lambda_intra = w.lambda_inter = w.lambda_gan = 0.0;
  EXPECT_EQ(val(unsupervised_loss(quad_, ctx(w))), 0.0);
  w = LossWeights{};
  LossReport r;
  const double total = val(unsupervised_loss(quad_, ctx(w), &r));
  const auto fs_u = ex_.forward(quad_.ys_u), fg_u = ex_.forward(quad_.yg_u);
  const auto fs_l = ex_.forward(quad_.ys_l), fg_l = ex_.forward(quad_.yg_l);
  const double intra = val(r_intra(intra_distance(fg_l, fg_u), intra_distance(fs_l, fs_u)));
  const double inter = val(r_inter(inter_distance(fs_u, fg_u), inter_distance(fs_l, fg_l)));
  const double gan = val(gan_generator_loss(disc_, quad_.ys_u));
  EXPECT_NEAR(r.r_intra, intra, 1e-5 * intra);
  EXPECT_NEAR(r.r_inter, inter, 1e-5 * inter + 1e-7);
  EXPECT_NEAR(total, intra + inter + 0.05 * gan, 1e-5 * total);
}

TEST_F(CompositeTest, IdenticalModelsAreAtTheLowerBound) {
  PredictionQuad q = quad_;
  q.yg_u = q.ys_u;
  q.yg_l = q.ys_l;
  LossWeights w;
  LossReport r;
  unsupervised_loss(q, ctx(w), &r);
  EXPECT_EQ(r.r_inter, 0.0);
  const auto fu = ex_.forward(q.ys_u), fl = ex_.forward(q.ys_l);
  const auto d = intra_distance(fl, fu);
  EXPECT_NEAR(r.r_intra, val(r_intra(d, d)), 1e-6);
}

TEST_F(CompositeTest, NaiveDistillComposition) {
  LossWeights w;
  w.lambda_naive = 0.0;
  EXPECT_NEAR(val(naive_distill_loss(quad_, y_l_, ctx(w))), val(supervised_loss(quad_.ys_u, quad_.yg_u, ctx(w))), 1e-6);
  w = LossWeights{};
  w.lambda_naive = 0.6;
  const double both = val(supervised_loss(quad_.ys_u, quad_.yg_u, ctx(w))) + 0.6 * val(supervised_loss(quad_.ys_l, y_l_, ctx(w)));
  LossReport r;
  EXPECT_NEAR(val(naive_distill_loss(quad_, y_l_, ctx(w), &r)), both, 1e-5);
  EXPECT_NEAR(*r.l_nd, both, 1e-5);

  LossWeights z;
  z.alpha_gan = 0.0;
  PredictionQuad q = quad_;
  q.yg_u = q.ys_u;
  EXPECT_EQ(val(naive_distill_loss(q, q.ys_l, ctx(z))), 0.0);
}

TEST_F(CompositeTest, PddTotalIsExactSum) {
  LossWeights w;
  LossReport r;
  const double t = val(pdd_objective(quad_, y_l_, ctx(w), &r));
  EXPECT_EQ(r.total, r.l_L + r.l_U);
  EXPECT_NEAR(t, r.total, 1e-5 * t);
  EXPECT_TRUE(r.all_finite());
  const auto j = to_json(r);
  for (const char* k : {"r_intra", "r_inter", "l_wv", "l_vgg", "l_gan_lab", "l_gan_unlab", "l_L", "l_U", "total"})
    EXPECT_TRUE(j.contains(k)) << k;
}

TEST_F(CompositeTest, FiniteOnFuzzedInputs) {
  LossWeights w;
  torch::manual_seed(9);
  for (int i = 0; i < 20; ++i) {
    PredictionQuad q = quad_;
    const double scale = i % 2 ? 1.0 : 0.0;  // includes all-constant predictions
    q.ys_u = torch::rand({2, 3, 16, 16}) * scale;
    q.yg_u = torch::rand({2, 3, 16, 16}) * scale;
    q.ys_l = torch::rand({2, 3, 16, 16});
    q.yg_l = q.ys_l;
    LossReport r;
    const auto l = pdd_objective(q, torch::rand({2, 3, 16, 16}), ctx(w), &r);
    ASSERT_TRUE(r.all_finite());
    ASSERT_TRUE(std::isfinite(val(l)));
  }
}

TEST(LossWeights, Validation) {
  LossWeights w;
  EXPECT_NO_THROW(w.validate(true));
  w.lambda_intra = w.lambda_inter = 0.0;
  EXPECT_THROW(w.validate(true), ConfigError);
  EXPECT_NO_THROW(w.validate(false));
  EXPECT_THROW(loss_weights_from_json({{"alpha_wavelet", 1.0}, {"unknown", 2}}), ConfigError);
  const LossWeights d;
  EXPECT_EQ(to_json(loss_weights_from_json(to_json(d))), to_json(d));
}

}  // namespace
}  // namespace pairdist
