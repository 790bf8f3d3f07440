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

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <torch/torch.h>

#include "pairdist/features.hpp"
#include "pairdist/networks.hpp"

namespace pairdist {

enum class IntraMeasure { CrossEntropy, L1 };

std::string to_string(IntraMeasure m);
IntraMeasure intra_measure_from_string(const std::string& name);

struct LossWeights {
  // Supervised objective.
  double alpha_wavelet = 1.0;
  double alpha_perceptual = 1.0;
  double alpha_gan = 0.1;
  // Unsupervised distillation objective.
  double lambda_intra = 1.0;
  double lambda_inter = 1.0;
  double lambda_gan = 0.05;
  // Weight of the labeled term in the naive-distillation baseline.
  double lambda_naive = 1.0;
  // One weight per wavelet channel: LL, then (LH, HL, HH) per level.
  std::vector<double> wavelet_weights{1.0, 1.0, 1.0, 1.0};
  int wavelet_levels = 1;
  // One weight per extractor tap; empty means 1 for every tap.
  std::vector<double> perceptual_tap_weights;
  IntraMeasure intra_measure = IntraMeasure::CrossEntropy;
  double softmax_temperature = 1.0;
  // Discriminator sees unpaired clean HR patches as real on the unlabeled branch.
  bool unpaired_real = true;

  // Throws ConfigError. With pdd_active, at least one of lambda_intra and
  // lambda_inter must be positive.
  void validate(bool pdd_active) const;
};

nlohmann::json to_json(const LossWeights& w);
LossWeights loss_weights_from_json(const nlohmann::json& j);

// ---------------------------------------------------------------------------
// Distillation terms. Feature lists hold one N x c x h x w tensor per tap.
// ---------------------------------------------------------------------------

using FeatureList = std::vector<torch::Tensor>;

// |fL - fU| elementwise per tap.
FeatureList intra_distance(const FeatureList& f_labeled, const FeatureList& f_unlabeled);

// Cross-entropy: sum over taps of
//   -(1 / hw) sum_{m,n} softmax_c(dG / T)[m, n] . log softmax_c(dS / T)[m, n]
// averaged over the batch. L1: sum over taps of mean |dG - dS|.
// dG is a constant target (detached).
torch::Tensor r_intra(const FeatureList& d_generalist, const FeatureList& d_specialist,
                      IntraMeasure measure = IntraMeasure::CrossEntropy, double temperature = 1.0);

// Gram(fS - fG) per tap, N x c x c.
FeatureList inter_distance(const FeatureList& f_specialist, const FeatureList& f_generalist);

// Sum over taps of the batch-mean Frobenius norm ||dU - dL||_F. The norm
// has a zero subgradient at equality.
torch::Tensor r_inter(const FeatureList& d_unlabeled, const FeatureList& d_labeled);

// Orthonormal Haar channels of N x C x H x W: [LL, LH1, HL1, HH1, ...] with
// level 1 the finest.
std::vector<torch::Tensor> haar_channels(const torch::Tensor& x, int levels = 1);

// sum_i w_i * mean |W_i(pred) - W_i(gt)|.
torch::Tensor wavelet_loss(const torch::Tensor& pred, const torch::Tensor& gt,
                           const std::vector<double>& weights, int levels = 1);

// sum_tap w_tap * mean |phi(pred) - phi(gt)|.
torch::Tensor perceptual_loss(const torch::Tensor& pred, const torch::Tensor& gt,
                              const FeatureExtractor& ex,
                              const std::vector<double>& tap_weights = {});

// Non-saturating logistic GAN losses: softplus(-D(fake)) for the generator,
// softplus(-D(real)) + softplus(D(fake)) for the critic.
torch::Tensor generator_loss_from_logits(const torch::Tensor& fake_logits);
torch::Tensor discriminator_loss_from_logits(const torch::Tensor& real_logits, const torch::Tensor& fake_logits);
torch::Tensor gan_generator_loss(Discriminator& disc, const torch::Tensor& fake);
torch::Tensor gan_discriminator_loss(Discriminator& disc, const torch::Tensor& real,
                                     const torch::Tensor& fake);

struct GanLosses {
  torch::Tensor gen;
  std::optional<torch::Tensor> disc;
};

// Generator loss always; discriminator loss only when `real` is given.
// `fake` is detached for the discriminator term.
GanLosses gan_losses(Discriminator& disc, const std::optional<torch::Tensor>& real,
                     const torch::Tensor& fake, bool want_disc = false);

// ---------------------------------------------------------------------------
// Composite objectives
// ---------------------------------------------------------------------------

struct PredictionQuad {
  torch::Tensor ys_u;  // M_S(x_U)
  torch::Tensor yg_u;  // M_G(x_U), detached
  torch::Tensor ys_l;  // M_S(x_L)
  torch::Tensor yg_l;  // M_G(x_L), detached
  torch::Tensor x_u;
  torch::Tensor x_l;

  // Throws InvalidShape if predictions and inputs disagree on scale.
  void validate(int scale) const;
};

struct LossReport {
  double r_intra = 0.0;
  double r_inter = 0.0;
  double l_wv = 0.0;
  double l_vgg = 0.0;
  double l_gan_lab = 0.0;
  double l_gan_unlab = 0.0;
  double l_L = 0.0;
  double l_U = 0.0;
  double total = 0.0;
  std::optional<double> l_nd;
  std::optional<double> l_disc;

  bool all_finite() const;
};

nlohmann::json to_json(const LossReport& r);

struct LossContext {
  const FeatureExtractor& extractor;
  Discriminator discriminator;
  const LossWeights& weights;
};

// alpha1 L_wv + alpha2 L_vgg + alpha3 L_gan(pred). Fills the l_wv, l_vgg,
// l_gan_lab and l_L fields of `report` when given.
torch::Tensor supervised_loss(const torch::Tensor& pred, const torch::Tensor& gt,
                              const LossContext& ctx, LossReport* report = nullptr);

// lambda1 R_intra + lambda2 R_inter + lambda3 L_gan(ys_u). Generalist
// predictions are detached. Fills r_intra, r_inter, l_gan_unlab, l_U.
torch::Tensor unsupervised_loss(const PredictionQuad& quad, const LossContext& ctx,
                                LossReport* report = nullptr);

// L_L(ys_u, yg_u) + lambda_nd L_L(ys_l, y_l), yg_u detached. Fills l_nd.
torch::Tensor naive_distill_loss(const PredictionQuad& quad, const torch::Tensor& y_l,
                                 const LossContext& ctx, LossReport* report = nullptr);

// L = L_L + L_U; report.total is set to report.l_L + report.l_U.
torch::Tensor pdd_objective(const PredictionQuad& quad, const torch::Tensor& y_l,
                            const LossContext& ctx, LossReport* report = nullptr);

}  // namespace pairdist
