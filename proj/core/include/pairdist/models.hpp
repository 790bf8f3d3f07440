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
#include <string>

#include <torch/torch.h>

#include "pairdist/losses.hpp"
#include "pairdist/networks.hpp"

namespace pairdist {

// How the specialist is trained and how the generalist is coupled to it.
//   pdd_static      frozen pretrained generalist, specialist from its own init
//   pdd_ema         generalist is the EMA of the specialist
//   single_fixed    EMA-style init, then the generalist is frozen
//   naive_distill   specialist regresses onto frozen generalist outputs
//   supervised_only labeled objective only; the generalist is unused
enum class Mode { PddStatic, PddEma, SingleFixed, NaiveDistill, SupervisedOnly };

std::string to_string(Mode m);
// Throws ConfigError for unknown names.
Mode mode_from_string(const std::string& name);
// Modes that optimize the distillation objective.
bool uses_pdd(Mode m) noexcept;
// Modes that need generalist predictions at all.
bool uses_generalist(Mode m) noexcept;

struct ModelPair {
  Generator specialist{nullptr};
  Generator generalist{nullptr};
  // One instance serves both the labeled and the unlabeled GAN terms.
  Discriminator discriminator{nullptr};
  Mode mode = Mode::PddEma;
  double ema_decay = 0.999;
  std::int64_t step = 0;
};

// Builds the three networks from their configs. The generalist never
// requires gradients. Throws ConfigError when ema/single_fixed get
// different specialist and generalist architectures, or a bad decay.
ModelPair make_model_pair(Mode mode, const GeneratorConfig& specialist_cfg,
                          const GeneratorConfig& generalist_cfg,
                          const DiscriminatorConfig& disc_cfg, double ema_decay = 0.999);

// θ_G <- m θ_G + (1 - m) θ_S. Throws InvalidState unless mode is pdd_ema.
void ema_update(ModelPair& pair);

// Copies weights between generators of identical architecture.
void copy_generator(const Generator& src, Generator& dst);

// The four predictions of one distillation step. Generalist outputs are
// computed without autograd.
PredictionQuad predict_quad(ModelPair& pair, const torch::Tensor& x_u, const torch::Tensor& x_l);

// Sum over generalist parameters of |grad|, 0 when no gradient was ever
// populated. Gradient probe for tests.
double generalist_grad_abs_sum(const ModelPair& pair);

}  // namespace pairdist
