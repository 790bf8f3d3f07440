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

#include "pairdist/models.hpp"

#include <cmath>

#include "pairdist/error.hpp"

namespace pairdist {

std::string to_string(Mode m) {
  switch (m) {
    case Mode::PddStatic: return "pdd_static";
    case Mode::PddEma: return "pdd_ema";
    case Mode::SingleFixed: return "single_fixed";
    case Mode::NaiveDistill: return "naive_distill";
    case Mode::SupervisedOnly: return "supervised_only";
  }
  return "?";
}

Mode mode_from_string(const std::string& name) {
  for (Mode m : {Mode::PddStatic, Mode::PddEma, Mode::SingleFixed, Mode::NaiveDistill,
                 Mode::SupervisedOnly}) {
    if (to_string(m) == name) return m;
  }
  throw ConfigError("unknown mode '" + name +
                    "' (expected pdd_static, pdd_ema, single_fixed, naive_distill, supervised_only)");
}

bool uses_pdd(Mode m) noexcept {
  return m == Mode::PddStatic || m == Mode::PddEma || m == Mode::SingleFixed;
}

bool uses_generalist(Mode m) noexcept { return m != Mode::SupervisedOnly; }

ModelPair make_model_pair(Mode mode, const GeneratorConfig& specialist_cfg,
                          const GeneratorConfig& generalist_cfg,
                          const DiscriminatorConfig& disc_cfg, double ema_decay) {
  specialist_cfg.validate();
  generalist_cfg.validate();
  disc_cfg.validate();
  if (!(ema_decay >= 0.0 && ema_decay <= 1.0)) throw ConfigError("ema_decay must lie in [0, 1]");
  if (specialist_cfg.scale != generalist_cfg.scale) throw ConfigError("specialist and generalist scales differ");
  if ((mode == Mode::PddEma || mode == Mode::SingleFixed) &&
      !specialist_cfg.same_architecture(generalist_cfg)) {
    throw ConfigError(to_string(mode) + " needs identical specialist and generalist architectures");
  }
  ModelPair pair;
  pair.specialist = build_generator(specialist_cfg);
  pair.generalist = build_generator(generalist_cfg);
  pair.discriminator = Discriminator(disc_cfg);
  pair.mode = mode;
  pair.ema_decay = ema_decay;
  for (auto& p : pair.generalist->parameters()) p.set_requires_grad(false);
  pair.generalist->eval();
  return pair;
}

void copy_generator(const Generator& src, Generator& dst) {
  if (!src->config().same_architecture(dst->config())) {
    throw ConfigError("cannot copy weights between different generator architectures");
  }
  auto d = dst->named_tensors();
  copy_named_tensors(d, src->named_tensors());
}

void ema_update(ModelPair& pair) {
  if (pair.mode != Mode::PddEma) throw InvalidState("ema_update called in mode " + to_string(pair.mode));
  const auto s = pair.specialist->named_tensors();
  auto g = pair.generalist->named_tensors();
  if (s.size() != g.size()) throw InvalidState("specialist and generalist architectures differ");
  torch::NoGradGuard no_grad;
  const double m = pair.ema_decay;
  for (std::size_t i = 0; i < g.size(); ++i) {
    // Written as two products so m = 0 and m = 1 are exact.
    g[i].tensor.mul_(m).add_(s[i].tensor, 1.0 - m);
  }
}

PredictionQuad predict_quad(ModelPair& pair, const torch::Tensor& x_u, const torch::Tensor& x_l) {
  if (x_u.dim() != 4 || x_l.dim() != 4) throw InvalidShape("predict_quad expects N x 3 x H x W inputs");
  PredictionQuad q;
  q.x_u = x_u;
  q.x_l = x_l;
  const bool stack = x_u.sizes().slice(1).equals(x_l.sizes().slice(1));
  const auto n_u = x_u.size(0);
  if (stack) {
    const torch::Tensor ys = pair.specialist->forward(torch::cat({x_u, x_l}, 0));
    q.ys_u = ys.narrow(0, 0, n_u);
    q.ys_l = ys.narrow(0, n_u, x_l.size(0));
  } else {
    q.ys_u = pair.specialist->forward(x_u);
    q.ys_l = pair.specialist->forward(x_l);
  }
  {
    torch::NoGradGuard no_grad;
    if (stack) {
      const torch::Tensor yg = pair.generalist->forward(torch::cat({x_u, x_l}, 0));
      q.yg_u = yg.narrow(0, 0, n_u);
      q.yg_l = yg.narrow(0, n_u, x_l.size(0));
    } else {
      q.yg_u = pair.generalist->forward(x_u);
      q.yg_l = pair.generalist->forward(x_l);
    }
  }
  q.validate(pair.specialist->config().scale);
  return q;
}

double generalist_grad_abs_sum(const ModelPair& pair) {
  double total = 0.0;
  for (const auto& p : pair.generalist->parameters()) {
    if (p.grad().defined()) total += p.grad().abs().sum().item<double>();
  }
  return total;
}

}  // namespace pairdist
