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

#include "pairdist/losses.hpp"

#include <cmath>

#include "pairdist/error.hpp"

namespace pairdist {

namespace F = torch::nn::functional;
using torch::indexing::None;
using torch::indexing::Slice;

std::string to_string(IntraMeasure m) {
  return m == IntraMeasure::CrossEntropy ? "cross_entropy" : "l1";
}

IntraMeasure intra_measure_from_string(const std::string& name) {
  if (name == "cross_entropy" || name == "ce") return IntraMeasure::CrossEntropy;
  if (name == "l1") return IntraMeasure::L1;
  throw ConfigError("unknown intra measure '" + name + "'");
}

void LossWeights::validate(bool pdd_active) const {
  const double scalars[] = {alpha_wavelet, alpha_perceptual, alpha_gan,   lambda_intra,
                            lambda_inter,  lambda_gan,       lambda_naive};
  for (double v : scalars) {
    if (!std::isfinite(v) || v < 0.0) throw ConfigError("loss weights must be finite and >= 0");
  }
  if (wavelet_levels < 1) throw ConfigError("wavelet_levels must be >= 1");
  if (wavelet_weights.size() != static_cast<std::size_t>(1 + 3 * wavelet_levels)) {
    throw ConfigError("wavelet_weights needs 1 + 3 * levels entries");
  }
  for (double v : wavelet_weights)
    if (!std::isfinite(v) || v < 0.0) throw ConfigError("wavelet weights must be >= 0");
  for (double v : perceptual_tap_weights)
    if (!std::isfinite(v) || v < 0.0) throw ConfigError("perceptual tap weights must be >= 0");
  if (!(softmax_temperature > 0.0)) throw ConfigError("softmax_temperature must be > 0");
  if (pdd_active && lambda_intra <= 0.0 && lambda_inter <= 0.0) {
    throw ConfigError("PDD needs lambda_intra > 0 or lambda_inter > 0");
  }
}

nlohmann::json to_json(const LossWeights& w) {
  return {{"alpha_wavelet", w.alpha_wavelet},
          {"alpha_perceptual", w.alpha_perceptual},
          {"alpha_gan", w.alpha_gan},
          {"lambda_intra", w.lambda_intra},
          {"lambda_inter", w.lambda_inter},
          {"lambda_gan", w.lambda_gan},
          {"lambda_naive", w.lambda_naive},
          {"wavelet_weights", w.wavelet_weights},
          {"wavelet_levels", w.wavelet_levels},
          {"perceptual_tap_weights", w.perceptual_tap_weights},
          {"intra_measure", to_string(w.intra_measure)},
          {"softmax_temperature", w.softmax_temperature},
          {"unpaired_real", w.unpaired_real}};
}

LossWeights loss_weights_from_json(const nlohmann::json& j) {
  LossWeights w;
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "alpha_wavelet") w.alpha_wavelet = value.get<double>();
      else if (key == "alpha_perceptual") w.alpha_perceptual = value.get<double>();
      else if (key == "alpha_gan") w.alpha_gan = value.get<double>();
      else if (key == "lambda_intra") w.lambda_intra = value.get<double>();
      else if (key == "lambda_inter") w.lambda_inter = value.get<double>();
      else if (key == "lambda_gan") w.lambda_gan = value.get<double>();
      else if (key == "lambda_naive") w.lambda_naive = value.get<double>();
      else if (key == "wavelet_weights") w.wavelet_weights = value.get<std::vector<double>>();
      else if (key == "wavelet_levels") w.wavelet_levels = value.get<int>();
      else if (key == "perceptual_tap_weights") w.perceptual_tap_weights = value.get<std::vector<double>>();
      else if (key == "intra_measure") w.intra_measure = intra_measure_from_string(value.get<std::string>());
      else if (key == "softmax_temperature") w.softmax_temperature = value.get<double>();
      else if (key == "unpaired_real") w.unpaired_real = value.get<bool>();
      else throw ConfigError("unknown loss weight '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed loss weights: ") + e.what());
  }
  // A levels override without explicit weights gets uniform weights.
  if (!j.contains("wavelet_weights")) w.wavelet_weights.assign(1 + 3 * w.wavelet_levels, 1.0);
  w.validate(false);
  return w;
}

// ---------------------------------------------------------------------------

namespace {

void check_same_taps(const FeatureList& a, const FeatureList& b, const char* what) {
  if (a.size() != b.size()) throw InvalidShape(std::string(what) + ": tap counts differ");
  for (std::size_t k = 0; k < a.size(); ++k) {
    if (!a[k].sizes().equals(b[k].sizes())) {
      throw InvalidShape(std::string(what) + ": tap " + std::to_string(k) + " shapes differ");
    }
  }
}

// Frobenius norm over the last two dims with a zero subgradient at 0.
torch::Tensor safe_frobenius(const torch::Tensor& m) {
  torch::Tensor sq = m.pow(2).sum({-2, -1});
  torch::Tensor positive = sq > 0;
  torch::Tensor safe = torch::where(positive, sq, torch::ones_like(sq));
  return torch::where(positive, safe.sqrt(), torch::zeros_like(sq));
}

}  // namespace

FeatureList intra_distance(const FeatureList& f_labeled, const FeatureList& f_unlabeled) {
  check_same_taps(f_labeled, f_unlabeled, "intra_distance");
  FeatureList out;
  out.reserve(f_labeled.size());
  for (std::size_t k = 0; k < f_labeled.size(); ++k) out.push_back((f_labeled[k] - f_unlabeled[k]).abs());
  return out;
}

torch::Tensor r_intra(const FeatureList& d_generalist, const FeatureList& d_specialist,
                      IntraMeasure measure, double temperature) {
  check_same_taps(d_generalist, d_specialist, "r_intra");
  if (d_generalist.empty()) throw InvalidInput("r_intra needs at least one tap");
  if (!(temperature > 0.0)) throw InvalidInput("softmax temperature must be > 0");
  torch::Tensor total;
  for (std::size_t k = 0; k < d_generalist.size(); ++k) {
    const torch::Tensor dg = d_generalist[k].detach();
    const torch::Tensor& ds = d_specialist[k];
    if (dg.dim() != 4) throw InvalidShape("distance maps must be N x c x h x w");
    torch::Tensor term;
    if (measure == IntraMeasure::CrossEntropy) {
      if (dg.size(1) < 2) throw InvalidInput("cross-entropy over fewer than 2 channels is degenerate");
      const torch::Tensor target = torch::softmax(dg / temperature, 1);
      const torch::Tensor log_pred = torch::log_softmax(ds / temperature, 1);
      // -(1/hw) sum_{m,n} sum_c p log q, then batch mean.
      term = -(target * log_pred).sum(1).mean({1, 2}).mean();
    } else {
      term = (dg - ds).abs().mean();
    }
    total = total.defined() ? total + term : term;
  }
  return total;
}

FeatureList inter_distance(const FeatureList& f_specialist, const FeatureList& f_generalist) {
  check_same_taps(f_specialist, f_generalist, "inter_distance");
  FeatureList out;
  out.reserve(f_specialist.size());
  for (std::size_t k = 0; k < f_specialist.size(); ++k) out.push_back(gram(f_specialist[k] - f_generalist[k]));
  return out;
}

torch::Tensor r_inter(const FeatureList& d_unlabeled, const FeatureList& d_labeled) {
  if (d_unlabeled.size() != d_labeled.size() || d_unlabeled.empty()) {
    throw InvalidInput("r_inter needs matching, non-empty tap sets");
  }
  torch::Tensor total;
  for (std::size_t k = 0; k < d_unlabeled.size(); ++k) {
    const auto& a = d_unlabeled[k];
    const auto& b = d_labeled[k];
    if (a.size(-1) != b.size(-1) || a.size(-2) != b.size(-2)) {
      throw InvalidInput("r_inter: channel counts differ at tap " + std::to_string(k));
    }
    torch::Tensor term = safe_frobenius(a - b).mean();
    total = total.defined() ? total + term : term;
  }
  return total;
}

std::vector<torch::Tensor> haar_channels(const torch::Tensor& x, int levels) {
  if (levels < 1) throw InvalidInput("wavelet levels must be >= 1");
  if (x.dim() != 4) throw InvalidShape("haar_channels expects N x C x H x W");
  const int64_t block = int64_t{1} << levels;
  if (x.size(2) % block != 0 || x.size(3) % block != 0) {
    throw InvalidShape("spatial size not divisible by 2^levels");
  }
  std::vector<torch::Tensor> details;
  torch::Tensor cur = x;
  for (int l = 0; l < levels; ++l) {
    const auto a = cur.index({Slice(), Slice(), Slice(0, None, 2), Slice(0, None, 2)});
    const auto b = cur.index({Slice(), Slice(), Slice(0, None, 2), Slice(1, None, 2)});
    const auto c = cur.index({Slice(), Slice(), Slice(1, None, 2), Slice(0, None, 2)});
    const auto d = cur.index({Slice(), Slice(), Slice(1, None, 2), Slice(1, None, 2)});
    details.push_back(0.5 * (a + b - c - d));
    details.push_back(0.5 * (a - b + c - d));
    details.push_back(0.5 * (a - b - c + d));
    cur = 0.5 * (a + b + c + d);
  }
  std::vector<torch::Tensor> out{cur};
  out.insert(out.end(), details.begin(), details.end());
  return out;
}

torch::Tensor wavelet_loss(const torch::Tensor& pred, const torch::Tensor& gt,
                           const std::vector<double>& weights, int levels) {
  if (!pred.sizes().equals(gt.sizes())) throw InvalidShape("wavelet_loss: prediction and target differ in shape");
  if (weights.size() != static_cast<std::size_t>(1 + 3 * levels)) {
    throw InvalidInput("wavelet_loss needs 1 + 3 * levels weights");
  }
  const auto p = haar_channels(pred, levels);
  const auto g = haar_channels(gt, levels);
  torch::Tensor total = torch::zeros({}, pred.options());
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (weights[i] == 0.0) continue;
    total = total + weights[i] * (p[i] - g[i]).abs().mean();
  }
  return total;
}

torch::Tensor perceptual_loss(const torch::Tensor& pred, const torch::Tensor& gt,
                              const FeatureExtractor& ex, const std::vector<double>& tap_weights) {
  if (!pred.sizes().equals(gt.sizes())) throw InvalidShape("perceptual_loss: prediction and target differ in shape");
  if (!tap_weights.empty() && tap_weights.size() != ex.taps().size()) {
    throw InvalidInput("perceptual_loss: one weight per tap required");
  }
  const auto n = pred.size(0);
  const auto feats = ex.forward(torch::cat({pred, gt.detach()}, 0));
  torch::Tensor total = torch::zeros({}, feats.front().options());
  for (std::size_t k = 0; k < feats.size(); ++k) {
    const double w = tap_weights.empty() ? 1.0 : tap_weights[k];
    if (w == 0.0) continue;
    const auto fp = feats[k].narrow(0, 0, n);
    const auto fg = feats[k].narrow(0, n, n);
    total = total + w * (fp - fg).abs().mean();
  }
  return total;
}

torch::Tensor generator_loss_from_logits(const torch::Tensor& fake_logits) {
  return F::softplus(-fake_logits).mean();
}

torch::Tensor discriminator_loss_from_logits(const torch::Tensor& real_logits, const torch::Tensor& fake_logits) {
  return F::softplus(-real_logits).mean() + F::softplus(fake_logits).mean();
}

torch::Tensor gan_generator_loss(Discriminator& disc, const torch::Tensor& fake) {
  return generator_loss_from_logits(disc->forward(fake));
}

torch::Tensor gan_discriminator_loss(Discriminator& disc, const torch::Tensor& real,
                                     const torch::Tensor& fake) {
  return discriminator_loss_from_logits(disc->forward(real.detach()), disc->forward(fake.detach()));
}

GanLosses gan_losses(Discriminator& disc, const std::optional<torch::Tensor>& real,
                     const torch::Tensor& fake, bool want_disc) {
  if (want_disc && !real) throw InvalidInput("discriminator loss requested without real images");
  GanLosses out{gan_generator_loss(disc, fake), std::nullopt};
  if (real) out.disc = gan_discriminator_loss(disc, *real, fake);
  return out;
}

// ---------------------------------------------------------------------------

void PredictionQuad::validate(int scale) const {
  auto check = [scale](const torch::Tensor& y, const torch::Tensor& x, const char* name) {
    if (!y.defined() || !x.defined()) throw InvalidShape(std::string(name) + " missing");
    if (y.dim() != 4 || x.dim() != 4 || y.size(0) != x.size(0) ||
        y.size(2) != scale * x.size(2) || y.size(3) != scale * x.size(3)) {
      throw InvalidShape(std::string(name) + " does not match its input at scale " + std::to_string(scale));
    }
  };
  check(ys_u, x_u, "ys_u");
  check(yg_u, x_u, "yg_u");
  check(ys_l, x_l, "ys_l");
  check(yg_l, x_l, "yg_l");
}

bool LossReport::all_finite() const {
  const double vals[] = {r_intra, r_inter, l_wv, l_vgg, l_gan_lab, l_gan_unlab, l_L, l_U, total};
  for (double v : vals)
    if (!std::isfinite(v)) return false;
  if (l_nd && !std::isfinite(*l_nd)) return false;
  if (l_disc && !std::isfinite(*l_disc)) return false;
  return true;
}

nlohmann::json to_json(const LossReport& r) {
  nlohmann::json j{{"r_intra", r.r_intra}, {"r_inter", r.r_inter},     {"l_wv", r.l_wv},
                   {"l_vgg", r.l_vgg},     {"l_gan_lab", r.l_gan_lab}, {"l_gan_unlab", r.l_gan_unlab},
                   {"l_L", r.l_L},         {"l_U", r.l_U},             {"total", r.total}};
  if (r.l_nd) j["l_nd"] = *r.l_nd;
  if (r.l_disc) j["l_disc"] = *r.l_disc;
  return j;
}

namespace {

double scalar(const torch::Tensor& t) { return t.detach().to(torch::kFloat64).item<double>(); }

}  // namespace

torch::Tensor supervised_loss(const torch::Tensor& pred, const torch::Tensor& gt,
                              const LossContext& ctx, LossReport* report) {
  if (!pred.sizes().equals(gt.sizes())) throw InvalidShape("supervised_loss: prediction and target differ in shape");
  const LossWeights& w = ctx.weights;
  torch::Tensor total = torch::zeros({}, pred.options());
  double l_wv = 0.0, l_vgg = 0.0, l_gan = 0.0;
  if (w.alpha_wavelet > 0.0) {
    torch::Tensor t = wavelet_loss(pred, gt, w.wavelet_weights, w.wavelet_levels);
    l_wv = scalar(t);
    total = total + w.alpha_wavelet * t;
  }
  if (w.alpha_perceptual > 0.0) {
    torch::Tensor t = perceptual_loss(pred, gt, ctx.extractor, w.perceptual_tap_weights);
    l_vgg = scalar(t);
    total = total + w.alpha_perceptual * t;
  }
  if (w.alpha_gan > 0.0) {
    Discriminator disc = ctx.discriminator;
    torch::Tensor t = gan_generator_loss(disc, pred);
    l_gan = scalar(t);
    total = total + w.alpha_gan * t;
  }
  if (report) {
    report->l_wv = l_wv;
    report->l_vgg = l_vgg;
    report->l_gan_lab = l_gan;
    report->l_L = scalar(total);
  }
  return total;
}

torch::Tensor unsupervised_loss(const PredictionQuad& quad, const LossContext& ctx,
                                LossReport* report) {
  const LossWeights& w = ctx.weights;
  torch::Tensor total = torch::zeros({}, quad.ys_u.options());
  double v_intra = 0.0, v_inter = 0.0, v_gan = 0.0;
  if (w.lambda_intra > 0.0 || w.lambda_inter > 0.0) {
    const auto n_u = quad.ys_u.size(0);
    const auto n_l = quad.ys_l.size(0);
    const auto f_u = ctx.extractor.forward(torch::cat({quad.ys_u, quad.yg_u.detach()}, 0));
    const auto f_l = ctx.extractor.forward(torch::cat({quad.ys_l, quad.yg_l.detach()}, 0));
    FeatureList fs_u, fg_u, fs_l, fg_l;
    for (std::size_t k = 0; k < f_u.size(); ++k) {
      fs_u.push_back(f_u[k].narrow(0, 0, n_u));
      fg_u.push_back(f_u[k].narrow(0, n_u, n_u));
      fs_l.push_back(f_l[k].narrow(0, 0, n_l));
      fg_l.push_back(f_l[k].narrow(0, n_l, n_l));
    }
    if (w.lambda_intra > 0.0) {
      const FeatureList d_g = intra_distance(fg_l, fg_u);
      const FeatureList d_s = intra_distance(fs_l, fs_u);
      torch::Tensor t = r_intra(d_g, d_s, w.intra_measure, w.softmax_temperature);
      v_intra = scalar(t);
      total = total + w.lambda_intra * t;
    }
    if (w.lambda_inter > 0.0) {
      const FeatureList d_u = inter_distance(fs_u, fg_u);
      const FeatureList d_l = inter_distance(fs_l, fg_l);
      torch::Tensor t = r_inter(d_u, d_l);
      v_inter = scalar(t);
      total = total + w.lambda_inter * t;
    }
  }
  if (w.lambda_gan > 0.0) {
    Discriminator disc = ctx.discriminator;
    torch::Tensor t = gan_generator_loss(disc, quad.ys_u);
    v_gan = scalar(t);
    total = total + w.lambda_gan * t;
  }
  if (report) {
    report->r_intra = v_intra;
    report->r_inter = v_inter;
    report->l_gan_unlab = v_gan;
    report->l_U = scalar(total);
  }
  return total;
}

torch::Tensor naive_distill_loss(const PredictionQuad& quad, const torch::Tensor& y_l,
                                 const LossContext& ctx, LossReport* report) {
  if (ctx.weights.lambda_naive < 0.0) throw InvalidInput("lambda_naive must be >= 0");
  LossReport unl, lab;
  torch::Tensor imitation = supervised_loss(quad.ys_u, quad.yg_u.detach(), ctx, &unl);
  torch::Tensor total = imitation;
  if (ctx.weights.lambda_naive > 0.0) {
    total = total + ctx.weights.lambda_naive * supervised_loss(quad.ys_l, y_l, ctx, &lab);
  }
  if (report) {
    // Labeled-branch components are reported under the supervised keys.
    report->l_wv = lab.l_wv;
    report->l_vgg = lab.l_vgg;
    report->l_gan_lab = lab.l_gan_lab;
    report->l_L = lab.l_L;
    report->l_gan_unlab = unl.l_gan_lab;
    report->l_U = 0.0;
    report->l_nd = scalar(total);
    report->total = *report->l_nd;
  }
  return total;
}

torch::Tensor pdd_objective(const PredictionQuad& quad, const torch::Tensor& y_l,
                            const LossContext& ctx, LossReport* report) {
  torch::Tensor l_lab = supervised_loss(quad.ys_l, y_l, ctx, report);
  torch::Tensor l_unl = unsupervised_loss(quad, ctx, report);
  if (report) report->total = report->l_L + report->l_U;
  return l_lab + l_unl;
}

}  // namespace pairdist
