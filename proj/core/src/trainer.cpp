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

#include "pairdist/trainer.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <random>
#include <map>
#include <sstream>

#include "pairdist/error.hpp"
#include "pairdist/crop.hpp"
#include "pairdist/evalkit.hpp"
#include "pairdist/torch_bridge.hpp"

namespace pairdist {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Config
// ---------------------------------------------------------------------------

FeatureExtractor build_extractor(const ExtractorConfig& cfg) {
  std::vector<TapId> taps;
  for (const auto& name : cfg.taps) taps.push_back(TapId::parse(name));
  if (cfg.kind == "random_small") {
    return taps.empty() ? FeatureExtractor::random_small(cfg.seed)
                        : FeatureExtractor::random_small(cfg.seed, taps);
  }
  if (cfg.kind == "vgg19") {
    if (cfg.weights.empty()) throw ConfigError("vgg19 extractor needs a weights file");
    return taps.empty() ? FeatureExtractor::vgg19(cfg.weights) : FeatureExtractor::vgg19(cfg.weights, taps);
  }
  throw ConfigError("unknown extractor kind '" + cfg.kind + "'");
}

void TrainConfig::validate() const {
  if (schema_version != 1) throw ConfigError("unsupported schema_version " + std::to_string(schema_version));
  if (batch_size < 2 || batch_size % 2 != 0) throw ConfigError("batch_size must be even and >= 2");
  if (lr_size < 1) throw ConfigError("lr_size must be >= 1");
  if (scale != generator.scale || scale != generalist_config().scale) {
    throw ConfigError("scale must match the generator scale");
  }
  if (total_iters < 1) throw ConfigError("total_iters must be >= 1");
  if (halve_at < 0 || halve_at >= total_iters) throw ConfigError("halve_at must lie in [0, total_iters)");
  if (!(lr > 0.0) || !(disc_lr > 0.0)) throw ConfigError("learning rates must be > 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0) || !(eps >= 0.0)) {
    throw ConfigError("invalid Adam hyper-parameters");
  }
  if (!(ema_decay >= 0.0 && ema_decay <= 1.0)) throw ConfigError("ema_decay must lie in [0, 1]");
  if (checkpoint_every < 1) throw ConfigError("checkpoint_every must be >= 1");
  if (!(spike_factor > 1.0) || spike_window < 1 || spike_min_history < 1) {
    throw ConfigError("spike_factor must be > 1, spike_window and spike_min_history >= 1");
  }
  loss.validate(uses_pdd(mode));
  generator.validate();
  generalist_config().validate();
  discriminator.validate();
  if ((mode == Mode::PddEma || mode == Mode::SingleFixed) && !generator.same_architecture(generalist_config())) {
    throw ConfigError(to_string(mode) + " needs identical specialist and generalist architectures");
  }
  const int hr = lr_size * scale;
  if (hr % (1 << loss.wavelet_levels) != 0) throw ConfigError("HR patch size not divisible by 2^wavelet_levels");
  if (hr < 8) throw ConfigError("HR patch must be at least 8 pixels");
  const bool from_manifest = !data.labeled_manifest.empty();
  const bool on_the_fly = !data.labeled_hr_dir.empty();
  if (from_manifest == on_the_fly) {
    throw ConfigError("set exactly one of data.labeled_manifest and data.labeled_hr_dir");
  }
  if (on_the_fly) {
    if (!data.labeled_pipeline) throw ConfigError("data.labeled_hr_dir needs data.labeled_pipeline");
    data.labeled_pipeline->validate();
    if (data.labeled_pipeline->scale != scale) throw ConfigError("labeled_pipeline scale differs from scale");
  }
  if (mode != Mode::SupervisedOnly && data.unlabeled_manifest.empty()) {
    throw ConfigError(to_string(mode) + " needs data.unlabeled_manifest");
  }
  if (init.discriminator != "generalist" && init.discriminator != "specialist" && init.discriminator != "fresh") {
    throw ConfigError("init.discriminator must be generalist, specialist or fresh");
  }
}

namespace {

fs::path resolve(const fs::path& base, const std::string& p) {
  if (p.empty()) return {};
  const fs::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

std::string rel(const fs::path& p) { return p.string(); }

}  // namespace

TrainConfig train_config_from_json(const nlohmann::json& j, const fs::path& base_dir) {
  if (!j.is_object()) throw ConfigError("train config must be a JSON object");
  TrainConfig c;
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "schema_version") c.schema_version = v.get<int>();
      else if (key == "mode") c.mode = mode_from_string(v.get<std::string>());
      else if (key == "seed") c.seed = v.get<std::uint64_t>();
      else if (key == "batch_size") c.batch_size = v.get<int>();
      else if (key == "lr_size") c.lr_size = v.get<int>();
      else if (key == "scale") c.scale = v.get<int>();
      else if (key == "lr") c.lr = v.get<double>();
      else if (key == "disc_lr") c.disc_lr = v.get<double>();
      else if (key == "beta1") c.beta1 = v.get<double>();
      else if (key == "beta2") c.beta2 = v.get<double>();
      else if (key == "eps") c.eps = v.get<double>();
      else if (key == "halve_at") c.halve_at = v.get<std::int64_t>();
      else if (key == "total_iters") c.total_iters = v.get<std::int64_t>();
      else if (key == "ema_decay") c.ema_decay = v.get<double>();
      else if (key == "checkpoint_every") c.checkpoint_every = v.get<std::int64_t>();
      else if (key == "spike_factor") c.spike_factor = v.get<double>();
      else if (key == "spike_window") c.spike_window = v.get<int>();
      else if (key == "spike_min_history") c.spike_min_history = v.get<int>();
      else if (key == "resume") c.resume = v.get<bool>();
      else if (key == "loss") c.loss = loss_weights_from_json(v);
      else if (key == "generator") c.generator = generator_config_from_json(v);
      else if (key == "generalist_generator") c.generalist_generator = generator_config_from_json(v);
      else if (key == "discriminator") c.discriminator = discriminator_config_from_json(v);
      else if (key == "extractor") {
        for (const auto& [k, x] : v.items()) {
          if (k == "kind") c.extractor.kind = x.get<std::string>();
          else if (k == "seed") c.extractor.seed = x.get<std::uint64_t>();
          else if (k == "weights") c.extractor.weights = resolve(base_dir, x.get<std::string>());
          else if (k == "taps") c.extractor.taps = x.get<std::vector<std::string>>();
          else throw ConfigError("unknown key 'extractor." + k + "'");
        }
      } else if (key == "data") {
        for (const auto& [k, x] : v.items()) {
          if (k == "labeled_manifest") c.data.labeled_manifest = resolve(base_dir, x.get<std::string>());
          else if (k == "labeled_hr_dir") c.data.labeled_hr_dir = resolve(base_dir, x.get<std::string>());
          else if (k == "labeled_pipeline") c.data.labeled_pipeline = pipeline_from_json(x);
          else if (k == "unlabeled_manifest") c.data.unlabeled_manifest = resolve(base_dir, x.get<std::string>());
          else if (k == "validation_manifest") c.data.validation_manifest = resolve(base_dir, x.get<std::string>());
          else if (k == "eval_max_images") c.data.eval_max_images = x.get<int>();
          else throw ConfigError("unknown key 'data." + k + "'");
        }
      } else if (key == "init") {
        for (const auto& [k, x] : v.items()) {
          if (k == "specialist") c.init.specialist = resolve(base_dir, x.get<std::string>());
          else if (k == "generalist") c.init.generalist = resolve(base_dir, x.get<std::string>());
          else if (k == "discriminator") c.init.discriminator = x.get<std::string>();
          else throw ConfigError("unknown key 'init." + k + "'");
        }
      } else {
        throw ConfigError("unknown key '" + key + "'");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed train config: ") + e.what());
  }
  c.validate();
  return c;
}

nlohmann::json to_json(const TrainConfig& c) {
  nlohmann::json data{{"eval_max_images", c.data.eval_max_images}};
  if (!c.data.labeled_manifest.empty()) data["labeled_manifest"] = rel(c.data.labeled_manifest);
  if (!c.data.labeled_hr_dir.empty()) data["labeled_hr_dir"] = rel(c.data.labeled_hr_dir);
  if (c.data.labeled_pipeline) data["labeled_pipeline"] = to_json(*c.data.labeled_pipeline);
  if (!c.data.unlabeled_manifest.empty()) data["unlabeled_manifest"] = rel(c.data.unlabeled_manifest);
  if (!c.data.validation_manifest.empty()) data["validation_manifest"] = rel(c.data.validation_manifest);
  nlohmann::json init{{"discriminator", c.init.discriminator}};
  if (!c.init.specialist.empty()) init["specialist"] = rel(c.init.specialist);
  if (!c.init.generalist.empty()) init["generalist"] = rel(c.init.generalist);
  nlohmann::json extractor{{"kind", c.extractor.kind}, {"seed", c.extractor.seed}, {"taps", c.extractor.taps}};
  if (!c.extractor.weights.empty()) extractor["weights"] = rel(c.extractor.weights);
  nlohmann::json j{{"schema_version", c.schema_version},
                   {"mode", to_string(c.mode)},
                   {"seed", c.seed},
                   {"batch_size", c.batch_size},
                   {"lr_size", c.lr_size},
                   {"scale", c.scale},
                   {"lr", c.lr},
                   {"disc_lr", c.disc_lr},
                   {"beta1", c.beta1},
                   {"beta2", c.beta2},
                   {"eps", c.eps},
                   {"halve_at", c.halve_at},
                   {"total_iters", c.total_iters},
                   {"ema_decay", c.ema_decay},
                   {"checkpoint_every", c.checkpoint_every},
                   {"spike_factor", c.spike_factor},
                   {"spike_window", c.spike_window},
                   {"spike_min_history", c.spike_min_history},
                   {"resume", c.resume},
                   {"loss", to_json(c.loss)},
                   {"generator", to_json(c.generator)},
                   {"discriminator", to_json(c.discriminator)},
                   {"extractor", std::move(extractor)},
                   {"data", std::move(data)},
                   {"init", std::move(init)}};
  if (c.generalist_generator) j["generalist_generator"] = to_json(*c.generalist_generator);
  return j;
}

TrainConfig load_train_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return train_config_from_json(j, path.parent_path());
}

void override_iters(TrainConfig& cfg, std::int64_t iters) {
  if (iters < 1) throw ConfigError("iterations must be >= 1");
  if (cfg.halve_at >= iters) {
    cfg.halve_at = cfg.total_iters > 0 ? cfg.halve_at * iters / cfg.total_iters : iters / 2;
    cfg.halve_at = std::min(cfg.halve_at, iters - 1);
  }
  cfg.total_iters = iters;
}

double lr_at(std::int64_t step, double lr0, std::int64_t halve_at) {
  if (step < 0) throw InvalidInput("step must be >= 0");
  return step < halve_at ? lr0 : lr0 * 0.5;
}

double lr_at(std::int64_t step, const TrainConfig& cfg) { return lr_at(step, cfg.lr, cfg.halve_at); }

// ---------------------------------------------------------------------------
// Data
// ---------------------------------------------------------------------------

LabeledSource LabeledSource::from_manifest(const Manifest& m) {
  LabeledSource s;
  s.scale = m.scale;
  for (const auto& e : m.entries) {
    s.hr.push_back(read_png(e.hr_path));
    s.lr.push_back(read_png(e.lr_path));
    s.ids.push_back(e.lr_path.filename().string());
  }
  return s;
}

LabeledSource LabeledSource::on_the_fly(std::vector<ImageTensor> hr, std::vector<std::string> ids,
                                        const PipelineConfig& pipeline) {
  if (hr.size() != ids.size()) throw InvalidInput("one id per HR image required");
  LabeledSource s;
  s.hr = std::move(hr);
  s.ids = std::move(ids);
  s.pipeline = pipeline;
  s.scale = pipeline.scale;
  return s;
}

UnlabeledSource UnlabeledSource::from_manifest(const Manifest& m) {
  UnlabeledSource s;
  for (const auto& e : m.entries) {
    s.lr.push_back(read_png(e.lr_path));
    s.ids.push_back(e.lr_path.filename().string());
  }
  return s;
}

namespace {

constexpr std::uint64_t kBatchStream = 0xBA7C4;

int uniform_index(std::mt19937_64& rng, int n) { return std::uniform_int_distribution<int>(0, n - 1)(rng); }

}  // namespace

Batch make_batch(const LabeledSource& labeled, const UnlabeledSource& unlabeled, const TrainConfig& cfg,
                 std::int64_t step) {
  const int p = cfg.lr_size, s = cfg.scale, hp = p * s;
  const int n_l = cfg.mode == Mode::SupervisedOnly ? cfg.batch_size : cfg.batch_size / 2;
  const int n_u = cfg.batch_size - n_l;
  if (labeled.size() == 0) throw DataError("labeled source is empty");
  if (n_u > 0 && unlabeled.size() == 0) throw DataError("unlabeled source is empty");
  if (labeled.scale != s) throw DataError("labeled source scale differs from the configured scale");

  const std::uint64_t root = mix_seed(mix_seed(cfg.seed, kBatchStream), static_cast<std::uint64_t>(step));
  Batch b;
  std::vector<ImageTensor> xl, yl, xu, real;
  for (int i = 0; i < n_l; ++i) {
    const std::uint64_t si = mix_seed(root, static_cast<std::uint64_t>(i));
    std::mt19937_64 rng(si);
    const int idx = uniform_index(rng, static_cast<int>(labeled.size()));
    const ImageTensor& hr = labeled.hr[idx];
    if (hr.height() < hp || hr.width() < hp) throw DataError("labeled image " + labeled.ids[idx] + " smaller than the HR patch");
    if (labeled.pipeline) {
      // Crop on the LR grid so the patch is aligned with the final scale.
      const int top = uniform_index(rng, hr.height() / s - p + 1) * s;
      const int left = uniform_index(rng, hr.width() / s - p + 1) * s;
      ImageTensor hr_patch = hr.crop(top, left, hp, hp);
      const DegradationRecipe recipe = sample_recipe(*labeled.pipeline, mix_seed(si, 2));
      xl.push_back(apply_recipe(hr_patch, recipe));
      yl.push_back(std::move(hr_patch));
      b.ids.push_back("L:" + labeled.ids[idx] + "@" + std::to_string(top) + "," + std::to_string(left) +
                      "#recipe=" + to_json(recipe).dump());
    } else {
      PairedCrop c = paired_random_crop(labeled.lr[idx], hr, p, s, mix_seed(si, 1));
      b.ids.push_back("L:" + labeled.ids[idx] + "@" + std::to_string(c.lr_top) + "," + std::to_string(c.lr_left));
      xl.push_back(std::move(c.lr));
      yl.push_back(std::move(c.hr));
    }
  }
  for (int i = 0; i < n_u; ++i) {
    std::mt19937_64 rng(mix_seed(root, 0x10000u + static_cast<std::uint64_t>(i)));
    const int idx = uniform_index(rng, static_cast<int>(unlabeled.size()));
    const ImageTensor& lr = unlabeled.lr[idx];
    if (lr.height() < p || lr.width() < p) throw DataError("unlabeled image " + unlabeled.ids[idx] + " smaller than the patch");
    const int top = uniform_index(rng, lr.height() - p + 1);
    const int left = uniform_index(rng, lr.width() - p + 1);
    xu.push_back(lr.crop(top, left, p, p));
    b.ids.push_back("U:" + unlabeled.ids[idx] + "@" + std::to_string(top) + "," + std::to_string(left));
  }
  if (n_u > 0 && cfg.loss.unpaired_real) {
    for (int i = 0; i < n_u; ++i) {
      std::mt19937_64 rng(mix_seed(root, 0x20000u + static_cast<std::uint64_t>(i)));
      const ImageTensor& hr = labeled.hr[uniform_index(rng, static_cast<int>(labeled.size()))];
      const int top = uniform_index(rng, hr.height() - hp + 1);
      const int left = uniform_index(rng, hr.width() - hp + 1);
      real.push_back(hr.crop(top, left, hp, hp));
    }
  }
  b.x_l = stack_images(xl);
  b.y_l = stack_images(yl);
  if (!xu.empty()) b.x_u = stack_images(xu);
  if (!real.empty()) b.real_hr = stack_images(real);
  return b;
}

// ---------------------------------------------------------------------------
// Optimization
// ---------------------------------------------------------------------------

namespace {

std::unique_ptr<torch::optim::Adam> make_adam(const std::vector<torch::Tensor>& params, double lr,
                                              const TrainConfig& cfg) {
  auto opts = torch::optim::AdamOptions(lr).betas({cfg.beta1, cfg.beta2}).eps(cfg.eps);
  return std::make_unique<torch::optim::Adam>(params, opts);
}

void set_lr(torch::optim::Optimizer& opt, double lr) {
  for (auto& group : opt.param_groups()) static_cast<torch::optim::AdamOptions&>(group.options()).lr(lr);
}

void set_requires_grad(torch::nn::Module& m, bool on) {
  for (auto& p : m.parameters()) p.set_requires_grad(on);
}

bool gan_active(const TrainConfig& cfg) {
  if (cfg.loss.alpha_gan > 0.0) return true;
  return uses_pdd(cfg.mode) && cfg.loss.lambda_gan > 0.0;
}

double median(std::deque<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

TrainState init_train_state(const TrainConfig& cfg) {
  cfg.validate();
  TrainState st(build_extractor(cfg.extractor));
  GeneratorConfig spec = cfg.generator;
  GeneratorConfig gen = cfg.generalist_config();
  DiscriminatorConfig disc = cfg.discriminator;
  // Init streams derive from the global seed so one --seed reseeds everything.
  spec.seed = mix_seed(cfg.seed, 0x5000 + spec.seed);
  gen.seed = mix_seed(cfg.seed, 0x6000 + gen.seed);
  disc.seed = mix_seed(cfg.seed, 0x7000 + disc.seed);
  st.pair = make_model_pair(cfg.mode, spec, gen, disc, cfg.ema_decay);
  ModelPair& p = st.pair;

  switch (cfg.mode) {
    case Mode::PddEma:
    case Mode::SingleFixed:
      // Both networks start from the pretrained generalist.
      if (!cfg.init.generalist.empty()) load_specialist_weights(cfg.init.generalist, p.generalist);
      copy_generator(p.generalist, p.specialist);
      break;
    case Mode::PddStatic:
    case Mode::NaiveDistill:
    case Mode::SupervisedOnly:
      if (!cfg.init.specialist.empty()) load_specialist_weights(cfg.init.specialist, p.specialist);
      if (!cfg.init.generalist.empty()) load_specialist_weights(cfg.init.generalist, p.generalist);
      break;
  }
  const fs::path disc_src = cfg.init.discriminator == "generalist"   ? cfg.init.generalist
                            : cfg.init.discriminator == "specialist" ? cfg.init.specialist
                                                                     : fs::path{};
  if (!disc_src.empty()) {
    const Checkpoint ck = load_checkpoint(disc_src);
    auto dst = p.discriminator->named_tensors();
    copy_named_tensors(dst, ck.pair.discriminator->named_tensors());
  }
  st.gen_opt = make_adam(p.specialist->parameters(), cfg.lr, cfg);
  st.disc_opt = make_adam(p.discriminator->parameters(), cfg.disc_lr, cfg);
  return st;
}

StepResult train_step(TrainState& st, const Batch& batch, const TrainConfig& cfg) {
  ModelPair& p = st.pair;
  if (p.mode != cfg.mode) throw InvalidState("train state mode differs from the config mode");
  StepResult res;
  res.lr = lr_at(p.step, cfg);
  set_lr(*st.gen_opt, res.lr);
  set_lr(*st.disc_opt, lr_at(p.step, cfg.disc_lr, cfg.halve_at));

  LossContext ctx{st.extractor, p.discriminator, cfg.loss};
  LossReport& rep = res.report;
  std::vector<torch::Tensor> fakes;
  torch::Tensor loss;

  set_requires_grad(*p.discriminator, false);
  if (cfg.mode == Mode::SupervisedOnly) {
    const torch::Tensor ys_l = p.specialist->forward(batch.x_l);
    loss = supervised_loss(ys_l, batch.y_l, ctx, &rep);
    rep.total = rep.l_L;
    fakes = {ys_l};
  } else {
    if (batch.unlabeled_count() == 0) throw DataError(to_string(cfg.mode) + " needs unlabeled inputs");
    const PredictionQuad quad = predict_quad(p, batch.x_u, batch.x_l);
    loss = cfg.mode == Mode::NaiveDistill ? naive_distill_loss(quad, batch.y_l, ctx, &rep)
                                          : pdd_objective(quad, batch.y_l, ctx, &rep);
    fakes = {quad.ys_l, quad.ys_u};
  }
  set_requires_grad(*p.discriminator, true);

  if (!rep.all_finite()) {
    nlohmann::json diag{{"step", p.step}, {"mode", to_string(cfg.mode)}, {"report", to_json(rep)}, {"batch", batch.ids}};
    throw NonFiniteLoss("step " + std::to_string(p.step), diag.dump());
  }

  if (static_cast<int>(st.recent_totals.size()) >= cfg.spike_min_history) {
    const double med = median(st.recent_totals);
    if (med > 0.0 && rep.total > cfg.spike_factor * med) res.skipped = true;
  }

  if (!res.skipped) {
    st.gen_opt->zero_grad();
    if (loss.requires_grad()) {
      loss.backward();
      st.gen_opt->step();
    }
    if (gan_active(cfg)) {
      std::vector<torch::Tensor> reals{batch.y_l};
      if (batch.real_hr.defined()) reals.push_back(batch.real_hr);
      std::vector<torch::Tensor> detached;
      for (const auto& f : fakes) detached.push_back(f.detach());
      st.disc_opt->zero_grad();
      const torch::Tensor d_loss =
          gan_discriminator_loss(p.discriminator, torch::cat(reals, 0), torch::cat(detached, 0));
      d_loss.backward();
      st.disc_opt->step();
      p.discriminator->power_iteration();
      rep.l_disc = d_loss.item<double>();
      if (!std::isfinite(*rep.l_disc)) {
        nlohmann::json diag{{"step", p.step}, {"report", to_json(rep)}, {"batch", batch.ids}};
        throw NonFiniteLoss("discriminator loss at step " + std::to_string(p.step), diag.dump());
      }
    }
    if (p.mode == Mode::PddEma) ema_update(p);
    st.recent_totals.push_back(rep.total);
    while (static_cast<int>(st.recent_totals.size()) > cfg.spike_window) st.recent_totals.pop_front();
    st.running_total = p.step == 0 ? rep.total : 0.99 * st.running_total + 0.01 * rep.total;
  } else {
    ++st.skipped_steps;
  }
  ++p.step;
  return res;
}

nlohmann::json log_record(std::int64_t step, const StepResult& r) {
  nlohmann::json j = to_json(r.report);
  j["step"] = step;
  j["lr"] = r.lr;
  j["skipped"] = r.skipped;
  return j;
}

namespace {

void save_adam(const torch::optim::Adam& opt, const std::string& prefix, std::vector<NamedTensor>& out) {
  const auto& params = opt.param_groups().at(0).params();
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto it = opt.state().find(params[i].unsafeGetTensorImpl());
    if (it == opt.state().end()) continue;
    const auto& s = static_cast<const torch::optim::AdamParamState&>(*it->second);
    const std::string key = prefix + std::to_string(i) + "/";
    out.push_back({key + "step", torch::tensor({s.step()}, torch::kInt64)});
    out.push_back({key + "exp_avg", s.exp_avg()});
    out.push_back({key + "exp_avg_sq", s.exp_avg_sq()});
  }
}

void load_adam(torch::optim::Adam& opt, const std::string& prefix, const std::vector<NamedTensor>& tensors) {
  std::map<std::string, torch::Tensor> by_name;
  for (const auto& t : tensors) by_name[t.name] = t.tensor;
  const auto& params = opt.param_groups().at(0).params();
  opt.state().clear();
  for (std::size_t i = 0; i < params.size(); ++i) {
    const std::string key = prefix + std::to_string(i) + "/";
    if (!by_name.count(key + "step")) continue;
    const torch::Tensor avg = by_name.at(key + "exp_avg");
    const torch::Tensor sq = by_name.at(key + "exp_avg_sq");
    if (!avg.sizes().equals(params[i].sizes()) || !sq.sizes().equals(params[i].sizes())) {
      throw IntegrityError("optimizer state '" + key + "' does not match its parameter");
    }
    auto s = std::make_unique<torch::optim::AdamParamState>();
    s->step(by_name.at(key + "step").item<std::int64_t>());
    s->exp_avg(avg.clone());
    s->exp_avg_sq(sq.clone());
    opt.state()[params[i].unsafeGetTensorImpl()] = std::move(s);
  }
}

}  // namespace

CheckpointExtras state_extras(const TrainState& st, const TrainConfig& cfg) {
  CheckpointExtras ex;
  // Batches are a pure function of (seed, step); no generator state to keep.
  ex.rng_state = {{"kind", "counter"}, {"seed", cfg.seed}, {"next_step", st.pair.step}};
  ex.trainer = {{"recent_totals", std::vector<double>(st.recent_totals.begin(), st.recent_totals.end())},
                {"running_total", st.running_total},
                {"skipped_steps", st.skipped_steps}};
  save_adam(*st.gen_opt, "gen_opt/", ex.tensors);
  save_adam(*st.disc_opt, "disc_opt/", ex.tensors);
  return ex;
}

void save_train_state(const TrainState& st, const TrainConfig& cfg, const fs::path& path) {
  save_checkpoint(st.pair, path, state_extras(st, cfg));
}

TrainState load_train_state(const TrainConfig& cfg, const fs::path& path) {
  cfg.validate();
  ArchConfig expected{cfg.generator, cfg.generalist_config(), cfg.discriminator};
  Checkpoint ck = load_checkpoint(path, expected);
  if (ck.pair.mode != cfg.mode) {
    throw ConfigError(path.string() + " was written in mode " + to_string(ck.pair.mode) + ", config says " +
                      to_string(cfg.mode));
  }
  TrainState st(build_extractor(cfg.extractor));
  st.pair = ck.pair;
  st.gen_opt = make_adam(st.pair.specialist->parameters(), cfg.lr, cfg);
  st.disc_opt = make_adam(st.pair.discriminator->parameters(), cfg.disc_lr, cfg);
  load_adam(*st.gen_opt, "gen_opt/", ck.extras.tensors);
  load_adam(*st.disc_opt, "disc_opt/", ck.extras.tensors);
  try {
    for (double v : ck.extras.trainer.at("recent_totals").get<std::vector<double>>()) st.recent_totals.push_back(v);
    st.running_total = ck.extras.trainer.at("running_total").get<double>();
    st.skipped_steps = ck.extras.trainer.at("skipped_steps").get<std::int64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw IntegrityError(path.string() + ": trainer state malformed: " + e.what());
  }
  return st;
}

// ---------------------------------------------------------------------------
// Runs
// ---------------------------------------------------------------------------

std::string checkpoint_name(std::int64_t step) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "ckpt_%07lld.bin", static_cast<long long>(step));
  return buf;
}

namespace {

void write_json(const fs::path& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

// Newest checkpoint in the run dir, by step encoded in the name.
std::optional<fs::path> newest_checkpoint(const fs::path& dir) {
  std::optional<fs::path> best;
  for (const auto& e : fs::directory_iterator(dir)) {
    const std::string name = e.path().filename().string();
    if (name.starts_with("ckpt_") && name.ends_with(".bin") && (!best || name > best->filename().string())) {
      best = e.path();
    }
  }
  return best;
}

// Keeps log lines for steps before `step`.
void truncate_log(const fs::path& log, std::int64_t step) {
  if (!fs::exists(log)) return;
  std::ifstream in(log);
  std::vector<std::string> keep;
  for (std::string line; std::getline(in, line);) {
    if (line.empty()) continue;
    try {
      if (nlohmann::json::parse(line).at("step").get<std::int64_t>() < step) keep.push_back(line);
    } catch (const nlohmann::json::exception&) {
      break;  // torn last line of an interrupted run
    }
  }
  in.close();
  std::ofstream out(log, std::ios::trunc);
  for (const auto& l : keep) out << l << '\n';
}

}  // namespace

RunArtifacts fit(const TrainConfig& cfg, const fs::path& run_dir, const FitOptions& opts) {
  cfg.validate();
  std::error_code ec;
  fs::create_directories(run_dir, ec);
  if (ec) throw IoError("cannot create run directory " + run_dir.string() + ": " + ec.message());

  RunArtifacts art;
  art.run_dir = run_dir;
  art.log = run_dir / "log.jsonl";
  art.eval_summary = run_dir / "eval_summary.json";
  write_json(run_dir / "config.json", to_json(cfg));
  write_json(run_dir / "status.json", {{"complete", false}});

  LabeledSource labeled;
  if (!cfg.data.labeled_manifest.empty()) {
    labeled = LabeledSource::from_manifest(load_manifest(cfg.data.labeled_manifest));
  } else {
    std::vector<ImageTensor> hr;
    std::vector<std::string> ids;
    for (const auto& path : list_pngs(cfg.data.labeled_hr_dir)) {
      hr.push_back(read_png(path));
      ids.push_back(path.filename().string());
    }
    labeled = LabeledSource::on_the_fly(std::move(hr), std::move(ids), *cfg.data.labeled_pipeline);
  }
  UnlabeledSource unlabeled;
  if (cfg.mode != Mode::SupervisedOnly) unlabeled = UnlabeledSource::from_manifest(load_manifest(cfg.data.unlabeled_manifest));

  std::optional<TrainState> st;
  if (cfg.resume) {
    if (auto ck = newest_checkpoint(run_dir)) {
      st.emplace(load_train_state(cfg, *ck));
      truncate_log(art.log, st->step());
    }
  }
  if (!st) {
    st.emplace(init_train_state(cfg));
    std::ofstream(art.log, std::ios::trunc);
  }

  std::ofstream log(art.log, std::ios::app);
  if (!log) throw IoError("cannot write " + art.log.string());
  bool stopped = false;
  while (st->step() < cfg.total_iters) {
    const std::int64_t step = st->step();
    const Batch batch = make_batch(labeled, unlabeled, cfg, step);
    const StepResult r = train_step(*st, batch, cfg);
    log << log_record(step, r).dump() << '\n';
    log.flush();
    const std::int64_t done = st->step();
    if (done % cfg.checkpoint_every == 0 || done == cfg.total_iters) {
      const fs::path ck = run_dir / checkpoint_name(done);
      save_train_state(*st, cfg, ck);
      art.checkpoints.push_back(ck);
    }
    if (opts.on_step && !opts.on_step(step, r)) {
      stopped = done < cfg.total_iters;
      break;
    }
  }
  if (stopped) {
    write_json(run_dir / "status.json", {{"complete", false}, {"step", st->step()}});
    return art;
  }
  art.final_checkpoint = run_dir / checkpoint_name(cfg.total_iters);
  if (!fs::exists(art.final_checkpoint)) save_train_state(*st, cfg, art.final_checkpoint);

  nlohmann::json summary;
  if (!cfg.data.validation_manifest.empty()) {
    EvalOptions eo;
    eo.max_images = cfg.data.eval_max_images;
    eo.model_id = "specialist@" + checkpoint_name(cfg.total_iters);
    const Manifest m = load_manifest(cfg.data.validation_manifest);
    summary["specialist"] = to_json(evaluate(generator_upscaler(st->pair.specialist), m, eo));
  } else {
    summary["skipped"] = "no data.validation_manifest configured";
  }
  summary["steps"] = st->step();
  summary["skipped_steps"] = st->skipped_steps;
  write_json(art.eval_summary, summary);
  write_json(run_dir / "status.json", {{"complete", true}, {"step", st->step()}});
  art.complete = true;
  return art;
}

}  // namespace pairdist
