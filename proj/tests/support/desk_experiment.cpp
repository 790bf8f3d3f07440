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

#include "desk_experiment.hpp"

#include <chrono>
#include <fstream>
#include <iostream>

#include "pairdist/checkpoint.hpp"
#include "pairdist/degradation.hpp"
#include "pairdist/evalkit.hpp"
#include "pairdist/procedural.hpp"

namespace pairdist::testing {

namespace fs = std::filesystem;

nlohmann::json DeskResults::to_json() const {
  nlohmann::json m;
  for (const auto& [name, s] : models) {
    m[name] = {{"psnr_bicubic", s.psnr_bicubic},
               {"psnr_pseudo", s.psnr_pseudo},
               {"ssim_pseudo", s.ssim_pseudo},
               {"sharp_pseudo", s.sharp_pseudo}};
  }
  return {{"models", m},
          {"kl_before", kl_before},
          {"kl_after", kl_after},
          {"specialist_psnr_init", specialist_psnr_init},
          {"seconds", seconds}};
}

TrainConfig desk_train_config(const DeskPlan& plan, Mode mode, std::int64_t iters) {
  TrainConfig c;
  c.mode = mode;
  c.seed = plan.seed;
  c.batch_size = plan.batch_size;
  c.lr_size = plan.lr_size;
  c.scale = plan.generator.scale;
  c.lr = plan.lr;
  c.disc_lr = plan.lr;
  c.total_iters = iters;
  c.halve_at = iters / 2;
  c.checkpoint_every = iters;
  c.loss = plan.loss;
  c.generator = plan.generator;
  c.discriminator = plan.discriminator;
  return c;
}

namespace {

using Clock = std::chrono::steady_clock;

ModelScores score(const Upscaler& up, const Manifest& bicubic, const Manifest& pseudo) {
  EvalOptions o;
  const EvalReport b = evaluate(up, bicubic, o);
  const EvalReport p = evaluate(up, pseudo, o);
  return {b.psnr_y, p.psnr_y, p.sharpness, p.ssim_y};
}

Generator specialist_of(const fs::path& ckpt) { return load_checkpoint(ckpt).pair.specialist; }

}  // namespace

DeskResults run_desk_experiment(const DeskPlan& plan, bool verbose) {
  DeskResults res;
  const fs::path root = plan.root;
  fs::create_directories(root);
  auto t0 = Clock::now();
  auto lap = [&](const std::string& what) {
    const auto now = Clock::now();
    res.seconds[what] = std::chrono::duration<double>(now - t0).count();
    if (verbose) std::cerr << "[desk] " << what << " " << res.seconds[what] << " s" << std::endl;
    t0 = now;
  };

  // Data: disjoint procedural HR sets for training, the unpaired unlabeled
  // domain and testing.
  const int s = plan.generator.scale;
  write_procedural_corpus(root / "hr_train", plan.train_images, plan.image_size, plan.image_size, mix_seed(plan.seed, 1));
  write_procedural_corpus(root / "hr_unlabeled", plan.unlabeled_images, plan.image_size, plan.image_size,
                          mix_seed(plan.seed, 2));
  write_procedural_corpus(root / "hr_test", plan.test_images, plan.image_size, plan.image_size, mix_seed(plan.seed, 3));
  synthesize_dataset(root / "hr_train", default_specialist_pipeline(s), root / "train_bicubic", mix_seed(plan.seed, 4));
  synthesize_dataset(root / "hr_unlabeled", pseudo_real_pipeline(s), root / "train_pseudo", mix_seed(plan.seed, 5));
  const Manifest test_bic =
      synthesize_dataset(root / "hr_test", default_specialist_pipeline(s), root / "test_bicubic", mix_seed(plan.seed, 6));
  const Manifest test_pseudo =
      synthesize_dataset(root / "hr_test", pseudo_real_pipeline(s), root / "test_pseudo", mix_seed(plan.seed, 7));
  lap("data");

  res.models["bicubic"] = score(bicubic_upscaler(s), test_bic, test_pseudo);

  // Specialist: bicubic pairs only.
  TrainConfig spec = desk_train_config(plan, Mode::SupervisedOnly, plan.specialist_iters);
  spec.data.labeled_manifest = root / "train_bicubic" / "manifest.json";
  spec.init.discriminator = "fresh";
  {
    const TrainState init = init_train_state(spec);
    res.specialist_psnr_init = evaluate(generator_upscaler(init.pair.specialist), test_bic, {}).psnr_y;
  }
  const RunArtifacts spec_run = fit(spec, root / "run_specialist");
  lap("specialist");

  // Generalist: randomized degradations drawn per sample.
  TrainConfig gen = desk_train_config(plan, Mode::SupervisedOnly, plan.generalist_iters);
  gen.seed = mix_seed(plan.seed, 11);
  gen.data.labeled_hr_dir = root / "hr_train";
  gen.data.labeled_pipeline = default_generalist_pipeline(s);
  gen.init.discriminator = "fresh";
  const RunArtifacts gen_run = fit(gen, root / "run_generalist");
  lap("generalist");

  // PDD, EMA configuration: both networks start from the generalist.
  TrainConfig pdd = desk_train_config(plan, Mode::PddEma, plan.pdd_iters);
  pdd.data.labeled_manifest = root / "train_bicubic" / "manifest.json";
  pdd.data.unlabeled_manifest = root / "train_pseudo" / "manifest.json";
  pdd.init.generalist = gen_run.final_checkpoint;
  pdd.init.discriminator = "generalist";
  const RunArtifacts pdd_run = fit(pdd, root / "run_pdd_ema");
  lap("pdd_ema");

  // Naive distillation from the specialist towards the frozen generalist.
  TrainConfig nd = desk_train_config(plan, Mode::NaiveDistill, plan.naive_iters);
  nd.data.labeled_manifest = root / "train_bicubic" / "manifest.json";
  nd.data.unlabeled_manifest = root / "train_pseudo" / "manifest.json";
  nd.init.specialist = spec_run.final_checkpoint;
  nd.init.generalist = gen_run.final_checkpoint;
  nd.init.discriminator = "specialist";
  const RunArtifacts nd_run = fit(nd, root / "run_naive_distill");
  lap("naive_distill");

  const Generator g_spec = specialist_of(spec_run.final_checkpoint);
  const Generator g_gen = specialist_of(gen_run.final_checkpoint);
  const Generator g_pdd = specialist_of(pdd_run.final_checkpoint);
  const Generator g_nd = specialist_of(nd_run.final_checkpoint);
  res.models["specialist"] = score(generator_upscaler(g_spec), test_bic, test_pseudo);
  res.models["generalist"] = score(generator_upscaler(g_gen), test_bic, test_pseudo);
  res.models["pdd_ema"] = score(generator_upscaler(g_pdd), test_bic, test_pseudo);
  res.models["naive_distill"] = score(generator_upscaler(g_nd), test_bic, test_pseudo);

  const FeatureExtractor ex = FeatureExtractor::random_small(0);
  const auto lr_bic = load_lr_images(test_bic);
  const auto lr_pseudo = load_lr_images(test_pseudo);
  res.kl_before = domain_gap_for_model(generator_upscaler(g_spec), lr_bic, lr_pseudo, ex).kl;
  res.kl_after = domain_gap_for_model(generator_upscaler(g_pdd), lr_bic, lr_pseudo, ex).kl;
  lap("evaluation");

  std::ofstream(root / "desk_results.json") << res.to_json().dump(2) << '\n';
  return res;
}

}  // namespace pairdist::testing
