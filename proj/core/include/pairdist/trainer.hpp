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
#include <deque>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <torch/torch.h>

#include "pairdist/checkpoint.hpp"
#include "pairdist/degradation.hpp"
#include "pairdist/features.hpp"
#include "pairdist/image.hpp"
#include "pairdist/losses.hpp"
#include "pairdist/models.hpp"

namespace pairdist {

struct ExtractorConfig {
  std::string kind = "random_small";  // or "vgg19"
  std::uint64_t seed = 0;             // random_small only
  std::filesystem::path weights;      // vgg19 only
  std::vector<std::string> taps;      // empty: backbone defaults
};

FeatureExtractor build_extractor(const ExtractorConfig& cfg);

struct DataConfig {
  // Labeled pairs: either a synthesized manifest, or HR images degraded on
  // the fly with `labeled_pipeline` (fresh recipe per sample).
  std::filesystem::path labeled_manifest;
  std::filesystem::path labeled_hr_dir;
  std::optional<PipelineConfig> labeled_pipeline;
  // Only the LR side of this manifest is ever read.
  std::filesystem::path unlabeled_manifest;
  std::filesystem::path validation_manifest;
  int eval_max_images = 0;  // 0: all
};

struct InitConfig {
  std::filesystem::path specialist;  // checkpoint whose specialist weights are used
  std::filesystem::path generalist;
  std::string discriminator = "generalist";  // "generalist", "specialist" or "fresh"
};

struct TrainConfig {
  int schema_version = 1;
  Mode mode = Mode::PddEma;
  std::uint64_t seed = 0;
  int batch_size = 8;
  int lr_size = 48;
  int scale = 4;
  double lr = 1e-4;
  double disc_lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::int64_t halve_at = 2500;
  std::int64_t total_iters = 5000;
  double ema_decay = 0.999;
  std::int64_t checkpoint_every = 1000;
  double spike_factor = 100.0;  // skip a step whose total exceeds this x running median
  int spike_window = 50;
  int spike_min_history = 10;
  bool resume = false;  // continue from the newest checkpoint in the run dir
  LossWeights loss;
  GeneratorConfig generator;
  std::optional<GeneratorConfig> generalist_generator;  // defaults to `generator`
  DiscriminatorConfig discriminator;
  ExtractorConfig extractor;
  DataConfig data;
  InitConfig init;

  // Throws ConfigError.
  void validate() const;
  GeneratorConfig generalist_config() const { return generalist_generator.value_or(generator); }
};

// Unknown keys are rejected. Relative paths resolve against base_dir.
TrainConfig train_config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
nlohmann::json to_json(const TrainConfig& cfg);
TrainConfig load_train_config(const std::filesystem::path& path);

// Overrides the iteration count; halve_at is rescaled proportionally when it
// would no longer precede the end of training.
void override_iters(TrainConfig& cfg, std::int64_t iters);

// lr0 before halve_at, lr0 / 2 from halve_at on.
double lr_at(std::int64_t step, const TrainConfig& cfg);
double lr_at(std::int64_t step, double lr0, std::int64_t halve_at);

// ---------------------------------------------------------------------------
// Data
// ---------------------------------------------------------------------------

struct LabeledSource {
  std::vector<ImageTensor> hr;
  std::vector<ImageTensor> lr;  // empty in on-the-fly mode
  std::vector<std::string> ids;
  std::optional<PipelineConfig> pipeline;
  int scale = 4;

  std::size_t size() const noexcept { return hr.size(); }
  static LabeledSource from_manifest(const Manifest& m);
  static LabeledSource on_the_fly(std::vector<ImageTensor> hr, std::vector<std::string> ids,
                                  const PipelineConfig& pipeline);
};

struct UnlabeledSource {
  std::vector<ImageTensor> lr;
  std::vector<std::string> ids;

  std::size_t size() const noexcept { return lr.size(); }
  static UnlabeledSource from_manifest(const Manifest& m);
};

struct Batch {
  torch::Tensor x_l;  // N_L x 3 x p x p
  torch::Tensor y_l;  // N_L x 3 x sp x sp
  torch::Tensor x_u;  // N_U x 3 x p x p, undefined when N_U = 0
  torch::Tensor real_hr;  // unpaired clean HR crops for the critic
  std::vector<std::string> ids;  // one per sample, labeled first

  std::int64_t labeled_count() const { return x_l.defined() ? x_l.size(0) : 0; }
  std::int64_t unlabeled_count() const { return x_u.defined() ? x_u.size(0) : 0; }
};

// batch_size / 2 labeled and batch_size / 2 unlabeled patches (all labeled
// in supervised_only mode). A pure function of (cfg.seed, step).
// Throws DataError when a needed source is empty or too small.
Batch make_batch(const LabeledSource& labeled, const UnlabeledSource& unlabeled,
                 const TrainConfig& cfg, std::int64_t step);

// ---------------------------------------------------------------------------
// Optimization
// ---------------------------------------------------------------------------

struct TrainState {
  explicit TrainState(FeatureExtractor ex) : extractor(std::move(ex)) {}

  FeatureExtractor extractor;
  ModelPair pair;
  std::unique_ptr<torch::optim::Adam> gen_opt;
  std::unique_ptr<torch::optim::Adam> disc_opt;
  std::deque<double> recent_totals;  // accepted totals, newest last
  double running_total = 0.0;        // exponential average, for logging
  std::int64_t skipped_steps = 0;

  std::int64_t step() const noexcept { return pair.step; }
};

// Builds networks, loads initial weights per mode, creates the optimizers.
TrainState init_train_state(const TrainConfig& cfg);

struct StepResult {
  LossReport report;
  double lr = 0.0;
  bool skipped = false;
};

// One generator update, one critic update, then the EMA update in pdd_ema
// mode. Throws NonFiniteLoss (with batch ids in the report) on NaN/Inf.
StepResult train_step(TrainState& state, const Batch& batch, const TrainConfig& cfg);

nlohmann::json log_record(std::int64_t step, const StepResult& r);

CheckpointExtras state_extras(const TrainState& state, const TrainConfig& cfg);
void save_train_state(const TrainState& state, const TrainConfig& cfg, const std::filesystem::path& path);
// Restores networks, optimizer moments and trainer bookkeeping.
TrainState load_train_state(const TrainConfig& cfg, const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Runs
// ---------------------------------------------------------------------------

struct RunArtifacts {
  std::filesystem::path run_dir;
  std::vector<std::filesystem::path> checkpoints;
  std::filesystem::path final_checkpoint;
  std::filesystem::path log;
  std::filesystem::path eval_summary;
  bool complete = false;
};

struct FitOptions {
  // Called after every step; return false to stop early (run marked incomplete).
  std::function<bool(std::int64_t step, const StepResult&)> on_step;
};

// Writes config.json, log.jsonl, ckpt_<step>.bin, eval_summary.json and
// status.json ({"complete": bool}) under run_dir.
RunArtifacts fit(const TrainConfig& cfg, const std::filesystem::path& run_dir, const FitOptions& opts = {});

std::string checkpoint_name(std::int64_t step);

}  // namespace pairdist
