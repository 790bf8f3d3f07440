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

#include <filesystem>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "pairdist/degradation.hpp"
#include "pairdist/features.hpp"
#include "pairdist/image.hpp"
#include "pairdist/networks.hpp"
#include "pairdist/stats.hpp"

namespace pairdist {

// Remaps each SR channel to the LR channel's mean and (population) std. A
// constant SR channel becomes the LR mean. Both images RGB.
ImageTensor color_correct(const ImageTensor& sr, const ImageTensor& lr, bool clip = true);

inline constexpr double kPsnrCap = 99.0;

// On full-range BT.601 luma. Identical images give kPsnrCap.
double psnr_y(const ImageTensor& a, const ImageTensor& b);
// Mean SSIM over all valid 11x11 Gaussian windows (sigma 1.5) of the luma,
// K1 = 0.01, K2 = 0.03, data range 1. Needs both sides >= 11.
double ssim_y(const ImageTensor& a, const ImageTensor& b);
// Mean forward-difference gradient magnitude of the luma.
double sharpness(const ImageTensor& img);

using Upscaler = std::function<ImageTensor(const ImageTensor&)>;

// Runs the generator without autograd; output clipped to [0, 1].
Upscaler generator_upscaler(Generator g);
Upscaler bicubic_upscaler(int scale);

struct ImageScore {
  std::string id;
  double psnr_y = 0.0;
  double ssim_y = 0.0;
  double sharpness = 0.0;
  std::map<std::string, double> external;  // merged from CSV
};

struct EvalReport {
  std::string dataset_id;
  std::string model_id;
  bool color_correction = false;
  std::vector<ImageScore> rows;  // manifest order
  double psnr_y = 0.0;           // means over rows
  double ssim_y = 0.0;
  double sharpness = 0.0;
  std::map<std::string, double> external;

  void recompute_aggregates();
};

nlohmann::json to_json(const EvalReport& r);
void write_eval_report(const EvalReport& r, const std::filesystem::path& path);

struct EvalOptions {
  bool color_correction = false;
  int max_images = 0;  // 0: all
  std::string model_id = "unnamed";
};

EvalReport evaluate(const Upscaler& up, const Manifest& manifest, const EvalOptions& opts);

// The stored specialist ("specialist") or generalist ("generalist") of a
// checkpoint on a manifest. Ids are checksums of the input bytes.
EvalReport evaluate_checkpoint(const std::filesystem::path& checkpoint, const std::filesystem::path& manifest,
                               bool color_correction, const std::string& role = "specialist");

// Merges rows "image_id,metric_name,value" (header line optional). Throws
// DataError for unknown images or malformed rows.
void merge_external_metrics(EvalReport& report, const std::filesystem::path& csv);

// ---------------------------------------------------------------------------
// Feature-distribution analysis
// ---------------------------------------------------------------------------

struct DomainGapOptions {
  TapId tap{1, 2};  // shallow tap: low-level statistics
  int tile = 32;    // descriptors per tile x tile crop; 0 = whole image
};

struct DomainGapResult {
  double kl = 0.0;  // KL(labeled || unlabeled)
  GaussianStats labeled;
  GaussianStats unlabeled;
  PcaProjection projection;  // labeled rows first
  int labeled_samples = 0;
  int unlabeled_samples = 0;
};

// Needs >= 8 images per set.
DomainGapResult domain_gap_analysis(std::span<const ImageTensor> labeled_preds,
                                    std::span<const ImageTensor> unlabeled_preds, const FeatureExtractor& ex,
                                    const DomainGapOptions& opts = {});

// Same, upscaling the LR sets with `up` first.
DomainGapResult domain_gap_for_model(const Upscaler& up, std::span<const ImageTensor> labeled_lr,
                                     std::span<const ImageTensor> unlabeled_lr, const FeatureExtractor& ex,
                                     const DomainGapOptions& opts = {});

nlohmann::json to_json(const DomainGapResult& r);

// Scatter plot of the 2-D projection.
void write_projection_svg(const DomainGapResult& r, const std::filesystem::path& path, const std::string& title);
// Bar chart of labeled KL values.
void write_kl_svg(const std::vector<std::pair<std::string, double>>& bars, const std::filesystem::path& path,
                  const std::string& title);

std::vector<ImageTensor> load_lr_images(const Manifest& m, int max_images = 0);
std::vector<ImageTensor> load_hr_images(const Manifest& m, int max_images = 0);

}  // namespace pairdist
