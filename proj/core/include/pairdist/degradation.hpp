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
#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "pairdist/image.hpp"
#include "pairdist/resize.hpp"

namespace pairdist {

// ---------------------------------------------------------------------------
// Individual degradation stages. Each stage is fully resolved: applying it is
// a pure function of (image, parameters).
// ---------------------------------------------------------------------------

struct GaussianBlur {
  double sigma = 0.0;
};

struct AnisotropicBlur {
  double sigma_x = 0.0;
  double sigma_y = 0.0;
  double theta = 0.0;  // radians
};

struct GaussianNoise {
  double sigma = 0.0;  // in [0, 1] intensity units
  std::uint64_t seed = 0;
};

struct ResizeStage {
  Interp interp = Interp::Bicubic;
  double factor = 1.0;
};

struct JpegStage {
  int quality = 95;
};

using DegradationStage =
    std::variant<GaussianBlur, AnisotropicBlur, GaussianNoise, ResizeStage, JpegStage>;

std::string stage_kind(const DegradationStage& stage);

ImageTensor apply_stage(const ImageTensor& img, const DegradationStage& stage);

// Individual operators, exposed for tests and tooling.
ImageTensor gaussian_blur(const ImageTensor& img, double sigma);
ImageTensor anisotropic_blur(const ImageTensor& img, double sigma_x, double sigma_y, double theta);
ImageTensor add_gaussian_noise(const ImageTensor& img, double sigma, std::uint64_t seed);
ImageTensor jpeg_roundtrip(const ImageTensor& img, int quality);

// ---------------------------------------------------------------------------
// Recipes
// ---------------------------------------------------------------------------

struct DegradationRecipe {
  std::vector<DegradationStage> stages;
  int final_scale = 4;
  std::uint64_t seed = 0;

  // Product of all resize factors; the final realization step brings the
  // image to exactly 1 / final_scale of the input.
  double resize_product() const;
};

nlohmann::json to_json(const DegradationStage& stage);
DegradationStage stage_from_json(const nlohmann::json& j);
nlohmann::json to_json(const DegradationRecipe& recipe);
DegradationRecipe recipe_from_json(const nlohmann::json& j);

// Applies stages in order, then resizes (bicubic) to exactly
// (H / final_scale) x (W / final_scale) unless the stages already landed
// there. Throws InvalidShape if H or W is not divisible by final_scale.
ImageTensor apply_recipe(const ImageTensor& hr, const DegradationRecipe& recipe);

// ---------------------------------------------------------------------------
// Pipeline configurations and sampling
// ---------------------------------------------------------------------------

enum class DomainTag { Specialist, Generalist, PseudoReal };

std::string to_string(DomainTag tag);
DomainTag domain_from_string(const std::string& name);

struct Range {
  double lo = 0.0;
  double hi = 0.0;
};

// Template for one stage. Only the ranges relevant to `kind` are read.
struct StageSpec {
  std::string kind;                    // gaussian_blur | anisotropic_blur | gaussian_noise | resize | jpeg
  Range sigma{};                       // blur / noise sigma (log-uniform)
  Range sigma_x{}, sigma_y{}, theta{}; // anisotropic blur (sigmas log-uniform, theta uniform)
  Range factor{};                      // resize factor (uniform)
  bool complete_scale = false;         // resize: choose the factor that completes 1 / scale
  std::vector<Interp> interps{Interp::Bicubic};
  Range quality{};                     // jpeg quality (uniform integer)
};

enum class StageOrder { Fixed, ShufflePerRound };

struct PipelineConfig {
  DomainTag domain = DomainTag::Specialist;
  int scale = 4;
  std::vector<std::vector<StageSpec>> rounds;  // 1 or 2 rounds
  StageOrder order = StageOrder::Fixed;

  std::size_t stage_count() const;
  // Throws ConfigError on empty or inverted ranges and unknown kinds.
  void validate() const;
};

nlohmann::json to_json(const PipelineConfig& cfg);
PipelineConfig pipeline_from_json(const nlohmann::json& j);

// Bicubic-only labeled domain (zero explicit stages).
PipelineConfig default_specialist_pipeline(int scale = 4);
// Two rounds of blur -> resize -> noise -> JPEG with randomized parameters.
PipelineConfig default_generalist_pipeline(int scale = 4);
// Fixed held-out domain: blur 1.5, bicubic down, noise 10/255, JPEG 60.
PipelineConfig pseudo_real_pipeline(int scale = 4);

// Throws ConfigError unless generalist has at least twice as many stages as
// the specialist config.
void check_generalist_dominates(const PipelineConfig& specialist, const PipelineConfig& generalist);

DegradationRecipe sample_recipe(const PipelineConfig& cfg, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Dataset synthesis
// ---------------------------------------------------------------------------

struct ManifestEntry {
  std::filesystem::path hr_path;
  std::filesystem::path lr_path;
  DegradationRecipe recipe;
  std::uint64_t seed = 0;
};

struct Manifest {
  int version = 1;
  int scale = 4;
  std::string domain;
  std::vector<ManifestEntry> entries;
};

nlohmann::json to_json(const Manifest& m, const std::filesystem::path& base_dir);
// Relative paths are resolved against base_dir.
Manifest manifest_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);

void save_manifest(const Manifest& m, const std::filesystem::path& path);
Manifest load_manifest(const std::filesystem::path& path);

// Deterministic 64-bit mixing used to derive per-item seeds.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index) noexcept;

// Degrades every PNG in hr_dir (sorted by file name) and writes
// out_dir/lr/<name>.png plus out_dir/manifest.json. Images whose size is not
// a multiple of the scale are mod-cropped and the cropped HR is written to
// out_dir/hr/.
Manifest synthesize_dataset(const std::filesystem::path& hr_dir, const PipelineConfig& cfg,
                            const std::filesystem::path& out_dir, std::uint64_t seed);

std::vector<std::filesystem::path> list_pngs(const std::filesystem::path& dir);

}  // namespace pairdist
