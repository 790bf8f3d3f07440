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

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <variant>
#include <vector>

#include <gtest/gtest.h>

#include "pairdist/degradation.hpp"
#include "pairdist/error.hpp"
#include "pairdist/evalkit.hpp"
#include "pairdist/procedural.hpp"
#include "pairdist/resize.hpp"
#include "pairdist/tensor_archive.hpp"
#include "test_util.hpp"

namespace pairdist {
namespace {

namespace fs = std::filesystem;
using testing::random_image;
using testing::TempDir;

PipelineConfig single_stage(StageSpec spec) {
  PipelineConfig cfg;
  cfg.rounds = {{std::move(spec)}};
  return cfg;
}

TEST(Degradation, EmptyRecipeIsBicubic) {
  const ImageTensor hr = random_image(32, 32, 1);
  DegradationRecipe r;
  r.final_scale = 4;
  EXPECT_EQ(apply_recipe(hr, r), bicubic_downsample(hr, 4));
}

TEST(Degradation, ZeroNoiseIsNoOp) {
  const ImageTensor img = random_image(16, 16, 2);
  EXPECT_EQ(add_gaussian_noise(img, 0.0, 5), img);
  EXPECT_EQ(apply_stage(img, GaussianNoise{0.0, 5}), img);
}

TEST(Degradation, RecipeSerializationIsExact) {
  const ImageTensor hr = random_image(64, 64, 3);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const DegradationRecipe r = sample_recipe(default_generalist_pipeline(4), seed);
    const DegradationRecipe back = recipe_from_json(nlohmann::json::parse(to_json(r).dump()));
    EXPECT_EQ(to_json(back), to_json(r));
    EXPECT_EQ(apply_recipe(hr, back), apply_recipe(hr, r));
    EXPECT_EQ(apply_recipe(hr, r).height(), 16);
  }
}

TEST(Degradation, SampleIsDeterministic) {
  const auto cfg = default_generalist_pipeline(4);
  EXPECT_EQ(to_json(sample_recipe(cfg, 42)), to_json(sample_recipe(cfg, 42)));
  EXPECT_NE(to_json(sample_recipe(cfg, 42)), to_json(sample_recipe(cfg, 43)));
}

TEST(Degradation, PointRangeGivesThatValue) {
  const DegradationRecipe r = sample_recipe(single_stage({.kind = "gaussian_blur", .sigma = {1.25, 1.25}}), 9);
  ASSERT_EQ(r.stages.size(), 1u);
  ASSERT_TRUE(std::holds_alternative<GaussianBlur>(r.stages[0]));
  EXPECT_DOUBLE_EQ(std::get<GaussianBlur>(r.stages[0]).sigma, 1.25);
}

// Blur sigma is drawn log-uniformly; the Kolmogorov-Smirnov statistic of
// log(sigma) against the uniform CDF must stay below the alpha = 0.01
// critical value 1.628 / sqrt(n).
TEST(Degradation, BlurSigmaIsLogUniform) {
  const auto cfg = single_stage({.kind = "gaussian_blur", .sigma = {0.2, 3.0}});
  const int n = 10000;
  std::vector<double> u;
  u.reserve(n);
  double lo = 1e9, hi = -1e9;
  for (int i = 0; i < n; ++i) {
    const double s = std::get<GaussianBlur>(sample_recipe(cfg, static_cast<std::uint64_t>(i)).stages[0]).sigma;
    lo = std::min(lo, s);
    hi = std::max(hi, s);
    u.push_back((std::log(s) - std::log(0.2)) / (std::log(3.0) - std::log(0.2)));
  }
  EXPECT_GE(lo, 0.2);
  EXPECT_LE(hi, 3.0);
  std::sort(u.begin(), u.end());
  double d = 0.0;
  for (int i = 0; i < n; ++i) d = std::max({d, (i + 1.0) / n - u[i], u[i] - static_cast<double>(i) / n});
  EXPECT_LT(d, 1.628 / std::sqrt(static_cast<double>(n)));
}

TEST(Degradation, NoiseStatistics) {
  const ImageTensor gray(128, 128, 3, ColorSpace::RGB, 0.5);
  const double sigma = 0.02;
  const ImageTensor noisy = add_gaussian_noise(gray, sigma, 17);
  for (int c = 0; c < 3; ++c) {
    double sum = 0.0, sq = 0.0;
    for (int y = 0; y < 128; ++y)
      for (int x = 0; x < 128; ++x) {
        const double d = noisy.at(y, x, c) - 0.5;
        sum += d;
        sq += d * d;
      }
    const double n = 128.0 * 128.0;
    const double mean = sum / n;
    EXPECT_LT(std::abs(mean), 3.0 * sigma / 128.0);
    EXPECT_NEAR(std::sqrt(sq / n - mean * mean), sigma, 0.05 * sigma);
  }
  EXPECT_EQ(add_gaussian_noise(gray, sigma, 17), noisy);
}

TEST(Degradation, JpegQualityIsMonotone) {
  const ImageTensor img = procedural_image(64, 64, 5);
  const double q10 = psnr_y(jpeg_roundtrip(img, 10), img);
  const double q95 = psnr_y(jpeg_roundtrip(img, 95), img);
  const double q100 = psnr_y(jpeg_roundtrip(img, 100), img);
  EXPECT_LT(q10, q95);
  EXPECT_GT(q100, 40.0);
}

TEST(Degradation, BlurKeepsConstants) {
  const ImageTensor c(16, 16, 3, ColorSpace::RGB, 0.3);
  const ImageTensor iso = gaussian_blur(c, 2.0);
  const ImageTensor aniso = anisotropic_blur(c, 2.0, 0.5, 0.7);
  for (double v : iso.data()) EXPECT_NEAR(v, 0.3, 1e-12);
  for (double v : aniso.data()) EXPECT_NEAR(v, 0.3, 1e-12);
}

TEST(Degradation, GeneralistHasMoreStages) {
  const auto s = default_specialist_pipeline(4);
  const auto g = default_generalist_pipeline(4);
  EXPECT_GT(g.stage_count(), s.stage_count());
  EXPECT_NO_THROW(check_generalist_dominates(s, g));
  EXPECT_THROW(check_generalist_dominates(g, s), ConfigError);
  EXPECT_GT(sample_recipe(g, 1).stages.size(), sample_recipe(s, 1).stages.size());
}

TEST(Degradation, PipelineValidation) {
  EXPECT_THROW(single_stage({.kind = "gaussian_blur", .sigma = {3.0, 0.2}}).validate(), ConfigError);
  EXPECT_THROW(single_stage({.kind = "sharpen"}).validate(), ConfigError);
  const auto g = default_generalist_pipeline(4);
  EXPECT_EQ(to_json(pipeline_from_json(to_json(g))), to_json(g));
  EXPECT_THROW(pipeline_from_json({{"domain", "D_G"}, {"scale", 4}, {"rounds", {{}}}, {"bogus", 1}}), ConfigError);
}

class SynthTest : public ::testing::Test {
 protected:
  void SetUp() override { write_procedural_corpus(dir_ / "hr", 5, 34, 30, 3); }
  TempDir dir_{"synth"};
};

TEST_F(SynthTest, BicubicManifest) {
  const Manifest m = synthesize_dataset(dir_ / "hr", default_specialist_pipeline(4), dir_ / "a", 1);
  ASSERT_EQ(m.entries.size(), 5u);
  for (const auto& e : m.entries) {
    EXPECT_TRUE(e.recipe.stages.empty());
    const ImageTensor lr = read_png(e.lr_path);
    const ImageTensor hr = read_png(e.hr_path);
    EXPECT_EQ(hr.height(), 32);  // mod-cropped
    EXPECT_EQ(lr.height() * 4, hr.height());
    EXPECT_EQ(lr.width() * 4, hr.width());
  }
  const Manifest back = load_manifest(dir_ / "a" / "manifest.json");
  EXPECT_EQ(back.entries.size(), 5u);
  EXPECT_EQ(back.entries[2].lr_path, m.entries[2].lr_path);
}

TEST_F(SynthTest, RerunIsByteIdentical) {
  const Manifest a = synthesize_dataset(dir_ / "hr", default_generalist_pipeline(4), dir_ / "a", 7);
  const Manifest b = synthesize_dataset(dir_ / "hr", default_generalist_pipeline(4), dir_ / "b", 7);
  for (std::size_t i = 0; i < a.entries.size(); ++i) {
    EXPECT_EQ(read_file_bytes(a.entries[i].lr_path), read_file_bytes(b.entries[i].lr_path));
  }
  const Manifest c = synthesize_dataset(dir_ / "hr", default_generalist_pipeline(4), dir_ / "c", 8);
  EXPECT_NE(read_file_bytes(a.entries[0].lr_path), read_file_bytes(c.entries[0].lr_path));
}

TEST(Degradation, MixSeedSpreads) {
  EXPECT_NE(mix_seed(1, 0), mix_seed(1, 1));
  EXPECT_NE(mix_seed(1, 0), mix_seed(2, 0));
  EXPECT_EQ(mix_seed(5, 9), mix_seed(5, 9));
}

}  // namespace
}  // namespace pairdist
