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

#include <cmath>
#include <fstream>
#include <vector>

#include <gtest/gtest.h>

#include "pairdist/checkpoint.hpp"
#include "pairdist/color.hpp"
#include "pairdist/degradation.hpp"
#include "pairdist/error.hpp"
#include "pairdist/evalkit.hpp"
#include "pairdist/models.hpp"
#include "pairdist/procedural.hpp"
#include "pairdist/stats.hpp"
#include "pairdist/tensor_archive.hpp"
#include "test_util.hpp"

namespace pairdist {
namespace {

using testing::random_image;
using testing::TempDir;

std::pair<double, double> channel_stats(const ImageTensor& img, int ch) {
  double m = 0.0, v = 0.0;
  const int n = img.height() * img.width();
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x) m += img.at(y, x, ch);
  m /= n;
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x) v += (img.at(y, x, ch) - m) * (img.at(y, x, ch) - m);
  return {m, std::sqrt(v / n)};
}

double max_abs_diff(const ImageTensor& a, const ImageTensor& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a.data()[i] - b.data()[i]));
  return d;
}

TEST(ColorCorrect, MatchesLrStatistics) {
  // Narrow ranges keep the remapped values inside [0, 1], so clipping is inactive.
  const ImageTensor sr = random_image(32, 32, 1, 3, 0.2, 0.8);
  const ImageTensor lr = random_image(8, 8, 2, 3, 0.35, 0.65);
  const ImageTensor out = color_correct(sr, lr);
  EXPECT_EQ(max_abs_diff(out, color_correct(sr, lr, false)), 0.0);
  for (int c = 0; c < 3; ++c) {
    const auto [mo, so] = channel_stats(out, c);
    const auto [ml, sl] = channel_stats(lr, c);
    EXPECT_NEAR(mo, ml, 1e-6);
    EXPECT_NEAR(so, sl, 1e-6);
  }
}

TEST(ColorCorrect, IdempotentAndIdentity) {
  const ImageTensor sr = random_image(16, 16, 3, 3, 0.2, 0.8);
  const ImageTensor lr = random_image(4, 4, 4, 3, 0.4, 0.6);
  const ImageTensor once = color_correct(sr, lr);
  EXPECT_LT(max_abs_diff(color_correct(once, lr), once), 1e-6);
  // An SR image that already has the LR statistics is left alone.
  EXPECT_LT(max_abs_diff(color_correct(once, once), once), 1e-6);
}

TEST(ColorCorrect, ConstantChannelTakesLrMean) {
  ImageTensor sr(8, 8, 3, ColorSpace::RGB, 0.9);
  const ImageTensor lr = random_image(4, 4, 5);
  const ImageTensor out = color_correct(sr, lr);
  for (int c = 0; c < 3; ++c) {
    const double m = channel_stats(lr, c).first;
    for (int y = 0; y < 8; ++y) EXPECT_NEAR(out.at(y, 3, c), m, 1e-12);
  }
}

TEST(Psnr, SpotValues) {
  const ImageTensor a = random_image(16, 16, 6);
  EXPECT_EQ(psnr_y(a, a), 99.0);
  const ImageTensor g1(16, 16, 3, ColorSpace::RGB, 0.3), g2(16, 16, 3, ColorSpace::RGB, 0.4);
  EXPECT_NEAR(psnr_y(g1, g2), 20.0, 1e-9);
  EXPECT_THROW(psnr_y(a, random_image(8, 16, 1)), InvalidShape);
}

TEST(Psnr, MatchesIndependentMse) {
  const ImageTensor a = random_image(20, 12, 7), b = random_image(20, 12, 8);
  double mse = 0.0;
  for (int y = 0; y < 20; ++y)
    for (int x = 0; x < 12; ++x) {
      const double ya = 0.299 * a.at(y, x, 0) + 0.587 * a.at(y, x, 1) + 0.114 * a.at(y, x, 2);
      const double yb = 0.299 * b.at(y, x, 0) + 0.587 * b.at(y, x, 1) + 0.114 * b.at(y, x, 2);
      mse += (ya - yb) * (ya - yb);
    }
  mse /= 240.0;
  EXPECT_NEAR(psnr_y(a, b), 10.0 * std::log10(1.0 / mse), 1e-6);
  EXPECT_DOUBLE_EQ(psnr_y(a, b), psnr_y(b, a));
}

TEST(Ssim, SpotValues) {
  const ImageTensor a = random_image(24, 24, 9);
  EXPECT_NEAR(ssim_y(a, a), 1.0, 1e-12);
  std::vector<double> inv(a.data().begin(), a.data().end());
  for (double& v : inv) v = 1.0 - v;
  const ImageTensor b = ImageTensor::from_data(24, 24, 3, inv);
  EXPECT_LT(ssim_y(a, b), 0.5);
  EXPECT_NEAR(ssim_y(a, b), ssim_y(b, a), 1e-12);
  // Zero variances: SSIM = (2 mu_a mu_b + C1) / (mu_a^2 + mu_b^2 + C1).
  const double c1 = 1e-4, ma = 0.2, mb = 0.7;
  const ImageTensor ca(16, 16, 3, ColorSpace::RGB, ma), cb(16, 16, 3, ColorSpace::RGB, mb);
  EXPECT_NEAR(ssim_y(ca, cb), (2 * ma * mb + c1) / (ma * ma + mb * mb + c1), 1e-12);
  EXPECT_THROW(ssim_y(random_image(10, 10, 1), random_image(10, 10, 2)), InvalidShape);
}

TEST(Kl, ClosedForms) {
  GaussianStats p, q;
  p.mean = Eigen::VectorXd::Zero(1);
  q.mean = Eigen::VectorXd::Ones(1);
  p.cov = q.cov = Eigen::MatrixXd::Identity(1, 1);
  EXPECT_NEAR(kl_gaussian(p, q), 0.5, 1e-8);
  EXPECT_NEAR(kl_gaussian(p, p), 0.0, 1e-8);
  GaussianStats r = p;
  r.mean = Eigen::VectorXd::Zero(2);
  r.cov = Eigen::MatrixXd::Identity(2, 2);
  EXPECT_THROW(kl_gaussian(p, r), InvalidInput);
}

TEST(Kl, NonNegativeOnRandomPairs) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n01;
  for (int i = 0; i < 1000; ++i) {
    const int d = 1 + i % 4;
    auto random_pd = [&] {
      GaussianStats s;
      s.mean = Eigen::VectorXd(d);
      Eigen::MatrixXd a(d, d);
      for (int r = 0; r < d; ++r) {
        s.mean[r] = n01(rng);
        for (int c = 0; c < d; ++c) a(r, c) = n01(rng);
      }
      s.cov = a * a.transpose() + 0.1 * Eigen::MatrixXd::Identity(d, d);
      return s;
    };
    ASSERT_GE(kl_gaussian(random_pd(), random_pd()), 0.0);
  }
}

TEST(DomainGap, IdenticalAndSeparatedSets) {
  const auto ex = FeatureExtractor::random_small(0);
  std::vector<ImageTensor> clean, blurred;
  for (int i = 0; i < 8; ++i) {
    clean.push_back(procedural_image(32, 32, 200 + i));
    blurred.push_back(gaussian_blur(clean.back(), 3.0));
  }
  DomainGapOptions opts;
  opts.tile = 16;
  const DomainGapResult same = domain_gap_analysis(clean, clean, ex, opts);
  EXPECT_NEAR(same.kl, 0.0, 1e-8);
  EXPECT_EQ(same.projection.points.rows(), same.labeled_samples + same.unlabeled_samples);
  const DomainGapResult far = domain_gap_analysis(clean, blurred, ex, opts);
  EXPECT_GT(far.kl, 10.0);
  const std::vector<ImageTensor> few(clean.begin(), clean.begin() + 7);
  EXPECT_THROW(domain_gap_analysis(few, clean, ex, opts), InvalidInput);

  TempDir dir("svg");
  write_projection_svg(far, dir / "p.svg", "t");
  write_kl_svg({{"a", same.kl}, {"b", far.kl}}, dir / "k.svg", "kl");
  std::ifstream in(dir / "p.svg");
  std::string text((std::istreambuf_iterator<char>(in)), {});
  EXPECT_NE(text.find("<svg"), std::string::npos);
  EXPECT_NE(text.find("PCA"), std::string::npos);
}

class EvaluateTest : public ::testing::Test {
 protected:
  void SetUp() override {
    write_procedural_corpus(dir_ / "hr", 3, 32, 32, 5);
    manifest_ = synthesize_dataset(dir_ / "hr", default_specialist_pipeline(4), dir_ / "set", 1);
  }
  TempDir dir_{"eval"};
  Manifest manifest_;
};

TEST_F(EvaluateTest, BicubicBaselineIsReproducible) {
  const EvalReport a = evaluate(bicubic_upscaler(4), manifest_, {});
  const EvalReport b = evaluate(bicubic_upscaler(4), manifest_, {});
  EXPECT_EQ(to_json(a), to_json(b));
  ASSERT_EQ(a.rows.size(), 3u);
  double mean = 0.0;
  for (const auto& r : a.rows) {
    EXPECT_TRUE(std::isfinite(r.psnr_y));
    EXPECT_LT(r.psnr_y, 99.0);
    mean += r.psnr_y / 3.0;
  }
  EXPECT_NEAR(a.psnr_y, mean, 1e-9);
  const EvalReport cc = evaluate(bicubic_upscaler(4), manifest_, {.color_correction = true});
  EXPECT_EQ(cc.rows.size(), a.rows.size());
  EXPECT_TRUE(cc.color_correction);
  EXPECT_NE(cc.psnr_y, a.psnr_y);
}

TEST_F(EvaluateTest, CheckpointIdsAndReportFile) {
  const GeneratorConfig g{.scale = 4, .num_feat = 8, .num_blocks = 1, .growth = 4, .dense_layers = 2};
  const ModelPair p = make_model_pair(Mode::PddStatic, g, g, DiscriminatorConfig{.num_feat = 8});
  save_checkpoint(p, dir_ / "m.bin");
  const EvalReport r1 = evaluate_checkpoint(dir_ / "m.bin", dir_ / "set" / "manifest.json", false);
  const EvalReport r2 = evaluate_checkpoint(dir_ / "m.bin", dir_ / "set" / "manifest.json", false);
  EXPECT_EQ(to_json(r1), to_json(r2));
  EXPECT_EQ(r1.model_id.rfind("specialist@crc32:", 0), 0u);
  write_eval_report(r1, dir_ / "r.json");
  const auto j = nlohmann::json::parse(std::ifstream(dir_ / "r.json"));
  for (const char* k : {"dataset_id", "model_id", "color_correction", "count", "aggregate", "images"})
    EXPECT_TRUE(j.contains(k)) << k;
  EXPECT_THROW(evaluate_checkpoint(dir_ / "missing.bin", dir_ / "set" / "manifest.json", false), IoError);
}

TEST_F(EvaluateTest, ExternalMetricsMerge) {
  EvalReport r = evaluate(bicubic_upscaler(4), manifest_, {});
  {
    std::ofstream csv(dir_ / "m.csv");
    csv << "image_id,metric_name,value\n";
    for (const auto& row : r.rows) csv << row.id << ",lpips," << 0.25 << "\n";
  }
  merge_external_metrics(r, dir_ / "m.csv");
  EXPECT_DOUBLE_EQ(r.rows[1].external.at("lpips"), 0.25);
  EXPECT_DOUBLE_EQ(r.external.at("lpips"), 0.25);
  std::ofstream(dir_ / "bad.csv") << "nope.png,lpips,0.1\n";
  EXPECT_THROW(merge_external_metrics(r, dir_ / "bad.csv"), DataError);
  std::ofstream(dir_ / "bad2.csv") << r.rows[0].id << ",lpips,abc\n";
  EXPECT_THROW(merge_external_metrics(r, dir_ / "bad2.csv"), DataError);
}

TEST(Sharpness, BlurLowersIt) {
  const ImageTensor img = procedural_image(48, 48, 3);
  EXPECT_GT(sharpness(img), sharpness(gaussian_blur(img, 2.0)));
  EXPECT_EQ(sharpness(ImageTensor(8, 8, 3, ColorSpace::RGB, 0.5)), 0.0);
}

}  // namespace
}  // namespace pairdist
