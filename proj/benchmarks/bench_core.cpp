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

// Throughput of the hot paths: resize, Haar, SSIM, distillation losses.

#include <random>
#include <vector>

#include <benchmark/benchmark.h>
#include <torch/torch.h>

#include "pairdist/evalkit.hpp"
#include "pairdist/features.hpp"
#include "pairdist/losses.hpp"
#include "pairdist/resize.hpp"
#include "pairdist/wavelet.hpp"

namespace {

using namespace pairdist;

ImageTensor noise_image(int h, int w, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> d(static_cast<std::size_t>(h) * w * 3);
  for (double& v : d) v = u(rng);
  return ImageTensor::from_data(h, w, 3, std::move(d));
}

void BM_BicubicDownsample(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const ImageTensor img = noise_image(n, n, 1);
  for (auto _ : state) benchmark::DoNotOptimize(bicubic_downsample(img, 4));
  state.SetItemsProcessed(state.iterations() * n * n);
}
BENCHMARK(BM_BicubicDownsample)->Arg(128)->Arg(256);

void BM_HaarRoundTrip(benchmark::State& state) {
  const ImageTensor img = noise_image(256, 256, 2);
  const int levels = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(haar_inverse(haar_forward(img, levels)));
}
BENCHMARK(BM_HaarRoundTrip)->Arg(1)->Arg(3);

void BM_SsimY(benchmark::State& state) {
  const ImageTensor a = noise_image(128, 128, 3), b = noise_image(128, 128, 4);
  for (auto _ : state) benchmark::DoNotOptimize(ssim_y(a, b));
}
BENCHMARK(BM_SsimY);

void BM_DistillationTerms(benchmark::State& state) {
  torch::set_num_threads(1);
  torch::manual_seed(0);
  const FeatureExtractor ex = FeatureExtractor::random_small(0);
  const int n = static_cast<int>(state.range(0));
  const auto yl = torch::rand({n, 3, 48, 48}), yu = torch::rand({n, 3, 48, 48});
  const auto gl = torch::rand({n, 3, 48, 48}), gu = torch::rand({n, 3, 48, 48});
  const auto fgl = ex.forward(gl), fgu = ex.forward(gu);
  for (auto _ : state) {
    const auto fsl = ex.forward(yl), fsu = ex.forward(yu);
    const auto intra = r_intra(intra_distance(fgl, fgu), intra_distance(fsl, fsu));
    const auto inter = r_inter(inter_distance(fsu, fgu), inter_distance(fsl, fgl));
    benchmark::DoNotOptimize((intra + inter).item<double>());
  }
}
BENCHMARK(BM_DistillationTerms)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
