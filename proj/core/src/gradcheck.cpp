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

#include "pairdist/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include <ATen/CPUGeneratorImpl.h>

#include "pairdist/error.hpp"
#include "pairdist/features.hpp"
#include "pairdist/losses.hpp"
#include "pairdist/networks.hpp"

namespace pairdist {

double gradcheck_relative_error(double analytic, double numeric, double floor) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

GradcheckRow gradcheck(const std::string& name, const std::function<torch::Tensor(const torch::Tensor&)>& f,
                       const torch::Tensor& x0, const GradcheckOptions& opts, const RegionFn& region) {
  if (x0.scalar_type() != torch::kFloat64) throw InvalidInput("gradcheck runs in double precision");
  torch::Tensor x = x0.detach().clone().set_requires_grad(true);
  torch::Tensor y = f(x);
  if (y.numel() != 1) throw InvalidShape("gradcheck target must be a scalar");
  y.backward();
  const torch::Tensor analytic = x.grad().detach().reshape({-1}).clone();

  GradcheckRow row;
  row.name = name;
  torch::NoGradGuard no_grad;
  torch::Tensor probe = x0.detach().clone();
  auto flat = probe.view({-1});
  std::int64_t raw_passed = 0;
  for (std::int64_t i = 0; i < flat.numel(); ++i) {
    const double orig = flat[i].item<double>();
    flat[i] = orig + opts.step;
    const double plus = f(probe).item<double>();
    const torch::Tensor region_plus = region ? region(probe) : torch::Tensor();
    flat[i] = orig - opts.step;
    const double minus = f(probe).item<double>();
    const bool straddles = region && !torch::equal(region_plus, region(probe));
    flat[i] = orig;
    const double numeric = (plus - minus) / (2.0 * opts.step);
    const double err = gradcheck_relative_error(analytic[i].item<double>(), numeric, opts.denominator_floor);
    ++row.coordinates;
    if (err <= opts.tolerance) ++raw_passed;
    if (straddles) {
      ++row.straddling;
      continue;
    }
    row.max_rel_error = std::max(row.max_rel_error, err);
    ++row.probed;
    if (err <= opts.tolerance) ++row.passed;
  }
  row.raw_pass_fraction = static_cast<double>(raw_passed) / static_cast<double>(row.coordinates);
  row.pass_fraction = row.probed ? static_cast<double>(row.passed) / static_cast<double>(row.probed) : 0.0;
  row.ok = row.probed > 0 && row.pass_fraction >= opts.min_pass_fraction;
  return row;
}

std::vector<GradcheckRow> run_gradcheck_suite(const GradcheckOptions& opts) {
  torch::Generator gen = at::make_generator<at::CPUGeneratorImpl>(opts.seed);
  const auto dopt = torch::TensorOptions().dtype(torch::kFloat64);
  auto rand_img = [&] { return torch::rand({1, 3, opts.size, opts.size}, gen, dopt); };

  const FeatureExtractor ex = FeatureExtractor::random_small(opts.seed).to(torch::kFloat64);
  if (opts.size < ex.min_input_size()) throw InvalidInput("gradcheck size below the extractor minimum");
  DiscriminatorConfig dcfg;
  dcfg.num_feat = 8;
  dcfg.seed = opts.seed + 1;
  Discriminator disc(dcfg);
  disc->to(torch::kFloat64);

  const torch::Tensor yg_l = rand_img(), yg_u = rand_img(), gt = rand_img();
  const torch::Tensor pair0 = torch::cat({rand_img(), rand_img()}, 0);  // [ys_l; ys_u]
  const auto fg_l = ex.forward(yg_l), fg_u = ex.forward(yg_u);

  auto r_intra_of = [&](IntraMeasure m) {
    return [&, m](const torch::Tensor& x) {
      const auto fs_l = ex.forward(x.narrow(0, 0, 1));
      const auto fs_u = ex.forward(x.narrow(0, 1, 1));
      return r_intra(intra_distance(fg_l, fg_u), intra_distance(fs_l, fs_u), m);
    };
  };
  auto r_inter_fn = [&](const torch::Tensor& x) {
    const auto fs_l = ex.forward(x.narrow(0, 0, 1));
    const auto fs_u = ex.forward(x.narrow(0, 1, 1));
    return r_inter(inter_distance(fs_u, fg_u), inter_distance(fs_l, fg_l));
  };
  const std::vector<double> wv_weights{1.0, 1.0, 1.0, 1.0};

  // Region descriptors: backbone activation patterns plus the signs of every
  // |.| argument the loss contains.
  auto signs = [](const std::vector<torch::Tensor>& ts) {
    std::vector<torch::Tensor> parts;
    for (const auto& t : ts) parts.push_back((t > 0).to(torch::kInt64).reshape({-1}));
    return torch::cat(parts);
  };
  auto diff = [](const std::vector<torch::Tensor>& a, const std::vector<torch::Tensor>& b) {
    std::vector<torch::Tensor> out;
    for (std::size_t k = 0; k < a.size(); ++k) out.push_back(a[k] - b[k]);
    return out;
  };
  const auto dG = intra_distance(fg_l, fg_u);
  auto pair_region = [&](bool l1_outer) {
    return [&, l1_outer](const torch::Tensor& x) {
      torch::NoGradGuard no_grad;
      const auto fs_l = ex.forward(x.narrow(0, 0, 1));
      const auto fs_u = ex.forward(x.narrow(0, 1, 1));
      std::vector<torch::Tensor> parts{ex.activation_pattern(x), signs(diff(fs_l, fs_u))};
      if (l1_outer) parts.push_back(signs(diff(dG, intra_distance(fs_l, fs_u))));
      return torch::cat(parts);
    };
  };
  auto inter_region = [&](const torch::Tensor& x) { return ex.activation_pattern(x); };
  auto wavelet_region = [&](const torch::Tensor& x) {
    return signs(diff(haar_channels(x, 1), haar_channels(gt, 1)));
  };
  auto perceptual_region = [&](const torch::Tensor& x) {
    torch::NoGradGuard no_grad;
    return torch::cat({ex.activation_pattern(x), signs(diff(ex.forward(x), ex.forward(gt)))});
  };
  auto gan_region = [&](const torch::Tensor& x) { return disc->activation_pattern(x); };

  std::vector<GradcheckRow> rows;
  rows.push_back(gradcheck("r_intra_ce", r_intra_of(IntraMeasure::CrossEntropy), pair0, opts, pair_region(false)));
  rows.push_back(gradcheck("r_intra_l1", r_intra_of(IntraMeasure::L1), pair0, opts, pair_region(true)));
  rows.push_back(gradcheck("r_inter", r_inter_fn, pair0, opts, inter_region));
  rows.push_back(gradcheck(
      "wavelet_loss", [&](const torch::Tensor& x) { return wavelet_loss(x, gt, wv_weights, 1); }, rand_img(), opts,
      wavelet_region));
  rows.push_back(gradcheck(
      "perceptual_loss", [&](const torch::Tensor& x) { return perceptual_loss(x, gt, ex); }, rand_img(), opts,
      perceptual_region));
  rows.push_back(gradcheck(
      "gan_generator_loss", [&](const torch::Tensor& x) { return gan_generator_loss(disc, x); }, rand_img(), opts,
      gan_region));
  return rows;
}

nlohmann::json to_json(const GradcheckRow& r) {
  return {{"name", r.name},
          {"coordinates", r.coordinates},
          {"straddling", r.straddling},
          {"raw_pass_fraction", r.raw_pass_fraction},
          {"probed", r.probed},
          {"passed", r.passed},
          {"pass_fraction", r.pass_fraction},
          {"max_rel_error", r.max_rel_error},
          {"ok", r.ok}};
}

std::string format_gradcheck_table(const std::vector<GradcheckRow>& rows) {
  std::string out = "loss                 coords  kinked  probed  passed  fraction  raw_frac  max_rel_err  result\n";
  char buf[200];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%-20s %6lld  %6lld  %6lld  %6lld  %8.4f  %8.4f  %11.3e  %s\n", r.name.c_str(),
                  static_cast<long long>(r.coordinates), static_cast<long long>(r.straddling),
                  static_cast<long long>(r.probed), static_cast<long long>(r.passed), r.pass_fraction,
                  r.raw_pass_fraction, r.max_rel_error, r.ok ? "PASS" : "FAIL");
    out += buf;
  }
  return out;
}

}  // namespace pairdist
