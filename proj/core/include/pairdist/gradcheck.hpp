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
#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <torch/torch.h>

namespace pairdist {

struct GradcheckOptions {
  double step = 1e-4;          // central-difference step
  double tolerance = 1e-3;     // per-coordinate relative error
  double min_pass_fraction = 0.99;
  double denominator_floor = 1e-7;  // |a - n| / max(|a|, |n|, floor)
  int size = 8;                // inputs are size x size x 3
  std::uint64_t seed = 0;
};

struct GradcheckRow {
  std::string name;
  std::int64_t coordinates = 0;
  // Coordinates whose +-step stencil crosses a kink (ReLU, max-pool, |.|):
  // the function is not differentiable on that interval, so the central
  // difference is no oracle there. Excluded from `probed`.
  std::int64_t straddling = 0;
  std::int64_t probed = 0;
  std::int64_t passed = 0;
  double max_rel_error = 0.0;  // over probed coordinates
  double pass_fraction = 0.0;  // passed / probed
  double raw_pass_fraction = 0.0;  // over all coordinates, for reference
  bool ok = false;
};

// Identifies the piecewise-smooth region of an input; any integer tensor.
using RegionFn = std::function<torch::Tensor(const torch::Tensor&)>;

double gradcheck_relative_error(double analytic, double numeric, double floor);

// Compares autograd against central differences at every coordinate of x
// (float64). f must return a scalar. With `region`, coordinates where
// region(x + h e_i) != region(x - h e_i) are counted as straddling.
GradcheckRow gradcheck(const std::string& name, const std::function<torch::Tensor(const torch::Tensor&)>& f,
                       const torch::Tensor& x, const GradcheckOptions& opts, const RegionFn& region = {});

// r_intra (cross-entropy and l1), r_inter, wavelet, perceptual and
// generator GAN losses with respect to prediction pixels.
std::vector<GradcheckRow> run_gradcheck_suite(const GradcheckOptions& opts = {});

nlohmann::json to_json(const GradcheckRow& r);
std::string format_gradcheck_table(const std::vector<GradcheckRow>& rows);

}  // namespace pairdist
