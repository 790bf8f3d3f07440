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

#include <cstddef>
#include <vector>

#include <Eigen/Dense>

namespace pairdist {

// Multivariate Gaussian fitted to descriptor samples.
struct GaussianStats {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
  std::size_t count = 0;

  int dim() const noexcept { return static_cast<int>(mean.size()); }
};

inline constexpr double kCovarianceRidge = 1e-6;

// Sample mean and unbiased covariance of the rows of `samples` (n x d).
// Throws InvalidInput for fewer than two rows.
GaussianStats fit_gaussian(const Eigen::MatrixXd& samples);

// Adds ridge * I to the covariance and symmetrizes it.
GaussianStats regularized(const GaussianStats& s, double ridge = kCovarianceRidge);

// Closed-form KL(P || Q) between two Gaussians. Covariances must already be
// positive definite (see regularized()); throws InvalidInput otherwise and on
// dimension mismatch.
double kl_gaussian(const GaussianStats& p, const GaussianStats& q);

struct PcaProjection {
  Eigen::MatrixXd points;      // n x 2
  Eigen::VectorXd mean;        // d
  Eigen::MatrixXd components;  // d x 2, unit columns
};

// Projects the rows of `samples` onto their two leading principal axes.
// Component signs are fixed so the largest-magnitude loading is positive.
PcaProjection pca_2d(const Eigen::MatrixXd& samples);

}  // namespace pairdist
