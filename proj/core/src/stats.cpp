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

#include "pairdist/stats.hpp"

#include <cmath>

#include "pairdist/error.hpp"

namespace pairdist {

GaussianStats fit_gaussian(const Eigen::MatrixXd& samples) {
  if (samples.rows() < 2) throw InvalidInput("need at least two samples to fit a Gaussian");
  if (!samples.allFinite()) throw InvalidInput("non-finite descriptor values");
  GaussianStats s;
  s.count = static_cast<std::size_t>(samples.rows());
  s.mean = samples.colwise().mean().transpose();
  const Eigen::MatrixXd centered = samples.rowwise() - s.mean.transpose();
  s.cov = (centered.transpose() * centered) / static_cast<double>(samples.rows() - 1);
  s.cov = 0.5 * (s.cov + s.cov.transpose()).eval();
  return s;
}

GaussianStats regularized(const GaussianStats& s, double ridge) {
  GaussianStats out = s;
  out.cov = 0.5 * (s.cov + s.cov.transpose());
  out.cov.diagonal().array() += ridge;
  return out;
}

double kl_gaussian(const GaussianStats& p, const GaussianStats& q) {
  if (p.dim() != q.dim() || p.cov.rows() != p.dim() || q.cov.rows() != q.dim()) {
    throw InvalidInput("Gaussian dimensions differ");
  }
  if (p.dim() == 0) throw InvalidInput("zero-dimensional Gaussian");
  const Eigen::LLT<Eigen::MatrixXd> llt_q(q.cov);
  const Eigen::LLT<Eigen::MatrixXd> llt_p(p.cov);
  if (llt_q.info() != Eigen::Success || llt_p.info() != Eigen::Success) {
    throw InvalidInput("covariance not positive definite");
  }
  const Eigen::VectorXd diff = q.mean - p.mean;
  const double trace_term = llt_q.solve(p.cov).trace();
  const double maha = diff.dot(llt_q.solve(diff));
  auto logdet = [](const Eigen::LLT<Eigen::MatrixXd>& llt) {
    return 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  };
  const double kl = 0.5 * (trace_term + maha - p.dim() + logdet(llt_q) - logdet(llt_p));
  // Rounding can leave tiny negatives for P == Q.
  return std::max(0.0, kl);
}

PcaProjection pca_2d(const Eigen::MatrixXd& samples) {
  if (samples.rows() < 2) throw InvalidInput("PCA needs at least two samples");
  if (samples.cols() < 2) throw InvalidInput("PCA to 2-D needs at least two features");
  PcaProjection out;
  out.mean = samples.colwise().mean().transpose();
  const Eigen::MatrixXd centered = samples.rowwise() - out.mean.transpose();
  const Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(samples.rows() - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  const int d = static_cast<int>(cov.rows());
  out.components.resize(d, 2);
  for (int k = 0; k < 2; ++k) {
    Eigen::VectorXd v = eig.eigenvectors().col(d - 1 - k);
    Eigen::Index arg;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0) v = -v;
    out.components.col(k) = v;
  }
  out.points = centered * out.components;
  return out;
}

}  // namespace pairdist
