/*
 * Copyright 2026 The kahm-encoder Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 *
 */

#include "kahm/geometry.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace kahm {
namespace {

Matrix sample_covariance(const Matrix& samples) {
  const Eigen::RowVectorXd mean = samples.colwise().mean();
  const Matrix centered = samples.rowwise() - mean;
  return (centered.transpose() * centered) / static_cast<double>(samples.rows() - 1);
}

// Flip each column so its largest-magnitude entry is positive (first one on ties).
void fix_eigenvector_signs(Matrix& columns) {
  for (Eigen::Index c = 0; c < columns.cols(); ++c) {
    Eigen::Index arg = 0;
    double best = -1.0;
    for (Eigen::Index r = 0; r < columns.rows(); ++r) {
      const double mag = std::abs(columns(r, c));
      if (mag > best) {
        best = mag;
        arg = r;
      }
    }
    if (columns(arg, c) < 0.0) columns.col(c) *= -1.0;
  }
}

Eigen::VectorXd column_ranges(const Matrix& projected) {
  return projected.colwise().maxCoeff() - projected.colwise().minCoeff();
}

Matrix lower_cholesky(const Matrix& theta) {
  Eigen::LLT<Matrix> llt(theta);
  require(llt.info() == Eigen::Success, ErrorCode::kSingularCovariance,
          "projected covariance is not positive definite");
  return llt.matrixL();
}

}  // namespace

EncodingMatrix compute_encoding_matrix(const Matrix& samples) {
  const auto n_samples = samples.rows();
  const auto dim = samples.cols();
  require(n_samples >= 2, ErrorCode::kInvalidArgument, "encoding needs at least two samples");
  require(dim >= 1, ErrorCode::kInvalidArgument, "encoding needs at least one column");
  require(samples.allFinite(), ErrorCode::kNonFiniteValue, "samples contain non-finite values");

  const Eigen::VectorXd spread = column_ranges(samples);
  require(spread.maxCoeff() > 0.0, ErrorCode::kDegenerateData, "all samples are identical");

  Eigen::SelfAdjointEigenSolver<Matrix> eig(sample_covariance(samples));
  require(eig.info() == Eigen::Success, ErrorCode::kDegenerateData,
          "covariance eigendecomposition failed");

  // Eigen returns ascending eigenvalues; reverse to descending order.
  Matrix directions = eig.eigenvectors().rowwise().reverse();
  fix_eigenvector_signs(directions);

  int n_low = static_cast<int>(
      std::min<Eigen::Index>({kMaxEncodingDim, dim, n_samples - 1}));
  while (true) {
    const Matrix encoding = directions.leftCols(n_low).transpose();
    const Matrix projected = samples * encoding.transpose();
    if (column_ranges(projected).minCoeff() >= kProjectedRangeCutoff) {
      return EncodingMatrix{encoding, n_low};
    }
    --n_low;
    require(n_low >= 1, ErrorCode::kDegenerateData,
            "every projected coordinate collapsed below the range cutoff");
  }
}

Matrix projected_covariance(const Matrix& projected) {
  require(projected.rows() >= 2, ErrorCode::kInvalidArgument,
          "covariance needs at least two samples");
  Matrix theta = sample_covariance(projected);
  theta = 0.5 * (theta + theta.transpose());

  Eigen::LLT<Matrix> llt(theta);
  if (llt.info() == Eigen::Success) return theta;

  const double jitter = 1e-10 * theta.trace() / static_cast<double>(theta.rows());
  theta.diagonal().array() += jitter;
  llt.compute(theta);
  require(jitter > 0.0 && llt.info() == Eigen::Success, ErrorCode::kSingularCovariance,
          "projected covariance is singular after jitter repair");
  return theta;
}

RegularizationMap::RegularizationMap(const Matrix& samples, const Matrix& kernel_matrix) {
  require(kernel_matrix.rows() == samples.rows() && kernel_matrix.cols() == samples.rows(),
          ErrorCode::kInvalidArgument, "kernel matrix must be N x N");
  Eigen::SelfAdjointEigenSolver<Matrix> eig(kernel_matrix);
  require(eig.info() == Eigen::Success, ErrorCode::kNoConvergence,
          "kernel eigendecomposition failed");
  eigenvalues_ = eig.eigenvalues();
  const Matrix rotated = eig.eigenvectors().transpose() * samples;
  projected_mass_ = rotated.rowwise().squaredNorm();
  scale_ = 1.0 / static_cast<double>(samples.rows() * samples.cols());
}

double RegularizationMap::operator()(double e, double tau) const {
  // ||X - K (K + l I)^{-1} X||_F^2 = sum_i (l / (mu_i + l))^2 ||(U^T X)_i||^2
  const double lambda = e + tau;
  double acc = 0.0;
  for (Eigen::Index i = 0; i < eigenvalues_.size(); ++i) {
    const double shrink = lambda / (eigenvalues_[i] + lambda);
    acc += shrink * shrink * projected_mass_[i];
  }
  return scale_ * acc;
}

LambdaSolution solve_lambda_star(const Matrix& samples, const Matrix& kernel_matrix,
                                 std::vector<double>* iterates) {
  const double mass = samples.squaredNorm();
  require(mass > 0.0, ErrorCode::kZeroData, "samples have zero Frobenius norm");
  const double nN = static_cast<double>(samples.rows() * samples.cols());

  const RegularizationMap r(samples, kernel_matrix);
  LambdaSolution out;
  out.tau = 2.0 * mass / nN;

  double e = mass / (2.0 * nN);
  if (iterates) iterates->push_back(e);
  for (int it = 0; it < kFixedPointMaxIterations; ++it) {
    const double next = r(e, out.tau);
    if (std::abs(next - e) < kFixedPointTolerance) {
      out.e_hat = e;
      out.lambda_star = e + out.tau;
      out.iterations = it;
      return out;
    }
    e = next;
    if (iterates) iterates->push_back(e);
  }
  fail(ErrorCode::kNoConvergence, "regularization fixed point did not converge");
}

FoldingScore combine_folding(double displacement, double angle) {
  FoldingScore s;
  s.euclidean_part = -std::expm1(-displacement);
  s.cosine_part = angle / std::numbers::pi;
  s.total = std::sqrt(0.5 * (s.euclidean_part * s.euclidean_part +
                             s.cosine_part * s.cosine_part));
  return s;
}

KahmModel KahmModel::from_parts(Matrix reference, Matrix encoding, Matrix theta,
                                Matrix theta_inv, double lambda_star,
                                Matrix membership_coeffs) {
  const auto n = reference.rows();
  const auto dim = reference.cols();
  const auto n_low = encoding.rows();
  require(n >= 2, ErrorCode::kInvalidArgument, "model needs at least two reference samples");
  require(n_low >= 1 && n_low <= std::min<Eigen::Index>({kMaxEncodingDim, dim, n - 1}),
          ErrorCode::kInvalidArgument, "encoding dimension out of range");
  require(encoding.cols() == dim, ErrorCode::kInvalidArgument, "encoding width mismatch");
  require(theta.rows() == n_low && theta.cols() == n_low && theta_inv.rows() == n_low &&
              theta_inv.cols() == n_low,
          ErrorCode::kInvalidArgument, "covariance shape mismatch");
  require(membership_coeffs.rows() == n && membership_coeffs.cols() == n,
          ErrorCode::kInvalidArgument, "membership coefficient shape mismatch");
  require(lambda_star > 0.0 && std::isfinite(lambda_star), ErrorCode::kInvalidArgument,
          "lambda_star must be positive");
  require(reference.allFinite() && encoding.allFinite() && theta.allFinite() &&
              theta_inv.allFinite() && membership_coeffs.allFinite(),
          ErrorCode::kNonFiniteValue, "model contains non-finite values");
  require((theta - theta.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * (1.0 + theta.cwiseAbs().maxCoeff()),
          ErrorCode::kInvalidArgument, "covariance is not symmetric");
  require((membership_coeffs - membership_coeffs.transpose()).cwiseAbs().maxCoeff() <= 1e-8,
          ErrorCode::kInvalidArgument, "membership coefficients are not symmetric");

  KahmModel m;
  m.reference_ = std::move(reference);
  m.encoding_ = std::move(encoding);
  m.theta_ = std::move(theta);
  m.theta_inv_ = std::move(theta_inv);
  m.lambda_star_ = lambda_star;
  m.membership_coeffs_ = std::move(membership_coeffs);

  m.theta_chol_ = lower_cholesky(m.theta_);
  const Matrix projected = m.reference_ * m.encoding_.transpose();  // N x n_low
  m.whitened_reference_ =
      m.theta_chol_.triangularView<Eigen::Lower>().solve(projected.transpose()).transpose();
  return m;
}

Vector KahmModel::project(const Eigen::Ref<const Vector>& x) const {
  require(x.size() == reference_.cols(), ErrorCode::kInvalidArgument,
          "query dimension does not match model input dimension");
  return encoding_ * x;
}

Vector KahmModel::whiten(const Eigen::Ref<const Vector>& projected) const {
  return theta_chol_.triangularView<Eigen::Lower>().solve(projected);
}

double KahmModel::mahalanobis_sq(const Eigen::Ref<const Vector>& u,
                                 const Eigen::Ref<const Vector>& v) const {
  require(u.size() == n_low() && v.size() == n_low(), ErrorCode::kInvalidArgument,
          "kernel arguments must have the encoding dimension");
  return whiten(u - v).squaredNorm();
}

Matrix KahmModel::kernel_matrix() const {
  return whitened_kernel_matrix(whitened_reference_, n_low());
}

Matrix whitened_kernel_matrix(const Matrix& whitened, int n_low) {
  const auto n = whitened.rows();
  const double inv_bw = 1.0 / (2.0 * n_low);
  Matrix k(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    k(i, i) = 1.0;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double v = std::exp(-inv_bw * (whitened.row(i) - whitened.row(j)).squaredNorm());
      k(i, j) = v;
      k(j, i) = v;
    }
  }
  return k;
}

double gaussian_kernel(const Eigen::Ref<const Vector>& u, const Eigen::Ref<const Vector>& v,
                       const KahmModel& model) {
  return std::exp(-model.mahalanobis_sq(u, v) / (2.0 * model.n_low()));
}

KahmModel build_model(const Matrix& samples) {
  EncodingMatrix enc = compute_encoding_matrix(samples);
  const Matrix projected = samples * enc.rows.transpose();
  Matrix theta = projected_covariance(projected);

  const Matrix chol = lower_cholesky(theta);
  const Matrix whitened =
      chol.triangularView<Eigen::Lower>().solve(projected.transpose()).transpose();
  const Matrix kernel = whitened_kernel_matrix(whitened, enc.n_low);

  const LambdaSolution lam = solve_lambda_star(samples, kernel);

  const auto n = samples.rows();
  Matrix regularized = kernel;
  regularized.diagonal().array() += lam.lambda_star;
  Eigen::LLT<Matrix> llt(regularized);
  require(llt.info() == Eigen::Success, ErrorCode::kSingularCovariance,
          "regularized kernel matrix is not positive definite");
  Matrix coeffs = llt.solve(Matrix::Identity(n, n));
  coeffs = 0.5 * (coeffs + coeffs.transpose());

  Eigen::LLT<Matrix> theta_llt(theta);
  Matrix theta_inv = theta_llt.solve(Matrix::Identity(enc.n_low, enc.n_low));
  theta_inv = 0.5 * (theta_inv + theta_inv.transpose());

  return KahmModel::from_parts(samples, std::move(enc.rows), std::move(theta),
                               std::move(theta_inv), lam.lambda_star, std::move(coeffs));
}

KahmImage kahm_map(const KahmModel& model, const Eigen::Ref<const Vector>& x) {
  const Vector z = model.whiten(model.project(x));
  const auto n = model.sample_count();
  const double inv_bw = 1.0 / (2.0 * model.n_low());

  // Kernel values are rescaled by their maximum before mixing. The weights
  // are invariant to that common factor, and it keeps far-away queries from
  // underflowing every kernel value.
  Vector log_kernel(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    log_kernel[j] = -inv_bw * (model.whitened_reference_.row(j).transpose() - z).squaredNorm();
  }
  const Vector kernel = (log_kernel.array() - log_kernel.maxCoeff()).exp().matrix();

  const Vector h = model.membership_coeffs() * kernel;
  const double denom = h.sum();
  require(std::abs(denom) >= kDenominatorThreshold, ErrorCode::kUnstableDenominator,
          "membership scores sum to nearly zero");

  KahmImage image;
  image.weights = h / denom;
  image.point = model.reference().transpose() * image.weights;
  return image;
}

FoldingScore folding_measure(const KahmModel& model, const Eigen::Ref<const Vector>& x) {
  const KahmImage image = kahm_map(model, x);
  const double displacement = (x - image.point).norm();
  const double nx = x.norm();
  const double na = image.point.norm();
  double angle = std::numbers::pi;
  if (nx > 0.0 && na > 0.0) {
    const double c = std::clamp(image.point.dot(x) / (na * nx), -1.0, 1.0);
    angle = std::acos(c);
  }
  return combine_folding(displacement, angle);
}

}  // namespace kahm
