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

#pragma once

// Per-cluster Kernel Affine Hull Machine (KAHM).
//
// A KAHM built from reference samples x^1..x^N maps any point x onto the
// affine hull of those samples:
//
//     A(x) = sum_i w_i(x) x^i,    w_i = h_i / sum_j h_j,
//
// where h_i is a kernel-RLS membership score computed in a low-dimensional
// PCA encoding of the samples. Models are immutable once built and every
// const member is safe to call concurrently.

#include "kahm/common.hpp"

#include <vector>

namespace kahm {

// Range cutoff below which a projected coordinate is considered collapsed.
inline constexpr double kProjectedRangeCutoff = 1e-3;
inline constexpr int kMaxEncodingDim = 20;
inline constexpr double kFixedPointTolerance = 1e-12;
inline constexpr int kFixedPointMaxIterations = 10000;
inline constexpr double kDenominatorThreshold = 1e-12;

struct EncodingMatrix {
  Matrix rows;  // n_low x n, unit-norm principal directions
  int n_low = 0;
};

// Top principal directions of the sample covariance; the dimension starts at
// min(20, n, N-1) and shrinks while any projected coordinate has a range
// below kProjectedRangeCutoff.
EncodingMatrix compute_encoding_matrix(const Matrix& samples);

// Sample covariance (divisor N-1) of projected samples, repaired once with
// diagonal jitter when it is not numerically positive definite.
Matrix projected_covariance(const Matrix& projected);

// r(e, tau) for the regularization fixed point, evaluated through the
// eigendecomposition of the kernel matrix.
class RegularizationMap {
 public:
  RegularizationMap(const Matrix& samples, const Matrix& kernel_matrix);

  double operator()(double e, double tau) const;

 private:
  Vector eigenvalues_;
  Vector projected_mass_;  // squared row norms of U^T X
  double scale_ = 0.0;     // 1 / (nN)
};

struct LambdaSolution {
  double lambda_star = 0.0;
  double e_hat = 0.0;
  double tau = 0.0;
  int iterations = 0;
};

// Fixed-point iteration e <- r(e, tau) started at (1/(2nN))||X||_F^2.
// When `iterates` is non-null every visited e (including the start) is
// appended to it.
LambdaSolution solve_lambda_star(const Matrix& samples, const Matrix& kernel_matrix,
                                 std::vector<double>* iterates = nullptr);

struct FoldingScore {
  double total = 0.0;
  double euclidean_part = 0.0;
  double cosine_part = 0.0;
};

// Combines a displacement norm and an angle in [0, pi] into a FoldingScore.
FoldingScore combine_folding(double displacement, double angle);

struct KahmImage {
  Vector point;    // A(x), length n
  Vector weights;  // normalized membership weights, length N
};

class KahmModel {
 public:
  // Validates the stored invariants and derives the whitening caches.
  // Used both by build_model and by the registry loader.
  static KahmModel from_parts(Matrix reference, Matrix encoding, Matrix theta,
                              Matrix theta_inv, double lambda_star,
                              Matrix membership_coeffs);

  const Matrix& reference() const noexcept { return reference_; }
  const Matrix& encoding() const noexcept { return encoding_; }
  const Matrix& theta() const noexcept { return theta_; }
  const Matrix& theta_inv() const noexcept { return theta_inv_; }
  double lambda_star() const noexcept { return lambda_star_; }
  const Matrix& membership_coeffs() const noexcept { return membership_coeffs_; }

  int n_low() const noexcept { return static_cast<int>(encoding_.rows()); }
  int input_dim() const noexcept { return static_cast<int>(reference_.cols()); }
  int sample_count() const noexcept { return static_cast<int>(reference_.rows()); }

  Vector project(const Eigen::Ref<const Vector>& x) const;

  // Quadratic form (u - v)^T theta^{-1} (u - v) over projected vectors.
  double mahalanobis_sq(const Eigen::Ref<const Vector>& u,
                        const Eigen::Ref<const Vector>& v) const;

  Matrix kernel_matrix() const;

 private:
  KahmModel() = default;

  Vector whiten(const Eigen::Ref<const Vector>& projected) const;

  Matrix reference_;
  Matrix encoding_;
  Matrix theta_;
  Matrix theta_inv_;
  double lambda_star_ = 0.0;
  Matrix membership_coeffs_;

  Matrix theta_chol_;         // lower Cholesky factor of theta
  Matrix whitened_reference_; // N x n_low, L^{-1} P x^i per row

  friend KahmImage kahm_map(const KahmModel&, const Eigen::Ref<const Vector>&);
};

double gaussian_kernel(const Eigen::Ref<const Vector>& u, const Eigen::Ref<const Vector>& v,
                       const KahmModel& model);

// Kernel matrix of whitened projected samples (rows), bandwidth 2 * n_low.
Matrix whitened_kernel_matrix(const Matrix& whitened, int n_low);

KahmModel build_model(const Matrix& samples);

KahmImage kahm_map(const KahmModel& model, const Eigen::Ref<const Vector>& x);

FoldingScore folding_measure(const KahmModel& model, const Eigen::Ref<const Vector>& x);

}  // namespace kahm
