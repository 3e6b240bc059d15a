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

// One domain's encoder: semantic K-means clusters, a KAHM per cluster over
// the clusters' lexical samples, and a prototype matrix mixed by the
// KAHM-induced feature map
//
//     Phi_c(x) = (1 - T_c(x))^omega / sum_{k in J_K(x)} (1 - T_k(x))^omega
//
// over the K clusters with the smallest folding totals T.

#include "kahm/common.hpp"
#include "kahm/geometry.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace kahm {

std::vector<double> default_omega_grid();
std::vector<int> default_k_grid();

struct TrainConfig {
  int n_clusters = 300;
  double validation_fraction = 0.05;
  std::vector<double> omega_grid = default_omega_grid();
  std::vector<int> k_grid = default_k_grid();
  double nlms_step = 0.1;
  int nlms_epochs = 20;
  std::uint64_t seed = 0;

  void validate() const;
};

struct ClusterSet {
  std::vector<int> assignments;  // cluster of each (augmented) training sample
  std::vector<KahmModel> cluster_models;
  Matrix prototypes;  // C x p
  double omega = 0.0;
  int k_trunc = 0;

  int cluster_count() const noexcept { return static_cast<int>(cluster_models.size()); }
  int input_dim() const noexcept;
  int output_dim() const noexcept { return static_cast<int>(prototypes.cols()); }

  void validate() const;
};

struct KMeansResult {
  std::vector<int> assignments;
  Matrix centroids;
};

// k-means++ seeding followed by Lloyd iterations (at most 100, stopping when
// assignments are stable). Empty clusters take the point farthest from its
// own centroid.
KMeansResult kmeans_clusters(const Matrix& points, int clusters, std::uint64_t seed);

struct AugmentedSamples {
  Matrix lexical;
  Matrix semantic;
  std::vector<int> assignments;
  int original_rows = 0;  // rows past this index are auxiliary points
};

AugmentedSamples augment_singletons(const Matrix& lexical, const Matrix& semantic,
                                    std::span<const int> assignments, int clusters);

std::vector<double> folding_totals(const Eigen::Ref<const Vector>& x,
                                   std::span<const KahmModel> models);

// Indices of the k smallest totals in non-decreasing order; ties go to the
// lower index.
std::vector<int> ordered_k_min(std::span<const double> totals, int k);

Vector feature_map_from_totals(std::span<const double> totals, double omega, int k);

Vector feature_map(const Eigen::Ref<const Vector>& x, const ClusterSet& set);

Vector predict_embedding(const Eigen::Ref<const Vector>& x, const ClusterSet& set);

// Matrix-form NLMS over rows of `features` (N x C) and `targets` (N x p),
// visiting samples in index order each epoch.
Matrix nlms_update(Matrix prototypes, const Matrix& features, const Matrix& targets,
                   double step, int epochs);

Matrix nlms_refine(const ClusterSet& set, const Matrix& lexical, const Matrix& semantic,
                   double step, int epochs);

struct TrainSummary {
  double omega = 0.0;
  int k_trunc = 0;
  double validation_mse = 0.0;
  double train_mse_before = 0.0;  // union samples, centroid prototypes
  double train_mse_after = 0.0;   // union samples, refined prototypes
  int core_rows = 0;
  int validation_rows = 0;
  int auxiliary_rows = 0;
};

struct TrainedEncoder {
  ClusterSet set;
  TrainSummary summary;
};

struct HoldoutSplit {
  std::vector<int> core;        // ascending
  std::vector<int> validation;  // ascending
};

HoldoutSplit holdout_split(int rows, double validation_fraction, std::uint64_t seed);

struct GridChoice {
  double omega = 0.0;
  int k_trunc = 0;
  double mse = 0.0;
};

// Exhaustive (omega, K) search by validation MSE. `totals` holds one row of
// folding totals per validation sample. Ties prefer smaller omega, then
// smaller K.
GridChoice select_hyperparameters(const Matrix& totals, const Matrix& targets,
                                  const Matrix& prototypes, std::span<const double> omega_grid,
                                  std::span<const int> k_grid);

TrainedEncoder train_law_encoder(const Matrix& lexical, const Matrix& semantic,
                                 const TrainConfig& config);

double mean_squared_error(const Matrix& predicted, const Matrix& targets);

}  // namespace kahm
