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

#include "kahm/cluster_model.hpp"

#include "kahm/random.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

namespace kahm {

std::vector<double> default_omega_grid() {
  return {5, 8, 10, 11, 12, 13, 14, 15, 16, 17, 18, 19, 20};
}

std::vector<int> default_k_grid() {
  return {2, 5, 8, 10, 11, 12, 13, 14, 15, 16, 17, 18, 19, 20, 25, 50, 75, 100, 125, 150, 175, 200};
}

void TrainConfig::validate() const {
  require(n_clusters >= 1, ErrorCode::kInvalidArgument, "n_clusters must be at least 1");
  require(validation_fraction > 0.0 && validation_fraction < 0.5, ErrorCode::kInvalidArgument,
          "validation_fraction must lie in (0, 0.5)");
  require(nlms_step > 0.0 && nlms_step < 1.0, ErrorCode::kInvalidArgument,
          "nlms_step must lie in (0, 1)");
  require(nlms_epochs >= 0, ErrorCode::kInvalidArgument, "nlms_epochs must be non-negative");
  require(!omega_grid.empty() && !k_grid.empty(), ErrorCode::kInvalidArgument,
          "hyperparameter grids must be nonempty");
  for (double w : omega_grid) {
    require(std::isfinite(w) && w > 1.0, ErrorCode::kInvalidArgument, "omega values must exceed 1");
  }
  for (int k : k_grid) require(k >= 1, ErrorCode::kInvalidArgument, "K values must be positive");
}

int ClusterSet::input_dim() const noexcept {
  return cluster_models.empty() ? 0 : cluster_models.front().input_dim();
}

void ClusterSet::validate() const {
  const int c = cluster_count();
  require(c >= 1, ErrorCode::kInvalidArgument, "cluster set needs at least one cluster");
  require(prototypes.rows() == c, ErrorCode::kInvalidArgument,
          "prototype rows must match cluster count");
  require(prototypes.cols() >= 1 && prototypes.allFinite(), ErrorCode::kInvalidArgument,
          "prototypes must be finite and nonempty");
  require(omega > 1.0 && std::isfinite(omega), ErrorCode::kInvalidArgument, "omega must exceed 1");
  require(k_trunc >= 1 && k_trunc <= c, ErrorCode::kInvalidArgument, "K must lie in [1, C]");
  for (const auto& m : cluster_models) {
    require(m.input_dim() == input_dim(), ErrorCode::kInvalidArgument,
            "cluster models disagree on input dimension");
  }
}

namespace {

// Nearest centroid; ties go to the lower centroid index.
int nearest_centroid(const Matrix& centroids, const Eigen::Ref<const Eigen::RowVectorXd>& p,
                     double* dist_sq = nullptr) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (Eigen::Index c = 0; c < centroids.rows(); ++c) {
    const double d = (centroids.row(c) - p).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(c);
    }
  }
  if (dist_sq) *dist_sq = best_d;
  return best;
}

Matrix cluster_means(const Matrix& points, const std::vector<int>& assignments, int clusters) {
  Matrix sums = Matrix::Zero(clusters, points.cols());
  std::vector<int> counts(clusters, 0);
  for (std::size_t i = 0; i < assignments.size(); ++i) {
    sums.row(assignments[i]) += points.row(static_cast<Eigen::Index>(i));
    ++counts[assignments[i]];
  }
  for (int c = 0; c < clusters; ++c) {
    if (counts[c] > 0) sums.row(c) /= static_cast<double>(counts[c]);
  }
  return sums;
}

void repair_empty_clusters(const Matrix& points, const Matrix& centroids,
                           std::vector<int>& assignments, int clusters) {
  std::vector<int> counts(clusters, 0);
  for (int a : assignments) ++counts[a];
  for (int c = 0; c < clusters; ++c) {
    if (counts[c] > 0) continue;
    int far = -1;
    double far_d = -1.0;
    for (std::size_t i = 0; i < assignments.size(); ++i) {
      const int own = assignments[i];
      if (counts[own] <= 1) continue;
      const double d =
          (points.row(static_cast<Eigen::Index>(i)) - centroids.row(own)).squaredNorm();
      if (d > far_d) {
        far_d = d;
        far = static_cast<int>(i);
      }
    }
    // N >= C guarantees a donor cluster with at least two members.
    --counts[assignments[far]];
    assignments[far] = c;
    ++counts[c];
  }
}

Matrix kmeanspp_seed(const Matrix& points, int clusters, Rng& rng) {
  const auto n = points.rows();
  Matrix centroids(clusters, points.cols());
  centroids.row(0) = points.row(static_cast<Eigen::Index>(rng.uniform_index(n)));
  Eigen::VectorXd d2 = (points.rowwise() - centroids.row(0)).rowwise().squaredNorm();
  for (int c = 1; c < clusters; ++c) {
    const double total = d2.sum();
    Eigen::Index pick = 0;
    if (total <= 0.0) {
      pick = static_cast<Eigen::Index>(rng.uniform_index(n));
    } else {
      const double u = rng.uniform01() * total;
      double acc = 0.0;
      pick = n - 1;
      for (Eigen::Index i = 0; i < n; ++i) {
        acc += d2[i];
        if (u < acc && d2[i] > 0.0) {
          pick = i;
          break;
        }
      }
      while (d2[pick] <= 0.0 && pick > 0) --pick;
    }
    centroids.row(c) = points.row(pick);
    d2 = d2.cwiseMin((points.rowwise() - centroids.row(c)).rowwise().squaredNorm());
  }
  return centroids;
}

}  // namespace

KMeansResult kmeans_clusters(const Matrix& points, int clusters, std::uint64_t seed) {
  require(clusters >= 1, ErrorCode::kInvalidArgument, "cluster count must be positive");
  require(points.rows() >= clusters, ErrorCode::kTooFewSamples,
          "k-means needs at least as many samples as clusters (" +
              std::to_string(points.rows()) + " < " + std::to_string(clusters) + ")");
  require(points.allFinite(), ErrorCode::kNonFiniteValue, "k-means input is not finite");

  Rng rng(seed, 0x6b6d65616e73ULL);
  Matrix centroids = kmeanspp_seed(points, clusters, rng);
  const auto n = points.rows();
  std::vector<int> assignments(static_cast<std::size_t>(n), -1);

  constexpr int kMaxIterations = 100;
  for (int iter = 0; iter < kMaxIterations; ++iter) {
    std::vector<int> next(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
      next[static_cast<std::size_t>(i)] = nearest_centroid(centroids, points.row(i));
    }
    repair_empty_clusters(points, centroids, next, clusters);
    centroids = cluster_means(points, next, clusters);
    const bool stable = next == assignments;
    assignments = std::move(next);
    if (stable) break;
  }
  return {std::move(assignments), std::move(centroids)};
}

AugmentedSamples augment_singletons(const Matrix& lexical, const Matrix& semantic,
                                    std::span<const int> assignments, int clusters) {
  const auto n = lexical.rows();
  require(semantic.rows() == n && static_cast<Eigen::Index>(assignments.size()) == n,
          ErrorCode::kInvalidArgument, "lexical, semantic and assignments must align");
  std::vector<int> counts(clusters, 0);
  for (int a : assignments) {
    require(a >= 0 && a < clusters, ErrorCode::kInvalidArgument, "assignment out of range");
    ++counts[a];
  }

  std::vector<int> singleton_rows;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (counts[assignments[static_cast<std::size_t>(i)]] == 1) {
      singleton_rows.push_back(static_cast<int>(i));
    }
  }

  AugmentedSamples out;
  out.original_rows = static_cast<int>(n);
  out.assignments.assign(assignments.begin(), assignments.end());
  if (singleton_rows.empty()) {
    out.lexical = lexical;
    out.semantic = semantic;
    return out;
  }
  require(n >= 2, ErrorCode::kNoNeighbor, "a single training sample has no neighbor");

  const auto extra = static_cast<Eigen::Index>(singleton_rows.size());
  out.lexical.resize(n + extra, lexical.cols());
  out.semantic.resize(n + extra, semantic.cols());
  out.lexical.topRows(n) = lexical;
  out.semantic.topRows(n) = semantic;

  Eigen::Index row = n;
  for (int s : singleton_rows) {
    Eigen::Index nearest = -1;
    double best = std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j == s) continue;
      const double d = (lexical.row(j) - lexical.row(s)).squaredNorm();
      if (d < best) {
        best = d;
        nearest = j;
      }
    }
    Eigen::RowVectorXd aux = 0.9 * lexical.row(s) + 0.1 * lexical.row(nearest);
    const double target_norm = lexical.row(s).norm();
    const double aux_norm = aux.norm();
    if (aux_norm > 0.0) aux *= target_norm / aux_norm;
    out.lexical.row(row) = aux;
    out.semantic.row(row) = semantic.row(s);
    out.assignments.push_back(assignments[static_cast<std::size_t>(s)]);
    ++row;
  }
  return out;
}

std::vector<double> folding_totals(const Eigen::Ref<const Vector>& x,
                                   std::span<const KahmModel> models) {
  std::vector<double> totals;
  totals.reserve(models.size());
  for (const auto& m : models) totals.push_back(folding_measure(m, x).total);
  return totals;
}

std::vector<int> ordered_k_min(std::span<const double> totals, int k) {
  const int c = static_cast<int>(totals.size());
  require(k >= 1 && k <= c, ErrorCode::kInvalidArgument, "K must lie in [1, C]");
  std::vector<int> idx(static_cast<std::size_t>(c));
  std::iota(idx.begin(), idx.end(), 0);
  std::partial_sort(idx.begin(), idx.begin() + k, idx.end(), [&](int a, int b) {
    if (totals[a] != totals[b]) return totals[a] < totals[b];
    return a < b;
  });
  idx.resize(static_cast<std::size_t>(k));
  return idx;
}

Vector feature_map_from_totals(std::span<const double> totals, double omega, int k) {
  const std::vector<int> selected = ordered_k_min(totals, k);
  Vector phi = Vector::Zero(static_cast<Eigen::Index>(totals.size()));
  double sum = 0.0;
  for (int c : selected) {
    const double v = std::pow(1.0 - totals[c], omega);
    phi[c] = v;
    sum += v;
  }
  if (!(sum > 0.0) || !std::isfinite(sum)) {
    // Every selected weight underflowed; fall back to uniform over J_K.
    for (int c : selected) phi[c] = 1.0 / k;
    return phi;
  }
  for (int c : selected) phi[c] /= sum;
  return phi;
}

Vector feature_map(const Eigen::Ref<const Vector>& x, const ClusterSet& set) {
  const auto totals = folding_totals(x, set.cluster_models);
  return feature_map_from_totals(totals, set.omega, set.k_trunc);
}

Vector predict_embedding(const Eigen::Ref<const Vector>& x, const ClusterSet& set) {
  return set.prototypes.transpose() * feature_map(x, set);
}

Matrix nlms_update(Matrix prototypes, const Matrix& features, const Matrix& targets, double step,
                   int epochs) {
  require(step > 0.0 && step < 1.0, ErrorCode::kInvalidArgument, "NLMS step must lie in (0, 1)");
  require(features.rows() == targets.rows() && features.rows() > 0, ErrorCode::kInvalidArgument,
          "NLMS needs a nonempty aligned sample set");
  require(features.cols() == prototypes.rows() && targets.cols() == prototypes.cols(),
          ErrorCode::kInvalidArgument, "NLMS shape mismatch");

  std::vector<std::vector<Eigen::Index>> support(static_cast<std::size_t>(features.rows()));
  for (Eigen::Index i = 0; i < features.rows(); ++i) {
    for (Eigen::Index c = 0; c < features.cols(); ++c) {
      if (features(i, c) != 0.0) support[static_cast<std::size_t>(i)].push_back(c);
    }
  }

  Eigen::RowVectorXd error(prototypes.cols());
  for (int epoch = 0; epoch < epochs; ++epoch) {
    for (Eigen::Index i = 0; i < features.rows(); ++i) {
      const auto& nz = support[static_cast<std::size_t>(i)];
      error = targets.row(i);
      double g2 = 0.0;
      for (Eigen::Index c : nz) {
        error -= features(i, c) * prototypes.row(c);
        g2 += features(i, c) * features(i, c);
      }
      const double gain = step / (1.0 + step * g2);
      for (Eigen::Index c : nz) prototypes.row(c) += (gain * features(i, c)) * error;
    }
  }
  return prototypes;
}

Matrix nlms_refine(const ClusterSet& set, const Matrix& lexical, const Matrix& semantic,
                   double step, int epochs) {
  require(lexical.rows() == semantic.rows(), ErrorCode::kInvalidArgument,
          "lexical and semantic rows must align");
  Matrix features(lexical.rows(), set.cluster_count());
  for (Eigen::Index i = 0; i < lexical.rows(); ++i) {
    features.row(i) = feature_map(lexical.row(i).transpose(), set).transpose();
  }
  return nlms_update(set.prototypes, features, semantic, step, epochs);
}

double mean_squared_error(const Matrix& predicted, const Matrix& targets) {
  require(predicted.rows() == targets.rows() && predicted.cols() == targets.cols(),
          ErrorCode::kInvalidArgument, "MSE shape mismatch");
  if (predicted.size() == 0) return 0.0;
  return (predicted - targets).squaredNorm() / static_cast<double>(predicted.size());
}

HoldoutSplit holdout_split(int rows, double validation_fraction, std::uint64_t seed) {
  require(rows >= 2, ErrorCode::kTooFewSamples, "holdout split needs at least two rows");
  const int n_val = std::clamp(static_cast<int>(std::llround(validation_fraction * rows)), 1,
                               rows - 1);
  std::vector<int> perm(static_cast<std::size_t>(rows));
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(seed, 0x73706c6974ULL);
  for (int i = rows - 1; i > 0; --i) {
    const auto j = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(i) + 1));
    std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)]);
  }
  HoldoutSplit split;
  split.validation.assign(perm.begin(), perm.begin() + n_val);
  split.core.assign(perm.begin() + n_val, perm.end());
  std::sort(split.validation.begin(), split.validation.end());
  std::sort(split.core.begin(), split.core.end());
  return split;
}

GridChoice select_hyperparameters(const Matrix& totals, const Matrix& targets,
                                  const Matrix& prototypes, std::span<const double> omega_grid,
                                  std::span<const int> k_grid) {
  const int c = static_cast<int>(prototypes.rows());
  require(totals.cols() == c && totals.rows() == targets.rows() && totals.rows() > 0,
          ErrorCode::kInvalidArgument, "grid search shape mismatch");

  const std::set<double> omegas(omega_grid.begin(), omega_grid.end());
  std::set<int> ks;
  for (int k : k_grid) ks.insert(std::min(k, c));

  GridChoice best;
  best.mse = std::numeric_limits<double>::infinity();
  Matrix predicted(targets.rows(), targets.cols());
  for (double omega : omegas) {
    for (int k : ks) {
      for (Eigen::Index i = 0; i < totals.rows(); ++i) {
        const Eigen::RowVectorXd row = totals.row(i);
        const Vector phi =
            feature_map_from_totals(std::span<const double>(row.data(), row.size()), omega, k);
        predicted.row(i) = (prototypes.transpose() * phi).transpose();
      }
      const double mse = mean_squared_error(predicted, targets);
      if (mse < best.mse) best = GridChoice{omega, k, mse};
    }
  }
  return best;
}

namespace {

Matrix gather_rows(const Matrix& m, std::span<const int> rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = m.row(rows[i]);
  }
  return out;
}

}  // namespace

TrainedEncoder train_law_encoder(const Matrix& lexical, const Matrix& semantic,
                                 const TrainConfig& config) {
  config.validate();
  require(lexical.rows() == semantic.rows(), ErrorCode::kInvalidArgument,
          "lexical and semantic row counts differ");
  require(lexical.allFinite() && semantic.allFinite(), ErrorCode::kNonFiniteValue,
          "training data contains non-finite values");
  const int n = static_cast<int>(lexical.rows());
  const int clusters = config.n_clusters;
  require(n >= 2, ErrorCode::kTooFewSamples, "training needs at least two samples");

  const HoldoutSplit split = holdout_split(n, config.validation_fraction, config.seed);
  require(static_cast<int>(split.core.size()) >= std::max(2, clusters), ErrorCode::kTooFewSamples,
          "core training set has " + std::to_string(split.core.size()) +
              " samples, fewer than the " + std::to_string(clusters) + " requested clusters");

  const Matrix core_lex = gather_rows(lexical, split.core);
  const Matrix core_sem = gather_rows(semantic, split.core);

  const KMeansResult km = kmeans_clusters(core_sem, clusters, config.seed);
  const AugmentedSamples aug = augment_singletons(core_lex, core_sem, km.assignments, clusters);

  TrainedEncoder out;
  ClusterSet& set = out.set;
  set.assignments = aug.assignments;
  set.cluster_models.reserve(static_cast<std::size_t>(clusters));
  for (int c = 0; c < clusters; ++c) {
    std::vector<int> members;
    for (std::size_t i = 0; i < aug.assignments.size(); ++i) {
      if (aug.assignments[i] == c) members.push_back(static_cast<int>(i));
    }
    set.cluster_models.push_back(build_model(gather_rows(aug.lexical, members)));
  }
  set.prototypes = km.centroids;

  // Folding totals per sample depend only on the cluster KAHMs; compute once
  // and reuse for the grid search and the NLMS features.
  Matrix totals(n, clusters);
  for (int i = 0; i < n; ++i) {
    const auto t = folding_totals(lexical.row(i).transpose(), set.cluster_models);
    totals.row(i) = Eigen::Map<const Eigen::RowVectorXd>(t.data(), clusters);
  }

  const GridChoice choice =
      select_hyperparameters(gather_rows(totals, split.validation),
                             gather_rows(semantic, split.validation), set.prototypes,
                             config.omega_grid, config.k_grid);
  set.omega = choice.omega;
  set.k_trunc = choice.k_trunc;

  // Union of core and validation rows is every original row, in index order.
  Matrix features(n, clusters);
  for (int i = 0; i < n; ++i) {
    const Eigen::RowVectorXd row = totals.row(i);
    features.row(i) = feature_map_from_totals(std::span<const double>(row.data(), row.size()),
                                              set.omega, set.k_trunc)
                          .transpose();
  }
  const Matrix before = features * set.prototypes;
  set.prototypes = nlms_update(set.prototypes, features, semantic, config.nlms_step,
                               config.nlms_epochs);
  const Matrix after = features * set.prototypes;
  set.validate();

  TrainSummary& s = out.summary;
  s.omega = choice.omega;
  s.k_trunc = choice.k_trunc;
  s.validation_mse = choice.mse;
  s.train_mse_before = mean_squared_error(before, semantic);
  s.train_mse_after = mean_squared_error(after, semantic);
  s.core_rows = static_cast<int>(split.core.size());
  s.validation_rows = static_cast<int>(split.validation.size());
  s.auxiliary_rows = static_cast<int>(aug.assignments.size()) - aug.original_rows;
  return out;
}

}  // namespace kahm
