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

// Independent reference computations for the tests. They avoid the
// library's numerical shortcuts and recompute each quantity from its
// defining formula.

#include "kahm/cluster_model.hpp"
#include "kahm/eval.hpp"
#include "kahm/geometry.hpp"
#include "kahm/index.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <string>
#include <vector>

namespace oracle {

using kahm::Matrix;
using kahm::Vector;

inline Matrix random_matrix(std::mt19937_64& gen, int rows, int cols, double scale = 1.0) {
  std::normal_distribution<double> nd(0.0, scale);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = nd(gen);
  return m;
}

inline int uniform_int(std::mt19937_64& gen, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(gen);
}

// Kernel matrix from the defining formula with an explicit theta inverse.
inline Matrix kernel_matrix_direct(const kahm::KahmModel& m) {
  const int n = m.sample_count();
  const Matrix proj = m.reference() * m.encoding().transpose();
  Matrix k(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const Vector d = (proj.row(i) - proj.row(j)).transpose();
      k(i, j) = std::exp(-d.dot(m.theta_inv() * d) / (2.0 * m.n_low()));
    }
  }
  return k;
}

// r(e, tau) = (1/(nN)) sum_j ||X_j - K (K + (e + tau) I)^{-1} X_j||^2 over
// columns X_j, with one LDLT solve per evaluation.
inline double residual_direct(const Matrix& x, const Matrix& k, double e, double tau) {
  const auto n_rows = x.rows();
  const Matrix reg = k + (e + tau) * Matrix::Identity(n_rows, n_rows);
  const Matrix sol = reg.ldlt().solve(Matrix(x));
  const Matrix resid = x - k * sol;
  return resid.squaredNorm() / static_cast<double>(x.rows() * x.cols());
}

struct DirectImage {
  Vector point;
  Vector weights;
  Vector h;
};

// h = M kappa; w = h / sum(h). With `shift` every exponent is offset by the
// largest one, which cancels in w but keeps far queries from underflowing.
inline DirectImage kahm_map_direct(const kahm::KahmModel& m, const Vector& x, bool shift = false) {
  const Vector px = m.encoding() * x;
  const Matrix proj = m.reference() * m.encoding().transpose();
  Vector expo(m.sample_count());
  for (int j = 0; j < m.sample_count(); ++j) {
    const Vector d = px - proj.row(j).transpose();
    expo[j] = -d.dot(m.theta_inv() * d) / (2.0 * m.n_low());
  }
  const Vector kappa = (expo.array() - (shift ? expo.maxCoeff() : 0.0)).exp().matrix();
  DirectImage out;
  out.h = m.membership_coeffs() * kappa;
  out.weights = out.h / out.h.sum();
  out.point = m.reference().transpose() * out.weights;
  return out;
}

inline double folding_total_direct(const Vector& x, const Vector& ax) {
  const double euc = 1.0 - std::exp(-(x - ax).norm());
  double cosine = 1.0;
  if (x.norm() > 0.0 && ax.norm() > 0.0) {
    double c = ax.dot(x) / (ax.norm() * x.norm());
    c = std::max(-1.0, std::min(1.0, c));
    cosine = std::acos(c) / M_PI;
  }
  return std::sqrt(0.5 * (euc * euc + cosine * cosine));
}

// Residual of the least-squares projection of (a - x^1) onto span{x^i - x^1}.
inline double affine_hull_residual(const Matrix& reference, const Vector& a) {
  const Vector base = reference.row(0).transpose();
  if (reference.rows() == 1) return (a - base).norm();
  Matrix span = (reference.bottomRows(reference.rows() - 1).rowwise() - base.transpose()).transpose();
  const Vector target = a - base;
  const Vector coef = span.completeOrthogonalDecomposition().solve(target);
  return (span * coef - target).norm();
}

// ---- metrics, recomputed by plain counting ----------------------------

inline int naive_hit(const kahm::QueryResult& r, std::size_t k) {
  for (std::size_t i = 0; i < k; ++i) {
    if (r.ranked_labels[i] == r.gold_label) return 1;
  }
  return 0;
}

inline int naive_top1(const kahm::QueryResult& r) {
  return r.ranked_labels[0] == r.gold_label ? 1 : 0;
}

// Rank of the gold label = 1 + number of distinct labels whose first
// occurrence precedes the gold's first occurrence.
inline double naive_mrr(const kahm::QueryResult& r, std::size_t k) {
  std::size_t first_gold = k;
  for (std::size_t i = 0; i < k; ++i) {
    if (r.ranked_labels[i] == r.gold_label) {
      first_gold = i;
      break;
    }
  }
  if (first_gold == k) return 0.0;
  std::set<std::string> before(r.ranked_labels.begin(),
                               r.ranked_labels.begin() + static_cast<std::ptrdiff_t>(first_gold));
  return 1.0 / static_cast<double>(before.size() + 1);
}

struct NaiveConsensus {
  int majacc;
  double consfrac;
  double lift;
};

inline NaiveConsensus naive_consensus(const kahm::QueryResult& r, std::size_t k, double tau,
                                      const std::map<std::string, double>& prior) {
  std::map<std::string, int> count;
  std::map<std::string, std::size_t> first;
  for (std::size_t i = 0; i < k; ++i) {
    ++count[r.ranked_labels[i]];
    first.emplace(r.ranked_labels[i], i);
  }
  std::string best;
  int best_count = -1;
  std::size_t best_first = k;
  for (const auto& [label, c] : count) {
    if (c > best_count || (c == best_count && first[label] < best_first)) {
      best = label;
      best_count = c;
      best_first = first[label];
    }
  }
  const double kd = static_cast<double>(k);
  const int gold = count.count(r.gold_label) ? count[r.gold_label] : 0;
  NaiveConsensus out;
  out.majacc = (best == r.gold_label && best_count / kd >= tau) ? 1 : 0;
  out.consfrac = gold / kd;
  out.lift = out.consfrac / prior.at(r.gold_label);
  return out;
}

// ---- feature map by full sort --------------------------------------------

// Sorts (total, index) pairs, then normalizes
// (1 - T)^omega over the first k.
inline Vector feature_map_direct(const std::vector<double>& totals, double omega, int k) {
  std::vector<std::pair<double, int>> order;
  for (std::size_t c = 0; c < totals.size(); ++c) order.emplace_back(totals[c], static_cast<int>(c));
  std::sort(order.begin(), order.end());
  Vector phi = Vector::Zero(static_cast<Eigen::Index>(totals.size()));
  double sum = 0.0;
  for (int i = 0; i < k; ++i) {
    phi[order[static_cast<std::size_t>(i)].second] = std::pow(1.0 - order[static_cast<std::size_t>(i)].first, omega);
    sum += phi[order[static_cast<std::size_t>(i)].second];
  }
  return phi / sum;
}

// ---- NLMS as p independent scalar recursions ---------------------------

// For output coordinate j the scalar recursion updates the column
// w_j in R^C by w_j += beta / (1 + beta ||g||^2) * g * (v_j - g . w_j).
inline Matrix nlms_scalar(Matrix prototypes, const Matrix& features, const Matrix& targets,
                          double beta, int epochs) {
  for (int ep = 0; ep < epochs; ++ep) {
    for (Eigen::Index i = 0; i < features.rows(); ++i) {
      const Vector g = features.row(i).transpose();
      const double gain = beta / (1.0 + beta * g.squaredNorm());
      for (Eigen::Index j = 0; j < prototypes.cols(); ++j) {
        double pred = 0.0;
        for (Eigen::Index c = 0; c < g.size(); ++c) pred += g[c] * prototypes(c, j);
        const double err = targets(i, j) - pred;
        for (Eigen::Index c = 0; c < g.size(); ++c) prototypes(c, j) += gain * g[c] * err;
      }
    }
  }
  return prototypes;
}

// ---- retrieval -----------------------------------------------------------

// Full scoring of unit-norm rows then a stable sort on descending score.
inline std::vector<std::size_t> brute_search(const Matrix& corpus, const Vector& q, std::size_t k) {
  std::vector<std::pair<double, std::size_t>> scored;
  const Vector qn = q / q.norm();
  for (Eigen::Index i = 0; i < corpus.rows(); ++i) {
    scored.emplace_back(corpus.row(i).dot(qn), static_cast<std::size_t>(i));
  }
  std::stable_sort(scored.begin(), scored.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < k; ++i) out.push_back(scored[i].second);
  return out;
}

// ---- clustering ----------------------------------------------------------

inline double sse(const Matrix& pts, const std::vector<int>& assign, int clusters) {
  double total = 0.0;
  for (int c = 0; c < clusters; ++c) {
    Vector mean = Vector::Zero(pts.cols());
    int n = 0;
    for (Eigen::Index i = 0; i < pts.rows(); ++i) {
      if (assign[static_cast<std::size_t>(i)] == c) {
        mean += pts.row(i).transpose();
        ++n;
      }
    }
    if (n == 0) continue;
    mean /= n;
    for (Eigen::Index i = 0; i < pts.rows(); ++i) {
      if (assign[static_cast<std::size_t>(i)] == c) total += (pts.row(i).transpose() - mean).squaredNorm();
    }
  }
  return total;
}

// Minimum within-cluster SSE over every bipartition into nonempty halves.
inline double best_bipartition_sse(const Matrix& pts) {
  const auto n = static_cast<int>(pts.rows());
  double best = std::numeric_limits<double>::infinity();
  for (unsigned mask = 1; mask + 1 < (1u << n); ++mask) {
    std::vector<int> assign(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) assign[static_cast<std::size_t>(i)] = (mask >> i) & 1u;
    best = std::min(best, sse(pts, assign, 2));
  }
  return best;
}

// ---- statistics -----------------------------------------------------------

// Width of the two-sided normal-approximation interval for a mean.
inline double normal_ci_width(double p_hat, std::size_t n, double z = 1.959963984540054) {
  return 2.0 * z * std::sqrt(p_hat * (1.0 - p_hat) / static_cast<double>(n));
}

}  // namespace oracle
