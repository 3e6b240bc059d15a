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

#include "kahm/data_io.hpp"
#include "kahm/random.hpp"

#include <Eigen/QR>

#include <cstdio>

namespace kahm {
namespace {

std::string numbered(const char* prefix, std::size_t i, int width) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s%0*zu", prefix, width, i);
  return buf;
}

Vector gaussian(Rng& rng, Eigen::Index n, double scale) {
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = scale * rng.normal();
  return v;
}

Vector unit(const Vector& v) {
  const double n = v.norm();
  return n > 0.0 ? Vector(v / n) : v;
}

// Haar-like random orthogonal matrix: QR of a Gaussian matrix with the signs
// of R's diagonal folded into Q.
Matrix random_rotation(Rng& rng, int n) {
  Matrix g(n, n);
  for (Eigen::Index i = 0; i < g.size(); ++i) g.data()[i] = rng.normal();
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ();
  const Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int j = 0; j < n; ++j) {
    if (r(j, j) < 0.0) q.col(j) *= -1.0;
  }
  return q;
}

}  // namespace

void SyntheticSpec::validate() const {
  require(n_laws >= 1 && clusters_per_law >= 1 && lexical_dim >= 1 && semantic_dim >= 1 &&
              samples_per_cluster >= 1 && test_per_cluster >= 1 && corpus_per_cluster >= 1,
          ErrorCode::kInvalidArgument, "synthetic counts must be at least 1");
  require(teacher_noise_sigma >= 0.0, ErrorCode::kInvalidArgument, "sigma must be non-negative");
  require(lexical_distortion >= 0.0 && lexical_spread >= 0.0 && corpus_spread >= 0.0,
          ErrorCode::kInvalidArgument, "distortion and spread levels must be non-negative");
}

SyntheticData generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  const int q_laws = spec.n_laws;
  const int c_per = spec.clusters_per_law;
  const int n = spec.lexical_dim;
  const int p = spec.semantic_dim;

  SyntheticData d;
  for (int q = 0; q < q_laws; ++q) d.law_ids.push_back(numbered("law", q, 2));

  // Each law owns a disjoint block of semantic coordinates when p allows it,
  // which makes the laws' prototype subspaces mutually orthogonal.
  const int block = p >= q_laws ? p / q_laws : p;
  const int total_clusters = q_laws * c_per;
  d.prototypes = Matrix::Zero(total_clusters, p);
  for (int q = 0; q < q_laws; ++q) {
    const int offset = p >= q_laws ? q * block : 0;
    for (int c = 0; c < c_per; ++c) {
      Vector v = Vector::Zero(p);
      v.segment(offset, block) = gaussian(rng, block, 1.0);
      d.prototypes.row(q * c_per + c) = unit(v).transpose();
      d.prototype_labels.push_back(d.law_ids[static_cast<std::size_t>(q)]);
    }
  }

  // Lexical view of a semantic vector: rotation of a random projection.
  Matrix projection(n, p);
  for (Eigen::Index i = 0; i < projection.size(); ++i) {
    projection.data()[i] = rng.normal() / std::sqrt(static_cast<double>(n));
  }
  const Matrix lexical_map = random_rotation(rng, n) * projection;

  // Query-side lexical anchors carry a per-cluster distortion the corpus
  // side does not see.
  Matrix anchors(total_clusters, n);
  for (int j = 0; j < total_clusters; ++j) {
    const Vector base = lexical_map * d.prototypes.row(j).transpose();
    const Vector noise = gaussian(rng, n, spec.lexical_distortion / std::sqrt(double(n)));
    anchors.row(j) = unit(base + noise).transpose();
  }

  const double lex_scale = spec.lexical_spread / std::sqrt(double(n));
  const double sem_scale = spec.teacher_noise_sigma / std::sqrt(double(p));
  const double corpus_scale = spec.corpus_spread / std::sqrt(double(p));

  const std::size_t n_train = static_cast<std::size_t>(total_clusters) * spec.samples_per_cluster;
  const std::size_t n_test = static_cast<std::size_t>(total_clusters) * spec.test_per_cluster;
  const std::size_t n_corpus = static_cast<std::size_t>(total_clusters) * spec.corpus_per_cluster;
  d.train_lexical.resize(static_cast<Eigen::Index>(n_train), n);
  d.train_semantic.resize(static_cast<Eigen::Index>(n_train), p);
  d.test_lexical.resize(static_cast<Eigen::Index>(n_test), n);
  d.test_semantic.resize(static_cast<Eigen::Index>(n_test), p);
  d.corpus_semantic.resize(static_cast<Eigen::Index>(n_corpus), p);
  d.corpus_lexical.resize(static_cast<Eigen::Index>(n_corpus), n);

  // Rows are interleaved across clusters so no law's rows are contiguous by
  // cluster; this keeps holdout splits from depending on generation order.
  std::size_t row = 0;
  for (int s = 0; s < spec.samples_per_cluster; ++s) {
    for (int j = 0; j < total_clusters; ++j, ++row) {
      const auto r = static_cast<Eigen::Index>(row);
      d.train_lexical.row(r) = unit(anchors.row(j).transpose() + gaussian(rng, n, lex_scale)).transpose();
      d.train_semantic.row(r) =
          unit(d.prototypes.row(j).transpose() + gaussian(rng, p, sem_scale)).transpose();
      d.train_ids.push_back(numbered("train-", row, 6));
      d.train_labels.push_back(d.law_ids[static_cast<std::size_t>(j / c_per)]);
      d.train_clusters.push_back(j % c_per);
    }
  }

  row = 0;
  for (int s = 0; s < spec.test_per_cluster; ++s) {
    for (int j = 0; j < total_clusters; ++j, ++row) {
      const auto r = static_cast<Eigen::Index>(row);
      d.test_lexical.row(r) = unit(anchors.row(j).transpose() + gaussian(rng, n, lex_scale)).transpose();
      d.test_semantic.row(r) = d.prototypes.row(j);
      d.test_ids.push_back(numbered("test-", row, 6));
      d.test_labels.push_back(d.law_ids[static_cast<std::size_t>(j / c_per)]);
    }
  }

  row = 0;
  for (int j = 0; j < total_clusters; ++j) {
    for (int s = 0; s < spec.corpus_per_cluster; ++s, ++row) {
      const auto r = static_cast<Eigen::Index>(row);
      const Vector sem = unit(d.prototypes.row(j).transpose() + gaussian(rng, p, corpus_scale));
      d.corpus_semantic.row(r) = sem.transpose();
      d.corpus_lexical.row(r) = unit(lexical_map * sem).transpose();
      d.corpus_ids.push_back(numbered("unit-", row, 6));
      d.corpus_labels.push_back(d.law_ids[static_cast<std::size_t>(j / c_per)]);
    }
  }
  return d;
}

void write_synthetic(const SyntheticData& d, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_bundle(VectorBundle::from_matrix(d.train_lexical, d.train_ids, d.train_labels),
               dir / "train_lex.manifest");
  write_bundle(VectorBundle::from_matrix(d.train_semantic, d.train_ids, d.train_labels),
               dir / "train_sem.manifest");
  write_bundle(VectorBundle::from_matrix(d.test_lexical, d.test_ids, d.test_labels),
               dir / "test_lex.manifest");
  write_bundle(VectorBundle::from_matrix(d.test_semantic, d.test_ids, d.test_labels),
               dir / "test_sem.manifest");
  write_bundle(VectorBundle::from_matrix(d.corpus_semantic, d.corpus_ids, d.corpus_labels),
               dir / "corpus_sem.manifest");
  write_bundle(VectorBundle::from_matrix(d.corpus_lexical, d.corpus_ids, d.corpus_labels),
               dir / "corpus_lex.manifest");
  std::vector<std::string> proto_ids;
  for (std::size_t i = 0; i < d.prototype_labels.size(); ++i) {
    proto_ids.push_back(numbered("proto-", i, 4));
  }
  write_bundle(VectorBundle::from_matrix(d.prototypes, proto_ids, d.prototype_labels),
               dir / "prototypes.manifest");
}

}  // namespace kahm
