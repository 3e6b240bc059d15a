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

// Exact inner-product search over L2-normalized rows.

#include "kahm/common.hpp"

#include <string>
#include <vector>

namespace kahm {

struct SearchHit {
  std::size_t row = 0;
  std::string id;
  std::string label;
  double score = 0.0;
};

class FlatIndex {
 public:
  FlatIndex() = default;

  const Matrix& vectors() const noexcept { return vectors_; }
  const std::vector<std::string>& ids() const noexcept { return ids_; }
  const std::vector<std::string>& labels() const noexcept { return labels_; }
  std::size_t size() const noexcept { return ids_.size(); }
  int dim() const noexcept { return static_cast<int>(vectors_.cols()); }

  // Fraction of rows carrying each label.
  std::vector<std::pair<std::string, double>> label_prior() const;

 private:
  Matrix vectors_;
  std::vector<std::string> ids_;
  std::vector<std::string> labels_;

  friend FlatIndex build_index(Matrix, std::vector<std::string>, std::vector<std::string>);
};

FlatIndex build_index(Matrix vectors, std::vector<std::string> ids,
                      std::vector<std::string> labels);

// Top-k rows by inner product with q / ||q||; descending score, ties by row.
std::vector<SearchHit> search(const FlatIndex& index, const Eigen::Ref<const Vector>& q,
                              std::size_t k);

}  // namespace kahm
