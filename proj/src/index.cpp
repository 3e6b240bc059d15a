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

#include "kahm/index.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <unordered_set>

namespace kahm {

FlatIndex build_index(Matrix vectors, std::vector<std::string> ids,
                      std::vector<std::string> labels) {
  require(static_cast<std::size_t>(vectors.rows()) == ids.size() && ids.size() == labels.size(),
          ErrorCode::kInvalidArgument, "vector, id and label counts differ");
  require(vectors.allFinite(), ErrorCode::kNonFiniteValue, "index vectors are not finite");

  std::unordered_set<std::string> seen;
  for (Eigen::Index r = 0; r < vectors.rows(); ++r) {
    const auto& id = ids[static_cast<std::size_t>(r)];
    require(seen.insert(id).second, ErrorCode::kDuplicateId, "duplicate id '" + id + "'");
    const double norm = vectors.row(r).norm();
    require(norm > 0.0, ErrorCode::kZeroRow, "row '" + id + "' has zero norm");
    vectors.row(r) /= norm;
  }

  FlatIndex index;
  index.vectors_ = std::move(vectors);
  index.ids_ = std::move(ids);
  index.labels_ = std::move(labels);
  return index;
}

std::vector<std::pair<std::string, double>> FlatIndex::label_prior() const {
  std::map<std::string, std::size_t> counts;
  for (const auto& l : labels_) ++counts[l];
  std::vector<std::pair<std::string, double>> out;
  for (const auto& [label, n] : counts) {
    out.emplace_back(label, static_cast<double>(n) / static_cast<double>(labels_.size()));
  }
  return out;
}

std::vector<SearchHit> search(const FlatIndex& index, const Eigen::Ref<const Vector>& q,
                              std::size_t k) {
  require(q.size() == index.dim(), ErrorCode::kInvalidArgument,
          "query dimension does not match index");
  require(k >= 1 && k <= index.size(), ErrorCode::kInvalidArgument,
          "k must lie in [1, index size]");
  const double norm = q.norm();
  require(norm > 0.0 && std::isfinite(norm), ErrorCode::kEmptyQuery, "query vector is zero");

  const Vector scores = index.vectors() * (q / norm);
  std::vector<std::size_t> order(index.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                    [&](std::size_t a, std::size_t b) {
                      const double sa = scores[static_cast<Eigen::Index>(a)];
                      const double sb = scores[static_cast<Eigen::Index>(b)];
                      if (sa != sb) return sa > sb;
                      return a < b;
                    });

  std::vector<SearchHit> hits;
  hits.reserve(k);
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t r = order[i];
    hits.push_back({r, index.ids()[r], index.labels()[r], scores[static_cast<Eigen::Index>(r)]});
  }
  return hits;
}

}  // namespace kahm
