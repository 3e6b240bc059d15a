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

#include "kahm/gateway.hpp"

#include <algorithm>
#include <limits>

namespace kahm {

EncoderRegistry::EncoderRegistry(std::vector<RegistryEntry> entries) : entries_(std::move(entries)) {
  std::sort(entries_.begin(), entries_.end(),
            [](const RegistryEntry& a, const RegistryEntry& b) { return a.law_id < b.law_id; });
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    require(i == 0 || entries_[i].law_id != entries_[i - 1].law_id, ErrorCode::kDuplicateId,
            "duplicate law id '" + entries_[i].law_id + "'");
    entries_[i].encoder.validate();
    require(entries_[i].encoder.input_dim() == entries_.front().encoder.input_dim() &&
                entries_[i].encoder.output_dim() == entries_.front().encoder.output_dim(),
            ErrorCode::kInvalidArgument,
            "law '" + entries_[i].law_id + "' disagrees on input or output dimension");
  }
}

int EncoderRegistry::input_dim() const noexcept {
  return entries_.empty() ? 0 : entries_.front().encoder.input_dim();
}

int EncoderRegistry::output_dim() const noexcept {
  return entries_.empty() ? 0 : entries_.front().encoder.output_dim();
}

double selection_score(const ClusterSet& encoder, const Eigen::Ref<const Vector>& x) {
  const auto totals = folding_totals(x, encoder.cluster_models);
  return *std::min_element(totals.begin(), totals.end());
}

EncodedQuery encode_query(const EncoderRegistry& registry, const Eigen::Ref<const Vector>& x,
                          bool normalize) {
  require(!registry.empty(), ErrorCode::kEmptyRegistry, "encoder registry is empty");

  // Keep the winning law's totals so its feature map needs no second pass.
  std::vector<double> best_totals;
  EncodedQuery out;
  out.score = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < registry.size(); ++i) {
    auto totals = folding_totals(x, registry.entries()[i].encoder.cluster_models);
    const double score = *std::min_element(totals.begin(), totals.end());
    // Entries are sorted by law_id, so strict < keeps the smaller id on ties.
    if (score < out.score) {
      out.score = score;
      out.entry = i;
      best_totals = std::move(totals);
    }
  }

  const RegistryEntry& chosen = registry.entries()[out.entry];
  out.law_id = chosen.law_id;
  const Vector phi =
      feature_map_from_totals(best_totals, chosen.encoder.omega, chosen.encoder.k_trunc);
  out.embedding = chosen.encoder.prototypes.transpose() * phi;
  if (normalize) {
    const double norm = out.embedding.norm();
    if (norm > 0.0) {
      out.embedding /= norm;
    } else {
      out.zero_norm = true;
    }
  }
  return out;
}

}  // namespace kahm
