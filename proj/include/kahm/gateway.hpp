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

// Distance-gated selection across per-domain encoders: each query is routed
// to the encoder whose best cluster folds it the least.

#include "kahm/cluster_model.hpp"

#include <string>
#include <vector>

namespace kahm {

struct RegistryEntry {
  std::string law_id;
  ClusterSet encoder;
};

class EncoderRegistry {
 public:
  EncoderRegistry() = default;

  // Sorts by law_id; rejects duplicate ids and invalid encoders.
  explicit EncoderRegistry(std::vector<RegistryEntry> entries);

  const std::vector<RegistryEntry>& entries() const noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }
  int input_dim() const noexcept;
  int output_dim() const noexcept;

 private:
  std::vector<RegistryEntry> entries_;
};

double selection_score(const ClusterSet& encoder, const Eigen::Ref<const Vector>& x);

struct EncodedQuery {
  std::size_t entry = 0;  // index into registry.entries()
  std::string law_id;
  Vector embedding;
  double score = 0.0;
  bool zero_norm = false;  // prediction could not be normalized
};

EncodedQuery encode_query(const EncoderRegistry& registry, const Eigen::Ref<const Vector>& x,
                          bool normalize = true);

}  // namespace kahm
