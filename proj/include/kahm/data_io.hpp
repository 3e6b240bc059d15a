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

// File formats.
//
// Vector bundle: a key=value text manifest next to a raw payload of
// little-endian IEEE-754 float32 values in row-major order, a newline
// separated id list and an optional label list.
//
//   format_version=1
//   rows=<R>
//   cols=<C>
//   dtype=f32le
//   payload_file=<name>.f32
//   ids_file=<name>.ids
//   labels_file=<name>.labels      (optional)
//
// Registry container: one binary file, magic "KAHM1", holding a section per
// law with every KAHM matrix in float64. See registry_io.cpp for the layout.
//
// Run file: tab-separated text, one query per line:
//   query_id <TAB> gold_label <TAB> style_tag|- <TAB> label_1 <TAB> ... label_k

#include "kahm/eval.hpp"
#include "kahm/gateway.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace kahm {

inline constexpr int kBundleFormatVersion = 1;
inline constexpr std::uint32_t kRegistryFormatVersion = 1;
// Sample covariance divisor convention stored in the registry: N - 1.
inline constexpr std::uint32_t kCovarianceDivisorUnbiased = 1;

struct VectorBundle {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<float> payload;  // rows * cols, row-major
  std::vector<std::string> ids;
  std::optional<std::vector<std::string>> labels;

  Matrix to_matrix() const;
  static VectorBundle from_matrix(const Matrix& m, std::vector<std::string> ids,
                                  std::optional<std::vector<std::string>> labels = std::nullopt);

  void validate() const;
};

// `manifest` is the path of the manifest file; companion files are written
// next to it with the same stem.
void write_bundle(const VectorBundle& bundle, const std::filesystem::path& manifest);
VectorBundle read_bundle(const std::filesystem::path& manifest);

void save_registry(const EncoderRegistry& registry, const std::filesystem::path& path);
EncoderRegistry load_registry(const std::filesystem::path& path);

std::vector<std::uint8_t> serialize_registry(const EncoderRegistry& registry);
EncoderRegistry deserialize_registry(const std::vector<std::uint8_t>& bytes);

void write_run(const std::vector<QueryResult>& results, const std::filesystem::path& path);
std::vector<QueryResult> read_run(const std::filesystem::path& path);

// Text tables laid out as metric x cutoff rows with one mean [low, high]
// column group per system, then paired deltas.
std::string format_report(const EvalReport& report);
void write_report(const EvalReport& report, const std::filesystem::path& text_path,
                  const std::filesystem::path& json_path);
std::string report_to_json(const EvalReport& report);

struct SyntheticSpec {
  int n_laws = 3;
  int clusters_per_law = 8;
  int lexical_dim = 32;
  int semantic_dim = 48;
  int samples_per_cluster = 30;
  int test_per_cluster = 5;
  int corpus_per_cluster = 4;
  double teacher_noise_sigma = 0.05;
  double lexical_distortion = 2.0;  // query-side anchor distortion
  double lexical_spread = 0.1;      // within-cluster lexical noise
  double corpus_spread = 0.3;
  std::uint64_t seed = 7;

  void validate() const;
};

struct SyntheticData {
  std::vector<std::string> law_ids;
  Matrix prototypes;  // (laws * clusters) x semantic_dim, ground truth
  std::vector<std::string> prototype_labels;

  Matrix train_lexical;
  Matrix train_semantic;
  std::vector<std::string> train_ids;
  std::vector<std::string> train_labels;
  std::vector<int> train_clusters;  // ground-truth cluster within the law

  Matrix test_lexical;
  Matrix test_semantic;  // noise-free prototype of the generating cluster
  std::vector<std::string> test_ids;
  std::vector<std::string> test_labels;

  Matrix corpus_semantic;
  Matrix corpus_lexical;
  std::vector<std::string> corpus_ids;
  std::vector<std::string> corpus_labels;
};

SyntheticData generate_synthetic(const SyntheticSpec& spec);

// Writes train_lex, train_sem, test_lex, test_sem, corpus_sem, corpus_lex and
// prototypes bundles under `dir`.
void write_synthetic(const SyntheticData& data, const std::filesystem::path& dir);

}  // namespace kahm
