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

// End-to-end commands. Each writes its artifacts plus run_manifest.json under
// an output directory; everything except the manifest timestamp and the
// timing file is a pure function of the inputs and options.

#include "kahm/data_io.hpp"
#include "kahm/index.hpp"

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace kahm {

inline constexpr const char* kManifestName = "run_manifest.json";
inline constexpr const char* kRegistryName = "registry.kahm";

// Runs fn(0..n-1) on up to `jobs` threads. Each index is handled exactly once;
// the first failure in index order is rethrown after all workers finish.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn);

struct GenSynthOptions {
  SyntheticSpec spec;
  std::filesystem::path out;
};

void run_gen_synth(const GenSynthOptions& options);

struct TrainOptions {
  std::filesystem::path lexical;   // bundle with a label per row naming its law
  std::filesystem::path semantic;  // row ids must match `lexical`
  std::filesystem::path out;
  TrainConfig config;
  int jobs = 1;
};

struct LawSummary {
  std::string law_id;
  int rows = 0;
  TrainSummary summary;
};

struct TrainOutcome {
  EncoderRegistry registry;
  std::vector<LawSummary> laws;  // law_id order
};

// Trains one encoder per law. Errors are rethrown with the law id prefixed.
TrainOutcome train_registry(const Matrix& lexical, const Matrix& semantic,
                            const std::vector<std::string>& labels, const TrainConfig& config,
                            int jobs);

TrainOutcome run_train(const TrainOptions& options);
std::string format_train_table(const std::vector<LawSummary>& laws);

struct EvaluateOptions {
  std::filesystem::path registry;
  std::filesystem::path corpus;   // semantic corpus bundle with labels
  std::filesystem::path queries;  // lexical query bundle; labels are the gold laws
  std::optional<std::filesystem::path> lexical_corpus;  // adds the lexical baseline
  std::vector<std::filesystem::path> comparators;       // extra run files
  std::filesystem::path out;
  EvalOptions eval;
  bool diagnostics = true;
  bool timing = true;
  int jobs = 1;
};

struct EvaluateOutcome {
  EvalReport report;
  std::vector<SystemRun> runs;
  std::vector<std::string> routed_laws;  // per query, in query bundle order
  double routing_accuracy = 0.0;
};

EvaluateOutcome run_evaluate(const EvaluateOptions& options);

struct AblateOptions {
  std::filesystem::path train_lexical;
  std::filesystem::path train_semantic;
  std::optional<std::filesystem::path> test_lexical;  // defaults to the training pair
  std::optional<std::filesystem::path> test_semantic;
  std::vector<int> cluster_grid{100, 200, 300, 400};
  TrainConfig config;
  std::filesystem::path out;
  int jobs = 1;
};

struct AblationRow {
  int clusters = 0;
  double cosine_mean = 0.0;
  double mse = 0.0;
  double r2 = 0.0;
  double seconds = 0.0;
};

struct PredictionQuality {
  double cosine_mean = 0.0;
  double mse = 0.0;
  double r2 = 0.0;
};

// Gateway-routed, normalized predictions scored against `targets`.
PredictionQuality prediction_quality(const EncoderRegistry& registry, const Matrix& lexical,
                                     const Matrix& targets, int jobs = 1);

std::vector<AblationRow> run_ablate(const AblateOptions& options);
std::string format_ablation_table(const std::vector<AblationRow>& rows, bool with_time = true);

}  // namespace kahm
