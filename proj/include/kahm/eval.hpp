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

// Retrieval evaluation: per-query law metrics, micro/macro aggregation,
// paired bootstrap intervals, the routing-threshold sweep, the cluster-wise
// L2-mass diagnostic and per-stage timing.

#include "kahm/cluster_model.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace kahm {

struct QueryResult {
  std::string query_id;
  std::string gold_label;
  std::vector<std::string> ranked_labels;
  std::optional<std::string> style_tag;
};

using LabelPrior = std::map<std::string, double>;

inline constexpr double kDefaultPredominance = 0.10;

struct RankingScores {
  int hit = 0;
  int top1 = 0;
  double mrr = 0.0;
};

// MRR is taken over the order-preserving list of distinct labels in the top k.
RankingScores ranking_metrics(const QueryResult& result, std::size_t k);

struct ConsensusScores {
  int majacc = 0;
  double consfrac = 0.0;
  double lift = 0.0;
  double plurality_fraction = 0.0;  // m = max label count / k
  std::string plurality_label;      // ties: earliest first occurrence
};

ConsensusScores consensus_metrics(const QueryResult& result, std::size_t k, double tau,
                                  const LabelPrior& prior);

enum class Metric { kHit, kTop1, kMrr, kMajAcc, kConsFrac, kLift };

inline constexpr Metric kAllMetrics[] = {Metric::kHit,    Metric::kTop1,     Metric::kMrr,
                                         Metric::kMajAcc, Metric::kConsFrac, Metric::kLift};

std::string_view metric_name(Metric m) noexcept;

double metric_value(const QueryResult& result, Metric metric, std::size_t k, double tau,
                    const LabelPrior& prior);

enum class AggregateMode { kMicro, kMacro };

// Macro mode averages per-group means; `groups` holds one group per score.
double aggregate_scores(std::span<const double> scores, std::span<const std::string> groups,
                        AggregateMode mode);

double aggregate(std::span<const QueryResult> results, Metric metric, std::size_t k,
                 AggregateMode mode, double tau = kDefaultPredominance,
                 const LabelPrior& prior = {});

struct BootstrapConfig {
  int resamples = 5000;
  std::uint64_t seed = 0;
  double alpha = 0.05;

  void validate() const;
};

enum class ResampleUnit { kQuery, kLaw };

struct ScoreTable {
  std::vector<std::string> systems;
  std::vector<std::vector<double>> scores;  // [system][query]
  std::vector<std::string> groups;          // law of each query; used for kLaw
};

struct Interval {
  double mean = 0.0;
  double low = 0.0;
  double high = 0.0;
};

struct PairedDelta {
  std::string minuend;
  std::string subtrahend;
  Interval delta;
};

struct BootstrapResult {
  std::vector<Interval> systems;  // aligned with ScoreTable::systems
  std::vector<PairedDelta> deltas;  // every pair (i < j) as systems[i] - systems[j]
};

// Percentile bootstrap. Replicate r draws its units from Rng(seed, r), so the
// output does not depend on evaluation order.
BootstrapResult paired_bootstrap(const ScoreTable& table, const BootstrapConfig& config,
                                 ResampleUnit unit);

// Linear-interpolated empirical quantile of a sorted sample.
double sorted_quantile(std::span<const double> sorted, double q);

struct SweepRow {
  double threshold = 0.0;
  double coverage = 0.0;
  double majority_acc = 0.0;
  double precision = 0.0;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  std::optional<std::size_t> selected;  // row index
};

std::vector<double> default_sweep_thresholds();

SweepResult routing_sweep(std::span<const QueryResult> results, std::size_t k,
                          std::span<const double> thresholds, double min_coverage = 0.5);

inline constexpr double kL2MassTolerance = -3e-3;

struct L2MassReport {
  std::vector<double> margins;  // per cluster
  std::vector<bool> within_tolerance;
  double min = 0.0;
  double median = 0.0;
  double mean = 0.0;
  double fraction_within = 0.0;
};

// Sample analogue of ||Phi_c||^2 minus the cluster's sample share.
L2MassReport l2_mass_diagnostic(const ClusterSet& encoder, const Matrix& samples,
                                std::span<const int> assignments,
                                double tolerance = kL2MassTolerance);

L2MassReport summarize_margins(std::vector<double> margins, double tolerance = kL2MassTolerance);

struct TimingProfile {
  double embed_ms = 0.0;   // mean per query
  double search_ms = 0.0;  // mean per query
  double total_ms = 0.0;   // mean per query, timed around the whole batch
  std::size_t queries = 0;
};

using StageFn = std::function<void(std::size_t query)>;

TimingProfile timing_profile(std::size_t batch_size, const StageFn& embed, const StageFn& search,
                             int warmup_batches = 3, int measured_batches = 1);

struct SystemRun {
  std::string name;
  std::vector<QueryResult> results;
};

struct MetricBlock {
  Metric metric = Metric::kHit;
  std::size_t k = 0;
  std::vector<Interval> systems;  // aligned with EvalReport::systems
  std::vector<PairedDelta> deltas;
};

struct SweepBlock {
  std::string system;
  std::size_t k = 0;
  SweepResult sweep;
};

struct DiagnosticBlock {
  std::string law_id;
  L2MassReport report;
};

struct TimingBlock {
  std::string system;
  TimingProfile profile;
};

struct EvalReport {
  std::vector<std::string> systems;
  std::vector<std::size_t> cutoffs;
  double tau = kDefaultPredominance;
  BootstrapConfig bootstrap;
  std::vector<MetricBlock> micro;  // query-level resampling
  std::vector<MetricBlock> macro;  // law-level resampling; empty unless requested
  std::vector<SweepBlock> sweeps;
  std::vector<DiagnosticBlock> diagnostics;
  std::optional<L2MassReport> diagnostic_overall;
  std::vector<TimingBlock> timings;
  std::map<std::string, double> scalars;  // free-form summary values
};

struct EvalOptions {
  std::vector<std::size_t> cutoffs{3, 5, 10, 15, 20};
  double tau = kDefaultPredominance;
  BootstrapConfig bootstrap;
  bool macro = false;
  bool sweep = false;
  std::size_t sweep_k = 10;
  double sweep_min_coverage = 0.5;
};

// Metric tables with bootstrap intervals for runs that share one query set
// (matched by query id, in the order of the first run).
EvalReport evaluate_runs(const std::vector<SystemRun>& runs, const LabelPrior& prior,
                         const EvalOptions& options);

}  // namespace kahm
