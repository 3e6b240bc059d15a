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

#include "kahm/eval.hpp"

#include "kahm/random.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <unordered_map>

namespace kahm {

namespace {

void check_cutoff(const QueryResult& r, std::size_t k) {
  require(!r.ranked_labels.empty(), ErrorCode::kInvalidArgument,
          "query '" + r.query_id + "' has no ranked labels");
  require(k >= 1 && k <= r.ranked_labels.size(), ErrorCode::kCutoffTooLarge,
          "cutoff " + std::to_string(k) + " exceeds the " +
              std::to_string(r.ranked_labels.size()) + " ranked labels of query '" + r.query_id +
              "'");
}

}  // namespace

RankingScores ranking_metrics(const QueryResult& result, std::size_t k) {
  check_cutoff(result, k);
  RankingScores s;
  s.top1 = result.ranked_labels.front() == result.gold_label ? 1 : 0;
  std::vector<const std::string*> distinct;
  for (std::size_t j = 0; j < k; ++j) {
    const std::string& label = result.ranked_labels[j];
    if (std::none_of(distinct.begin(), distinct.end(),
                     [&](const std::string* d) { return *d == label; })) {
      distinct.push_back(&label);
    }
    if (label == result.gold_label && s.hit == 0) {
      s.hit = 1;
      s.mrr = 1.0 / static_cast<double>(distinct.size());
    }
  }
  return s;
}

ConsensusScores consensus_metrics(const QueryResult& result, std::size_t k, double tau,
                                  const LabelPrior& prior) {
  check_cutoff(result, k);
  const auto it = prior.find(result.gold_label);
  require(it != prior.end() && it->second > 0.0, ErrorCode::kMissingPrior,
          "gold label '" + result.gold_label + "' has no corpus prior");

  // Labels in order of first occurrence with their counts.
  std::vector<std::pair<std::string, int>> counts;
  int gold = 0;
  for (std::size_t j = 0; j < k; ++j) {
    const std::string& label = result.ranked_labels[j];
    auto pos = std::find_if(counts.begin(), counts.end(),
                            [&](const auto& p) { return p.first == label; });
    if (pos == counts.end()) {
      counts.emplace_back(label, 1);
    } else {
      ++pos->second;
    }
    if (label == result.gold_label) ++gold;
  }
  auto best = counts.begin();
  for (auto c = counts.begin(); c != counts.end(); ++c) {
    if (c->second > best->second) best = c;
  }

  const double kd = static_cast<double>(k);
  ConsensusScores s;
  s.plurality_label = best->first;
  s.plurality_fraction = best->second / kd;
  s.majacc = (s.plurality_label == result.gold_label && s.plurality_fraction >= tau) ? 1 : 0;
  s.consfrac = gold / kd;
  s.lift = s.consfrac / it->second;
  return s;
}

std::string_view metric_name(Metric m) noexcept {
  switch (m) {
    case Metric::kHit: return "hit";
    case Metric::kTop1: return "top1";
    case Metric::kMrr: return "mrr";
    case Metric::kMajAcc: return "majacc";
    case Metric::kConsFrac: return "consfrac";
    case Metric::kLift: return "lift";
  }
  return "unknown";
}

double metric_value(const QueryResult& result, Metric metric, std::size_t k, double tau,
                    const LabelPrior& prior) {
  switch (metric) {
    case Metric::kHit: return ranking_metrics(result, k).hit;
    case Metric::kTop1: return ranking_metrics(result, k).top1;
    case Metric::kMrr: return ranking_metrics(result, k).mrr;
    case Metric::kMajAcc: return consensus_metrics(result, k, tau, prior).majacc;
    case Metric::kConsFrac: return consensus_metrics(result, k, tau, prior).consfrac;
    case Metric::kLift: return consensus_metrics(result, k, tau, prior).lift;
  }
  return 0.0;
}

double aggregate_scores(std::span<const double> scores, std::span<const std::string> groups,
                        AggregateMode mode) {
  require(!scores.empty(), ErrorCode::kEmptyInput, "no scores to aggregate");
  if (mode == AggregateMode::kMicro) {
    double sum = 0.0;
    for (double s : scores) sum += s;
    return sum / static_cast<double>(scores.size());
  }
  require(groups.size() == scores.size(), ErrorCode::kInvalidArgument,
          "macro aggregation needs one group per score");
  std::map<std::string, std::pair<double, std::size_t>> per_group;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    auto& g = per_group[groups[i]];
    g.first += scores[i];
    ++g.second;
  }
  double sum = 0.0;
  for (const auto& [_, g] : per_group) sum += g.first / static_cast<double>(g.second);
  return sum / static_cast<double>(per_group.size());
}

double aggregate(std::span<const QueryResult> results, Metric metric, std::size_t k,
                 AggregateMode mode, double tau, const LabelPrior& prior) {
  require(!results.empty(), ErrorCode::kEmptyInput, "no query results to aggregate");
  std::vector<double> scores;
  std::vector<std::string> groups;
  scores.reserve(results.size());
  for (const auto& r : results) {
    scores.push_back(metric_value(r, metric, k, tau, prior));
    groups.push_back(r.gold_label);
  }
  return aggregate_scores(scores, groups, mode);
}

void BootstrapConfig::validate() const {
  require(resamples >= 1, ErrorCode::kInvalidArgument, "bootstrap needs at least one resample");
  require(alpha > 0.0 && alpha < 1.0, ErrorCode::kInvalidArgument, "alpha must lie in (0, 1)");
}

double sorted_quantile(std::span<const double> sorted, double q) {
  require(!sorted.empty(), ErrorCode::kEmptyInput, "quantile of an empty sample");
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

namespace {

// Per-unit sums and counts; a unit is one query or one law.
struct UnitTable {
  std::vector<std::vector<double>> sums;  // [system][unit]
  std::vector<double> counts;             // [unit]
};

UnitTable build_units(const ScoreTable& table, ResampleUnit unit) {
  const std::size_t n = table.scores.front().size();
  UnitTable u;
  u.sums.resize(table.scores.size());
  if (unit == ResampleUnit::kQuery) {
    u.counts.assign(n, 1.0);
    for (std::size_t s = 0; s < table.scores.size(); ++s) u.sums[s] = table.scores[s];
    return u;
  }
  require(table.groups.size() == n, ErrorCode::kInvalidArgument,
          "law-level bootstrap needs one law per query");
  std::map<std::string, std::size_t> index;
  for (const auto& g : table.groups) index.emplace(g, 0);
  std::size_t next = 0;
  for (auto& [_, v] : index) v = next++;
  u.counts.assign(index.size(), 0.0);
  for (auto& s : u.sums) s.assign(index.size(), 0.0);
  for (std::size_t q = 0; q < n; ++q) {
    const std::size_t g = index.at(table.groups[q]);
    u.counts[g] += 1.0;
    for (std::size_t s = 0; s < table.scores.size(); ++s) u.sums[s][g] += table.scores[s][q];
  }
  return u;
}

// Aggregate of one system over a multiset of units: mean of unit means.
double unit_aggregate(const UnitTable& u, std::size_t system, std::span<const std::size_t> picks) {
  double acc = 0.0;
  for (std::size_t p : picks) acc += u.sums[system][p] / u.counts[p];
  return acc / static_cast<double>(picks.size());
}

Interval percentile_interval(double point, std::vector<double>& replicates, double alpha) {
  std::sort(replicates.begin(), replicates.end());
  return {point, sorted_quantile(replicates, alpha / 2.0),
          sorted_quantile(replicates, 1.0 - alpha / 2.0)};
}

}  // namespace

BootstrapResult paired_bootstrap(const ScoreTable& table, const BootstrapConfig& config,
                                 ResampleUnit unit) {
  config.validate();
  require(!table.scores.empty() && !table.scores.front().empty(), ErrorCode::kEmptyInput,
          "bootstrap needs at least one system and one query");
  require(table.systems.size() == table.scores.size(), ErrorCode::kInvalidArgument,
          "system names and score rows differ in count");
  for (const auto& s : table.scores) {
    require(s.size() == table.scores.front().size(), ErrorCode::kInvalidArgument,
            "systems must share the same query set");
  }

  const UnitTable units = build_units(table, unit);
  const std::size_t n_units = units.counts.size();
  const std::size_t n_sys = table.scores.size();
  const auto reps = static_cast<std::size_t>(config.resamples);

  std::vector<std::size_t> all(n_units);
  for (std::size_t i = 0; i < n_units; ++i) all[i] = i;
  std::vector<double> point(n_sys);
  for (std::size_t s = 0; s < n_sys; ++s) point[s] = unit_aggregate(units, s, all);

  std::vector<std::vector<double>> samples(n_sys, std::vector<double>(reps));
  std::vector<std::size_t> picks(n_units);
  for (std::size_t r = 0; r < reps; ++r) {
    Rng rng(config.seed, r);
    for (auto& p : picks) p = static_cast<std::size_t>(rng.uniform_index(n_units));
    for (std::size_t s = 0; s < n_sys; ++s) samples[s][r] = unit_aggregate(units, s, picks);
  }

  BootstrapResult out;
  for (std::size_t i = 0; i < n_sys; ++i) {
    for (std::size_t j = i + 1; j < n_sys; ++j) {
      std::vector<double> diff(reps);
      for (std::size_t r = 0; r < reps; ++r) diff[r] = samples[i][r] - samples[j][r];
      out.deltas.push_back({table.systems[i], table.systems[j],
                            percentile_interval(point[i] - point[j], diff, config.alpha)});
    }
  }
  for (std::size_t s = 0; s < n_sys; ++s) {
    out.systems.push_back(percentile_interval(point[s], samples[s], config.alpha));
  }
  return out;
}

std::vector<double> default_sweep_thresholds() {
  std::vector<double> t;
  for (int i = 0; i <= 100; ++i) t.push_back(i / 100.0);
  return t;
}

SweepResult routing_sweep(std::span<const QueryResult> results, std::size_t k,
                          std::span<const double> thresholds, double min_coverage) {
  require(!results.empty(), ErrorCode::kEmptyInput, "routing sweep needs query results");
  require(!thresholds.empty(), ErrorCode::kInvalidArgument, "routing sweep needs thresholds");

  // Plurality fraction and correctness do not depend on the prior; a unit
  // prior for the gold label satisfies consensus_metrics' precondition.
  std::vector<double> fraction(results.size());
  std::vector<bool> correct(results.size());
  for (std::size_t i = 0; i < results.size(); ++i) {
    const LabelPrior unit_prior{{results[i].gold_label, 1.0}};
    const auto c = consensus_metrics(results[i], k, 0.0, unit_prior);
    fraction[i] = c.plurality_fraction;
    correct[i] = c.plurality_label == results[i].gold_label;
  }

  SweepResult out;
  const double n = static_cast<double>(results.size());
  for (double t : thresholds) {
    std::size_t covered = 0;
    std::size_t hits = 0;
    for (std::size_t i = 0; i < results.size(); ++i) {
      if (fraction[i] >= t) {
        ++covered;
        if (correct[i]) ++hits;
      }
    }
    SweepRow row;
    row.threshold = t;
    row.coverage = static_cast<double>(covered) / n;
    row.majority_acc = static_cast<double>(hits) / n;
    row.precision = covered == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(covered);
    out.rows.push_back(row);
  }
  for (std::size_t i = 0; i < out.rows.size(); ++i) {
    const SweepRow& row = out.rows[i];
    if (row.coverage < min_coverage) continue;
    if (!out.selected) {
      out.selected = i;
      continue;
    }
    const SweepRow& best = out.rows[*out.selected];
    if (row.precision > best.precision ||
        (row.precision == best.precision && row.threshold < best.threshold)) {
      out.selected = i;
    }
  }
  return out;
}

L2MassReport summarize_margins(std::vector<double> margins, double tolerance) {
  require(!margins.empty(), ErrorCode::kEmptyInput, "no margins to summarize");
  L2MassReport r;
  r.margins = std::move(margins);
  std::size_t within = 0;
  double sum = 0.0;
  for (double m : r.margins) {
    const bool ok = m >= tolerance;
    r.within_tolerance.push_back(ok);
    within += ok ? 1 : 0;
    sum += m;
  }
  std::vector<double> sorted = r.margins;
  std::sort(sorted.begin(), sorted.end());
  r.min = sorted.front();
  r.median = sorted_quantile(sorted, 0.5);
  r.mean = sum / static_cast<double>(sorted.size());
  r.fraction_within = static_cast<double>(within) / static_cast<double>(sorted.size());
  return r;
}

L2MassReport l2_mass_diagnostic(const ClusterSet& encoder, const Matrix& samples,
                                std::span<const int> assignments, double tolerance) {
  const int c = encoder.cluster_count();
  require(samples.rows() > 0, ErrorCode::kEmptyInput, "diagnostic needs samples");
  require(static_cast<Eigen::Index>(assignments.size()) == samples.rows(),
          ErrorCode::kInvalidArgument, "one assignment per sample is required");

  Vector mass = Vector::Zero(c);
  std::vector<double> counts(static_cast<std::size_t>(c), 0.0);
  for (Eigen::Index i = 0; i < samples.rows(); ++i) {
    const int a = assignments[static_cast<std::size_t>(i)];
    require(a >= 0 && a < c, ErrorCode::kInvalidArgument, "assignment out of range");
    counts[static_cast<std::size_t>(a)] += 1.0;
    mass += feature_map(samples.row(i).transpose(), encoder).array().square().matrix();
  }
  const double n = static_cast<double>(samples.rows());
  std::vector<double> margins(static_cast<std::size_t>(c));
  for (int j = 0; j < c; ++j) {
    margins[static_cast<std::size_t>(j)] = mass[j] / n - counts[static_cast<std::size_t>(j)] / n;
  }
  return summarize_margins(std::move(margins), tolerance);
}

TimingProfile timing_profile(std::size_t batch_size, const StageFn& embed, const StageFn& search,
                             int warmup_batches, int measured_batches) {
  require(batch_size >= 1 && measured_batches >= 1, ErrorCode::kInvalidArgument,
          "timing needs a nonempty batch");
  using Clock = std::chrono::steady_clock;
  auto ms = [](Clock::duration d) {
    return std::chrono::duration<double, std::milli>(d).count();
  };

  for (int b = 0; b < warmup_batches; ++b) {
    for (std::size_t q = 0; q < batch_size; ++q) {
      embed(q);
      search(q);
    }
  }

  double embed_total = 0.0;
  double search_total = 0.0;
  double wall_total = 0.0;
  for (int b = 0; b < measured_batches; ++b) {
    const auto batch_start = Clock::now();
    for (std::size_t q = 0; q < batch_size; ++q) {
      const auto t0 = Clock::now();
      embed(q);
      const auto t1 = Clock::now();
      search(q);
      const auto t2 = Clock::now();
      embed_total += ms(t1 - t0);
      search_total += ms(t2 - t1);
    }
    wall_total += ms(Clock::now() - batch_start);
  }
  const double n = static_cast<double>(batch_size) * measured_batches;
  return {embed_total / n, search_total / n, wall_total / n,
          batch_size * static_cast<std::size_t>(measured_batches)};
}

EvalReport evaluate_runs(const std::vector<SystemRun>& runs, const LabelPrior& prior,
                         const EvalOptions& options) {
  require(!runs.empty() && !runs.front().results.empty(), ErrorCode::kEmptyInput,
          "evaluation needs at least one nonempty run");
  require(!options.cutoffs.empty(), ErrorCode::kInvalidArgument, "no cutoffs requested");
  options.bootstrap.validate();

  const auto& reference = runs.front().results;
  std::unordered_map<std::string, std::size_t> position;
  for (std::size_t i = 0; i < reference.size(); ++i) {
    require(position.emplace(reference[i].query_id, i).second, ErrorCode::kDuplicateId,
            "duplicate query id '" + reference[i].query_id + "' in run '" + runs.front().name +
                "'");
  }

  // aligned[s][i] is run s's result for the i-th reference query.
  std::vector<std::vector<const QueryResult*>> aligned(runs.size());
  for (std::size_t s = 0; s < runs.size(); ++s) {
    aligned[s].assign(reference.size(), nullptr);
    std::size_t unknown = 0;
    for (const auto& r : runs[s].results) {
      const auto it = position.find(r.query_id);
      if (it == position.end() || aligned[s][it->second] != nullptr) {
        ++unknown;
        continue;
      }
      require(r.gold_label == reference[it->second].gold_label, ErrorCode::kIdMismatch,
              "query '" + r.query_id + "' has different gold labels across runs");
      aligned[s][it->second] = &r;
    }
    const auto missing = static_cast<std::size_t>(
        std::count(aligned[s].begin(), aligned[s].end(), nullptr));
    require(unknown == 0 && missing == 0, ErrorCode::kIdMismatch,
            "run '" + runs[s].name + "' does not match the query set of '" + runs.front().name +
                "': " + std::to_string(missing) + " missing, " + std::to_string(unknown) +
                " unexpected or repeated");
  }

  EvalReport report;
  for (const auto& r : runs) report.systems.push_back(r.name);
  report.cutoffs = options.cutoffs;
  report.tau = options.tau;
  report.bootstrap = options.bootstrap;

  std::vector<std::string> groups;
  for (const auto& r : reference) groups.push_back(r.gold_label);

  for (std::size_t k : options.cutoffs) {
    for (Metric m : kAllMetrics) {
      ScoreTable table;
      table.systems = report.systems;
      table.groups = groups;
      for (std::size_t s = 0; s < runs.size(); ++s) {
        std::vector<double> scores;
        scores.reserve(reference.size());
        for (const QueryResult* r : aligned[s]) {
          scores.push_back(metric_value(*r, m, k, options.tau, prior));
        }
        table.scores.push_back(std::move(scores));
      }
      auto micro = paired_bootstrap(table, options.bootstrap, ResampleUnit::kQuery);
      report.micro.push_back({m, k, std::move(micro.systems), std::move(micro.deltas)});
      if (options.macro) {
        auto macro = paired_bootstrap(table, options.bootstrap, ResampleUnit::kLaw);
        report.macro.push_back({m, k, std::move(macro.systems), std::move(macro.deltas)});
      }
    }
  }

  if (options.sweep) {
    const auto thresholds = default_sweep_thresholds();
    for (const auto& r : runs) {
      report.sweeps.push_back({r.name, options.sweep_k,
                               routing_sweep(r.results, options.sweep_k, thresholds,
                                             options.sweep_min_coverage)});
    }
  }
  return report;
}

}  // namespace kahm
