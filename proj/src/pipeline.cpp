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

#include "kahm/pipeline.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <thread>

namespace fs = std::filesystem;

namespace kahm {
namespace {

using nlohmann::ordered_json;

// Stands in for the ranking of a query whose predicted embedding vanished;
// it never equals a gold label because labels cannot contain '<'.
constexpr const char* kNoResult = "<none>";

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

ordered_json format_versions() {
  return {{"bundle", kBundleFormatVersion},
          {"registry", kRegistryFormatVersion},
          {"covariance_divisor", kCovarianceDivisorUnbiased}};
}

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(out), ErrorCode::kIoFailure, "cannot write " + path.string());
  out << text;
  require(static_cast<bool>(out), ErrorCode::kIoFailure, "write failed for " + path.string());
}

void write_manifest(const fs::path& out, const std::string& command, ordered_json config,
                    ordered_json inputs, ordered_json outputs, std::uint64_t seed) {
  ordered_json m;
  m["command"] = command;
  m["config"] = std::move(config);
  m["inputs"] = std::move(inputs);
  m["outputs"] = std::move(outputs);
  m["seed"] = seed;
  m["timestamp"] = utc_timestamp();
  m["format_versions"] = format_versions();
  write_file(out / kManifestName, m.dump(2) + "\n");
}

ordered_json train_config_json(const TrainConfig& c) {
  return {{"clusters", c.n_clusters},
          {"validation_fraction", c.validation_fraction},
          {"omega_grid", c.omega_grid},
          {"k_grid", c.k_grid},
          {"nlms_step", c.nlms_step},
          {"nlms_epochs", c.nlms_epochs},
          {"seed", c.seed}};
}

struct PairedData {
  Matrix lexical;
  Matrix semantic;
  std::vector<std::string> labels;
};

PairedData read_pair(const fs::path& lexical_path, const fs::path& semantic_path) {
  const VectorBundle lex = read_bundle(lexical_path);
  const VectorBundle sem = read_bundle(semantic_path);
  require(lex.labels.has_value(), ErrorCode::kMalformedManifest,
          lexical_path.string() + " has no labels naming each row's law");
  require(lex.rows == sem.rows, ErrorCode::kIdMismatch,
          "lexical bundle has " + std::to_string(lex.rows) + " rows, semantic bundle has " +
              std::to_string(sem.rows));
  std::size_t mismatched = 0;
  for (std::size_t i = 0; i < lex.rows; ++i) mismatched += lex.ids[i] != sem.ids[i] ? 1 : 0;
  require(mismatched == 0, ErrorCode::kIdMismatch,
          std::to_string(mismatched) + " of " + std::to_string(lex.rows) +
              " row ids differ between the lexical and semantic bundles");
  return {lex.to_matrix(), sem.to_matrix(), *lex.labels};
}

Matrix select_rows(const Matrix& m, const std::vector<int>& rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(rows[i]);
  return out;
}

std::vector<std::string> hit_labels(const std::vector<SearchHit>& hits) {
  std::vector<std::string> out;
  out.reserve(hits.size());
  for (const auto& h : hits) out.push_back(h.label);
  return out;
}

// Law samples for the diagnostic: every cluster's reference rows, auxiliary
// points included, tagged with their cluster.
std::pair<Matrix, std::vector<int>> cluster_samples(const ClusterSet& set) {
  Eigen::Index rows = 0;
  for (const auto& m : set.cluster_models) rows += m.reference().rows();
  Matrix samples(rows, set.input_dim());
  std::vector<int> assignments;
  assignments.reserve(static_cast<std::size_t>(rows));
  Eigen::Index r = 0;
  for (int c = 0; c < set.cluster_count(); ++c) {
    const Matrix& ref = set.cluster_models[static_cast<std::size_t>(c)].reference();
    samples.middleRows(r, ref.rows()) = ref;
    r += ref.rows();
    assignments.insert(assignments.end(), static_cast<std::size_t>(ref.rows()), c);
  }
  return {std::move(samples), std::move(assignments)};
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

}  // namespace

void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn) {
  if (n == 0) return;
  const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(jobs, 1)));
  std::vector<std::exception_ptr> errors(n);
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < n; i = next++) {
          try {
            fn(i);
          } catch (...) {
            errors[i] = std::current_exception();
          }
        }
      });
    }
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

void run_gen_synth(const GenSynthOptions& options) {
  const SyntheticSpec& s = options.spec;
  s.validate();
  const SyntheticData data = generate_synthetic(s);
  write_synthetic(data, options.out);
  ordered_json config{{"laws", s.n_laws},
                      {"clusters", s.clusters_per_law},
                      {"lexical_dim", s.lexical_dim},
                      {"semantic_dim", s.semantic_dim},
                      {"samples_per_cluster", s.samples_per_cluster},
                      {"test_per_cluster", s.test_per_cluster},
                      {"corpus_per_cluster", s.corpus_per_cluster},
                      {"sigma", s.teacher_noise_sigma},
                      {"distortion", s.lexical_distortion},
                      {"lexical_spread", s.lexical_spread},
                      {"corpus_spread", s.corpus_spread}};
  ordered_json outputs = ordered_json::array();
  for (const char* name : {"train_lex", "train_sem", "test_lex", "test_sem", "corpus_sem",
                           "corpus_lex", "prototypes"}) {
    outputs.push_back(std::string(name) + ".manifest");
  }
  write_manifest(options.out, "gen-synth", std::move(config), ordered_json::array(),
                 std::move(outputs), s.seed);
}

TrainOutcome train_registry(const Matrix& lexical, const Matrix& semantic,
                            const std::vector<std::string>& labels, const TrainConfig& config,
                            int jobs) {
  config.validate();
  require(lexical.rows() == semantic.rows() &&
              static_cast<std::size_t>(lexical.rows()) == labels.size(),
          ErrorCode::kSizeMismatch, "lexical, semantic and label row counts differ");
  require(lexical.rows() > 0, ErrorCode::kEmptyInput, "no training rows");

  std::map<std::string, std::vector<int>> by_law;
  for (std::size_t i = 0; i < labels.size(); ++i) by_law[labels[i]].push_back(static_cast<int>(i));
  std::vector<std::pair<std::string, std::vector<int>>> laws(by_law.begin(), by_law.end());

  std::vector<std::optional<TrainedEncoder>> trained(laws.size());
  parallel_for(laws.size(), jobs, [&](std::size_t i) {
    const auto& [law, rows] = laws[i];
    try {
      trained[i] = train_law_encoder(select_rows(lexical, rows), select_rows(semantic, rows), config);
    } catch (const Error& e) {
      throw Error(e.code(), "law '" + law + "': " + e.what());
    }
  });

  TrainOutcome out;
  std::vector<RegistryEntry> entries;
  for (std::size_t i = 0; i < laws.size(); ++i) {
    out.laws.push_back({laws[i].first, static_cast<int>(laws[i].second.size()), trained[i]->summary});
    entries.push_back({laws[i].first, std::move(trained[i]->set)});
  }
  out.registry = EncoderRegistry(std::move(entries));
  return out;
}

TrainOutcome run_train(const TrainOptions& options) {
  options.config.validate();
  const PairedData data = read_pair(options.lexical, options.semantic);
  TrainOutcome outcome =
      train_registry(data.lexical, data.semantic, data.labels, options.config, options.jobs);
  fs::create_directories(options.out);
  save_registry(outcome.registry, options.out / kRegistryName);
  write_file(options.out / "train_summary.txt", format_train_table(outcome.laws));
  write_manifest(options.out, "train", train_config_json(options.config),
                 {options.lexical.string(), options.semantic.string()},
                 {kRegistryName, "train_summary.txt"}, options.config.seed);
  return outcome;
}

std::string format_train_table(const std::vector<LawSummary>& laws) {
  char line[160];
  std::string out;
  std::snprintf(line, sizeof line, "%-16s %7s %6s %4s %14s %14s %14s\n", "law", "rows", "omega",
                "K", "val_mse", "mse_before", "mse_after");
  out += line;
  for (const auto& l : laws) {
    std::snprintf(line, sizeof line, "%-16s %7d %6g %4d %14.6e %14.6e %14.6e\n", l.law_id.c_str(),
                  l.rows, l.summary.omega, l.summary.k_trunc, l.summary.validation_mse,
                  l.summary.train_mse_before, l.summary.train_mse_after);
    out += line;
  }
  return out;
}

EvaluateOutcome run_evaluate(const EvaluateOptions& options) {
  const EvalOptions& eo = options.eval;
  require(!eo.cutoffs.empty(), ErrorCode::kInvalidArgument, "no cutoffs requested");
  eo.bootstrap.validate();

  const EncoderRegistry registry = load_registry(options.registry);
  const VectorBundle corpus_bundle = read_bundle(options.corpus);
  const VectorBundle query_bundle = read_bundle(options.queries);
  require(corpus_bundle.labels.has_value(), ErrorCode::kMalformedManifest,
          options.corpus.string() + " has no labels");
  require(query_bundle.labels.has_value(), ErrorCode::kMalformedManifest,
          options.queries.string() + " has no gold labels");
  require(static_cast<int>(query_bundle.cols) == registry.input_dim(), ErrorCode::kSizeMismatch,
          "query dimension " + std::to_string(query_bundle.cols) +
              " does not match the registry input dimension " +
              std::to_string(registry.input_dim()));

  const FlatIndex index =
      build_index(corpus_bundle.to_matrix(), corpus_bundle.ids, *corpus_bundle.labels);
  require(index.dim() == registry.output_dim(), ErrorCode::kSizeMismatch,
          "corpus dimension does not match the registry output dimension");
  const std::size_t depth = *std::max_element(eo.cutoffs.begin(), eo.cutoffs.end());
  require(depth <= index.size(), ErrorCode::kCutoffTooLarge,
          "cutoff " + std::to_string(depth) + " exceeds the corpus size " +
              std::to_string(index.size()));
  LabelPrior prior;
  for (const auto& [label, share] : index.label_prior()) prior[label] = share;

  const Matrix queries = query_bundle.to_matrix();
  const auto& gold = *query_bundle.labels;
  const std::size_t nq = query_bundle.rows;

  EvaluateOutcome out;
  out.routed_laws.resize(nq);
  SystemRun kahm_run{"kahm", std::vector<QueryResult>(nq)};
  std::vector<char> zero_norm(nq, 0);
  parallel_for(nq, options.jobs, [&](std::size_t i) {
    const auto q = static_cast<Eigen::Index>(i);
    const EncodedQuery enc = encode_query(registry, queries.row(q).transpose());
    QueryResult& r = kahm_run.results[i];
    r.query_id = query_bundle.ids[i];
    r.gold_label = gold[i];
    out.routed_laws[i] = enc.law_id;
    if (enc.zero_norm) {
      zero_norm[i] = 1;
      r.ranked_labels.assign(depth, kNoResult);
    } else {
      r.ranked_labels = hit_labels(search(index, enc.embedding, depth));
    }
  });

  std::size_t correct = 0;
  for (std::size_t i = 0; i < nq; ++i) correct += out.routed_laws[i] == gold[i] ? 1 : 0;
  out.routing_accuracy = nq ? static_cast<double>(correct) / static_cast<double>(nq) : 0.0;

  out.runs.push_back(std::move(kahm_run));

  if (options.lexical_corpus) {
    const VectorBundle lex_bundle = read_bundle(*options.lexical_corpus);
    require(lex_bundle.labels.has_value(), ErrorCode::kMalformedManifest,
            options.lexical_corpus->string() + " has no labels");
    require(lex_bundle.cols == query_bundle.cols, ErrorCode::kSizeMismatch,
            "lexical corpus dimension does not match the queries");
    const FlatIndex lex_index = build_index(lex_bundle.to_matrix(), lex_bundle.ids, *lex_bundle.labels);
    require(depth <= lex_index.size(), ErrorCode::kCutoffTooLarge,
            "cutoff exceeds the lexical corpus size");
    SystemRun lex_run{"lexical", std::vector<QueryResult>(nq)};
    parallel_for(nq, options.jobs, [&](std::size_t i) {
      QueryResult& r = lex_run.results[i];
      r.query_id = query_bundle.ids[i];
      r.gold_label = gold[i];
      const auto q = static_cast<Eigen::Index>(i);
      if (queries.row(q).squaredNorm() == 0.0) {
        r.ranked_labels.assign(depth, kNoResult);
      } else {
        r.ranked_labels = hit_labels(search(lex_index, queries.row(q).transpose(), depth));
      }
    });
    out.runs.push_back(std::move(lex_run));
  }

  for (const auto& path : options.comparators) {
    out.runs.push_back({path.stem().string(), read_run(path)});
  }

  out.report = evaluate_runs(out.runs, prior, eo);
  out.report.scalars["routing_accuracy"] = out.routing_accuracy;
  out.report.scalars["zero_norm_queries"] =
      static_cast<double>(std::count(zero_norm.begin(), zero_norm.end(), 1));
  out.report.scalars["queries"] = static_cast<double>(nq);

  if (options.diagnostics) {
    std::vector<double> all_margins;
    for (const auto& entry : registry.entries()) {
      const auto [samples, assignments] = cluster_samples(entry.encoder);
      L2MassReport r = l2_mass_diagnostic(entry.encoder, samples, assignments);
      all_margins.insert(all_margins.end(), r.margins.begin(), r.margins.end());
      out.report.diagnostics.push_back({entry.law_id, std::move(r)});
    }
    out.report.diagnostic_overall = summarize_margins(std::move(all_margins));
  }

  fs::create_directories(options.out);
  std::vector<std::string> outputs{"report.txt", "report.json"};
  for (const auto& run : out.runs) {
    write_run(run.results, options.out / "runs" / (run.name + ".tsv"));
    outputs.push_back("runs/" + run.name + ".tsv");
  }
  {
    std::string routing = "query_id\tgold\trouted\n";
    for (std::size_t i = 0; i < nq; ++i) {
      routing += query_bundle.ids[i] + '\t' + gold[i] + '\t' + out.routed_laws[i] + '\n';
    }
    write_file(options.out / "routing.tsv", routing);
    outputs.push_back("routing.tsv");
  }
  // Timings vary run to run, so they stay out of the deterministic report.
  write_report(out.report, options.out / "report.txt", options.out / "report.json");

  if (options.timing && nq > 0) {
    Vector embedded;
    const TimingProfile profile = timing_profile(
        nq,
        [&](std::size_t i) {
          embedded = encode_query(registry, queries.row(static_cast<Eigen::Index>(i)).transpose())
                         .embedding;
        },
        [&](std::size_t) {
          if (embedded.squaredNorm() > 0.0) (void)search(index, embedded, depth);
        });
    out.report.timings.push_back({"kahm", profile});
    ordered_json t{{"system", "kahm"},
                   {"embed_ms", profile.embed_ms},
                   {"search_ms", profile.search_ms},
                   {"total_ms", profile.total_ms},
                   {"queries", profile.queries}};
    write_file(options.out / "timing.json", t.dump(2) + "\n");
    outputs.push_back("timing.json");
  }

  ordered_json inputs{{"registry", options.registry.string()},
                      {"corpus", options.corpus.string()},
                      {"queries", options.queries.string()}};
  if (options.lexical_corpus) inputs["lexical_corpus"] = options.lexical_corpus->string();
  ordered_json comparators = ordered_json::array();
  for (const auto& c : options.comparators) comparators.push_back(c.string());
  inputs["comparators"] = std::move(comparators);
  ordered_json config{{"cutoffs", eo.cutoffs},
                      {"tau", eo.tau},
                      {"bootstrap", eo.bootstrap.resamples},
                      {"alpha", eo.bootstrap.alpha},
                      {"macro", eo.macro},
                      {"sweep", eo.sweep},
                      {"sweep_k", eo.sweep_k},
                      {"diagnostics", options.diagnostics}};
  write_manifest(options.out, "evaluate", std::move(config), std::move(inputs), outputs,
                 eo.bootstrap.seed);
  return out;
}

PredictionQuality prediction_quality(const EncoderRegistry& registry, const Matrix& lexical,
                                     const Matrix& targets, int jobs) {
  require(lexical.rows() == targets.rows() && lexical.rows() > 0, ErrorCode::kSizeMismatch,
          "prediction and target row counts differ");
  Matrix predicted(targets.rows(), targets.cols());
  parallel_for(static_cast<std::size_t>(lexical.rows()), jobs, [&](std::size_t i) {
    const auto r = static_cast<Eigen::Index>(i);
    predicted.row(r) = encode_query(registry, lexical.row(r).transpose()).embedding.transpose();
  });
  PredictionQuality q;
  double cos_sum = 0.0;
  for (Eigen::Index i = 0; i < targets.rows(); ++i) {
    const double denom = predicted.row(i).norm() * targets.row(i).norm();
    cos_sum += denom > 0.0 ? predicted.row(i).dot(targets.row(i)) / denom : 0.0;
  }
  q.cosine_mean = cos_sum / static_cast<double>(targets.rows());
  q.mse = mean_squared_error(predicted, targets);
  const Eigen::RowVectorXd mean = targets.colwise().mean();
  const double ss_tot = (targets.rowwise() - mean).squaredNorm();
  const double ss_res = (predicted - targets).squaredNorm();
  q.r2 = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 0.0;
  return q;
}

std::vector<AblationRow> run_ablate(const AblateOptions& options) {
  require(!options.cluster_grid.empty(), ErrorCode::kInvalidArgument, "cluster grid is empty");
  require(options.test_lexical.has_value() == options.test_semantic.has_value(),
          ErrorCode::kInvalidArgument, "test lexical and semantic bundles go together");
  const PairedData train = read_pair(options.train_lexical, options.train_semantic);
  const PairedData test = options.test_lexical
                              ? read_pair(*options.test_lexical, *options.test_semantic)
                              : train;

  std::vector<AblationRow> rows;
  for (int c : options.cluster_grid) {
    TrainConfig config = options.config;
    config.n_clusters = c;
    const auto t0 = std::chrono::steady_clock::now();
    const TrainOutcome outcome =
        train_registry(train.lexical, train.semantic, train.labels, config, options.jobs);
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const PredictionQuality q =
        prediction_quality(outcome.registry, test.lexical, test.semantic, options.jobs);
    rows.push_back({c, q.cosine_mean, q.mse, q.r2, seconds});
  }

  fs::create_directories(options.out);
  write_file(options.out / "ablation.txt", format_ablation_table(rows, false));
  ordered_json arr = ordered_json::array();
  for (const auto& r : rows) {
    arr.push_back({{"clusters", r.clusters}, {"cosine_mean", r.cosine_mean}, {"mse", r.mse}, {"r2", r.r2}});
  }
  write_file(options.out / "ablation.json", arr.dump(2) + "\n");
  ordered_json timing = ordered_json::array();
  for (const auto& r : rows) timing.push_back({{"clusters", r.clusters}, {"seconds", r.seconds}});
  write_file(options.out / "timing.json", timing.dump(2) + "\n");

  ordered_json config = train_config_json(options.config);
  config["cluster_grid"] = options.cluster_grid;
  ordered_json inputs{options.train_lexical.string(), options.train_semantic.string()};
  if (options.test_lexical) {
    inputs.push_back(options.test_lexical->string());
    inputs.push_back(options.test_semantic->string());
  }
  write_manifest(options.out, "ablate-clusters", std::move(config), std::move(inputs),
                 {"ablation.txt", "ablation.json", "timing.json"}, options.config.seed);
  return rows;
}

std::string format_ablation_table(const std::vector<AblationRow>& rows, bool with_time) {
  std::string out = with_time ? "clusters  cosine_mean  mse           r2         seconds\n"
                              : "clusters  cosine_mean  mse           r2\n";
  char line[160];
  for (const auto& r : rows) {
    std::snprintf(line, sizeof line, "%-9d %-12s %-13s %-10s", r.clusters,
                  fixed(r.cosine_mean, 6).c_str(), fixed(r.mse, 8).c_str(), fixed(r.r2, 6).c_str());
    out += line;
    if (with_time) out += " " + fixed(r.seconds, 3);
    out += '\n';
  }
  return out;
}

}  // namespace kahm
