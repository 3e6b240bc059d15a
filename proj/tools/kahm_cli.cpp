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

// kahm: command-line driver over the C interface.

#include "kahm/kahm.h"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace {

constexpr int kExitValidation = 2;

void emit_error(const std::string& command, const std::string& name, const std::string& message,
                int exit_code) {
  nlohmann::ordered_json rec{{"command", command},
                             {"error", name},
                             {"message", message},
                             {"exit_code", exit_code}};
  std::cerr << rec.dump() << '\n';
}

int finish(const std::string& command, kahm_status status, char* text) {
  if (status != KAHM_OK) {
    const int code = kahm_status_exit_code(status);
    emit_error(command, kahm_status_name(status), kahm_last_error(), code);
    return code;
  }
  if (text) std::cout << text;
  kahm_string_free(text);
  return 0;
}

int default_jobs() {
  const char* env = std::getenv("KAHM_JOBS");
  if (!env || !*env) return 1;
  try {
    const int v = std::stoi(env);
    return v >= 1 ? v : 1;
  } catch (...) {
    return 1;
  }
}

struct TrainFlags {
  int clusters = 300;
  double val_frac = 0.05;
  std::vector<double> omega_grid;
  std::vector<int> k_grid;
  double beta = 0.1;
  int epochs = 20;
  std::uint64_t seed = 0;
  int jobs = 1;

  void add(CLI::App* app) {
    app->add_option("--val-frac", val_frac, "Validation fraction")->capture_default_str();
    app->add_option("--omega-grid", omega_grid, "Comma-separated sharpening exponents")
        ->delimiter(',');
    app->add_option("--k-grid", k_grid, "Comma-separated truncation sizes")->delimiter(',');
    app->add_option("--beta", beta, "NLMS step size")->capture_default_str();
    app->add_option("--epochs", epochs, "NLMS epochs")->capture_default_str();
    app->add_option("--seed", seed, "Random seed")->capture_default_str();
    app->add_option("--jobs", jobs, "Parallel laws (default from KAHM_JOBS)")->capture_default_str();
  }

  void apply(kahm_train_options& o) const {
    o.clusters = clusters;
    o.validation_fraction = val_frac;
    if (!omega_grid.empty()) {
      o.omega_grid = omega_grid.data();
      o.omega_grid_len = omega_grid.size();
    }
    if (!k_grid.empty()) {
      o.k_grid = k_grid.data();
      o.k_grid_len = k_grid.size();
    }
    o.beta = beta;
    o.epochs = epochs;
    o.seed = seed;
    o.jobs = jobs;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"KAHM law-specific encoder pipeline"};
  app.require_subcommand(1);

  // gen-synth
  kahm_synth_options synth;
  kahm_synth_options_init(&synth);
  std::string synth_out;
  auto* gen = app.add_subcommand("gen-synth", "Generate a seeded synthetic benchmark");
  gen->add_option("--out", synth_out, "Output directory")->required();
  gen->add_option("--laws", synth.laws, "Number of laws")->capture_default_str();
  gen->add_option("--clusters", synth.clusters, "Clusters per law")->capture_default_str();
  gen->add_option("--lexical-dim", synth.lexical_dim, "Lexical dimension")->capture_default_str();
  gen->add_option("--semantic-dim", synth.semantic_dim, "Semantic dimension")->capture_default_str();
  gen->add_option("--samples-per-cluster", synth.samples_per_cluster, "Training rows per cluster")->capture_default_str();
  gen->add_option("--test-per-cluster", synth.test_per_cluster, "Query rows per cluster")->capture_default_str();
  gen->add_option("--corpus-per-cluster", synth.corpus_per_cluster, "Corpus units per cluster")->capture_default_str();
  gen->add_option("--sigma", synth.sigma, "Teacher noise level")->capture_default_str();
  gen->add_option("--distortion", synth.distortion, "Query-side lexical distortion")
      ->capture_default_str();
  gen->add_option("--lexical-spread", synth.lexical_spread, "Within-cluster lexical noise")->capture_default_str();
  gen->add_option("--corpus-spread", synth.corpus_spread, "Corpus unit noise around prototypes")->capture_default_str();
  gen->add_option("--seed", synth.seed, "Random seed")->capture_default_str();

  // train
  TrainFlags train_flags;
  train_flags.jobs = default_jobs();
  std::string train_lex, train_sem, train_out;
  auto* train = app.add_subcommand("train", "Train one encoder per law into a registry");
  train->add_option("--lexical", train_lex, "Lexical bundle manifest (labels name laws)")
      ->required();
  train->add_option("--semantic", train_sem, "Semantic target bundle manifest")->required();
  train->add_option("--out", train_out, "Output directory")->required();
  train->add_option("--clusters", train_flags.clusters, "Clusters per law")->capture_default_str();
  train_flags.add(train);

  // evaluate
  kahm_evaluate_options ev;
  kahm_evaluate_options_init(&ev);
  ev.jobs = default_jobs();
  std::string ev_registry, ev_corpus, ev_queries, ev_out;
  std::optional<std::string> ev_lexical;
  std::vector<std::string> ev_runs;
  std::vector<std::size_t> ev_cutoffs{3, 5, 10, 15, 20};
  bool no_diag = false;
  bool no_timing = false;
  bool ev_macro = false;
  bool ev_sweep = false;
  auto* evaluate = app.add_subcommand("evaluate", "Encode, search and score a query set");
  evaluate->add_option("--registry", ev_registry, "Registry file")->required();
  evaluate->add_option("--corpus", ev_corpus, "Semantic corpus bundle manifest")->required();
  evaluate->add_option("--queries", ev_queries, "Lexical query bundle (labels are gold laws)")
      ->required();
  evaluate->add_option("--lexical-corpus", ev_lexical, "Adds a lexical-space baseline");
  evaluate->add_option("--run", ev_runs, "Comparator run file (repeatable)");
  evaluate->add_option("--out", ev_out, "Output directory")->required();
  evaluate->add_option("--cutoffs", ev_cutoffs, "Comma-separated cutoffs")
      ->delimiter(',')
      ->capture_default_str();
  evaluate->add_option("--tau", ev.tau, "Predominance threshold")->capture_default_str();
  evaluate->add_option("--bootstrap", ev.bootstrap, "Bootstrap resamples")->capture_default_str();
  evaluate->add_option("--alpha", ev.alpha, "Two-sided interval level")->capture_default_str();
  evaluate->add_option("--seed", ev.seed, "Bootstrap seed")->capture_default_str();
  evaluate->add_flag("--macro", ev_macro, "Also report law-level macro averages");
  evaluate->add_flag("--sweep", ev_sweep, "Report the routing-threshold sweep");
  evaluate->add_option("--sweep-k", ev.sweep_k, "Cutoff used by the sweep")->capture_default_str();
  evaluate->add_flag("--no-diagnostics", no_diag, "Skip the L2-mass diagnostic");
  evaluate->add_flag("--no-timing", no_timing, "Skip the timing profile");
  evaluate->add_option("--jobs", ev.jobs, "Parallel queries (default from KAHM_JOBS)")
      ->capture_default_str();

  // ablate-clusters
  TrainFlags ab_flags;
  ab_flags.jobs = default_jobs();
  std::string ab_lex, ab_sem, ab_out;
  std::optional<std::string> ab_test_lex, ab_test_sem;
  std::vector<int> ab_grid{100, 200, 300, 400};
  auto* ablate = app.add_subcommand("ablate-clusters", "Train and score one registry per cluster count");
  ablate->add_option("--lexical", ab_lex, "Training lexical bundle")->required();
  ablate->add_option("--semantic", ab_sem, "Training semantic bundle")->required();
  ablate->add_option("--test-lexical", ab_test_lex, "Held-out lexical bundle");
  ablate->add_option("--test-semantic", ab_test_sem, "Held-out semantic bundle");
  ablate->add_option("--cluster-grid", ab_grid, "Comma-separated cluster counts")
      ->delimiter(',')
      ->capture_default_str();
  ablate->add_option("--out", ab_out, "Output directory")->required();
  ab_flags.add(ablate);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    const std::string cmd = app.get_subcommands().empty() ? "" : app.get_subcommands()[0]->get_name();
    emit_error(cmd, "InvalidArgument", e.what(), kExitValidation);
    return kExitValidation;
  }

  if (gen->parsed()) {
    synth.out_dir = synth_out.c_str();
    return finish("gen-synth", kahm_gen_synth(&synth), nullptr);
  }

  if (train->parsed()) {
    kahm_train_options o;
    kahm_train_options_init(&o);
    train_flags.apply(o);
    o.lexical = train_lex.c_str();
    o.semantic = train_sem.c_str();
    o.out_dir = train_out.c_str();
    char* summary = nullptr;
    const kahm_status s = kahm_train(&o, &summary);
    return finish("train", s, summary);
  }

  if (evaluate->parsed()) {
    std::vector<const char*> runs;
    for (const auto& r : ev_runs) runs.push_back(r.c_str());
    ev.registry = ev_registry.c_str();
    ev.corpus = ev_corpus.c_str();
    ev.queries = ev_queries.c_str();
    ev.lexical_corpus = ev_lexical ? ev_lexical->c_str() : nullptr;
    ev.comparators = runs.data();
    ev.comparators_len = runs.size();
    ev.out_dir = ev_out.c_str();
    ev.cutoffs = ev_cutoffs.data();
    ev.cutoffs_len = ev_cutoffs.size();
    ev.macro = ev_macro ? 1 : 0;
    ev.sweep = ev_sweep ? 1 : 0;
    ev.diagnostics = no_diag ? 0 : 1;
    ev.timing = no_timing ? 0 : 1;
    char* report = nullptr;
    const kahm_status s = kahm_evaluate(&ev, &report);
    return finish("evaluate", s, report);
  }

  kahm_ablate_options o;
  kahm_ablate_options_init(&o);
  ab_flags.apply(o.train);
  o.train_lexical = ab_lex.c_str();
  o.train_semantic = ab_sem.c_str();
  o.test_lexical = ab_test_lex ? ab_test_lex->c_str() : nullptr;
  o.test_semantic = ab_test_sem ? ab_test_sem->c_str() : nullptr;
  o.cluster_grid = ab_grid.data();
  o.cluster_grid_len = ab_grid.size();
  o.out_dir = ab_out.c_str();
  char* table = nullptr;
  const kahm_status s = kahm_ablate(&o, &table);
  return finish("ablate-clusters", s, table);
}
