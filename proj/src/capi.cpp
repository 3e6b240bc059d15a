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

#include "kahm/kahm.h"

#include "kahm/pipeline.hpp"

#include <cstdlib>
#include <cstring>
#include <new>

struct kahm_registry {
  kahm::EncoderRegistry impl;
};

struct kahm_index {
  kahm::FlatIndex impl;
};

namespace {

static_assert(static_cast<int>(kahm::ErrorCode::kInvalidArgument) == KAHM_ERR_INVALID_ARGUMENT);
static_assert(static_cast<int>(kahm::ErrorCode::kTooFewSamples) == KAHM_ERR_TOO_FEW_SAMPLES);
static_assert(static_cast<int>(kahm::ErrorCode::kMalformedManifest) == KAHM_ERR_MALFORMED_MANIFEST);
static_assert(static_cast<int>(kahm::ErrorCode::kIdMismatch) == KAHM_ERR_ID_MISMATCH);

thread_local std::string g_last_error;

kahm_status set_error(kahm_status status, const char* message) {
  g_last_error = message;
  return status;
}

template <typename Fn>
kahm_status guarded(Fn&& fn) {
  try {
    fn();
    return KAHM_OK;
  } catch (const kahm::Error& e) {
    return set_error(static_cast<kahm_status>(e.code()), e.what());
  } catch (const std::bad_alloc&) {
    return set_error(KAHM_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return set_error(KAHM_ERR_INTERNAL, e.what());
  } catch (...) {
    return set_error(KAHM_ERR_INTERNAL, "unknown failure");
  }
}

void require_arg(bool cond, const char* what) {
  kahm::require(cond, kahm::ErrorCode::kInvalidArgument, what);
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

kahm::TrainConfig train_config(const kahm_train_options& o) {
  kahm::TrainConfig c;
  c.n_clusters = o.clusters;
  c.validation_fraction = o.validation_fraction;
  if (o.omega_grid) c.omega_grid.assign(o.omega_grid, o.omega_grid + o.omega_grid_len);
  if (o.k_grid) c.k_grid.assign(o.k_grid, o.k_grid + o.k_grid_len);
  c.nlms_step = o.beta;
  c.nlms_epochs = o.epochs;
  c.seed = o.seed;
  c.validate();
  return c;
}

}  // namespace

extern "C" {

int kahm_api_version(void) { return KAHM_API_VERSION; }

const char* kahm_status_name(kahm_status status) {
  if (status == KAHM_OK) return "Ok";
  if (status == KAHM_ERR_INTERNAL) return "Internal";
  if (status < KAHM_ERR_INVALID_ARGUMENT || status > KAHM_ERR_ID_MISMATCH) return "Unknown";
  // error_name returns views of string literals, so data() is terminated.
  return kahm::error_name(static_cast<kahm::ErrorCode>(status)).data();
}

int kahm_status_exit_code(kahm_status status) {
  if (status == KAHM_OK) return 0;
  if (status < KAHM_ERR_INVALID_ARGUMENT || status > KAHM_ERR_ID_MISMATCH) return 3;
  return kahm::error_exit_class(static_cast<kahm::ErrorCode>(status));
}

const char* kahm_last_error(void) { return g_last_error.c_str(); }

void kahm_string_free(char* s) { std::free(s); }

kahm_status kahm_registry_load(const char* path, kahm_registry** out) {
  return guarded([&] {
    require_arg(path && out, "path and out must not be NULL");
    *out = nullptr;
    auto handle = std::make_unique<kahm_registry>();
    handle->impl = kahm::load_registry(path);
    *out = handle.release();
  });
}

kahm_status kahm_registry_save(const kahm_registry* registry, const char* path) {
  return guarded([&] {
    require_arg(registry && path, "registry and path must not be NULL");
    kahm::save_registry(registry->impl, path);
  });
}

void kahm_registry_free(kahm_registry* registry) { delete registry; }

size_t kahm_registry_size(const kahm_registry* registry) {
  return registry ? registry->impl.size() : 0;
}

int kahm_registry_input_dim(const kahm_registry* registry) {
  return registry && !registry->impl.empty() ? registry->impl.input_dim() : 0;
}

int kahm_registry_output_dim(const kahm_registry* registry) {
  return registry && !registry->impl.empty() ? registry->impl.output_dim() : 0;
}

const char* kahm_registry_law_id(const kahm_registry* registry, size_t i) {
  if (!registry || i >= registry->impl.size()) return nullptr;
  return registry->impl.entries()[i].law_id.c_str();
}

kahm_status kahm_registry_encode(const kahm_registry* registry, const double* x,
                                 double* embedding, size_t* law_index, double* score) {
  return guarded([&] {
    require_arg(registry && x && embedding, "registry, x and embedding must not be NULL");
    const int n = registry->impl.input_dim();
    const Eigen::Map<const kahm::Vector> xv(x, n);
    const kahm::EncodedQuery q = kahm::encode_query(registry->impl, xv);
    std::copy(q.embedding.data(), q.embedding.data() + q.embedding.size(), embedding);
    if (law_index) *law_index = q.entry;
    if (score) *score = q.score;
  });
}

kahm_status kahm_index_build(const double* vectors, size_t rows, size_t cols,
                             const char* const* ids, const char* const* labels,
                             kahm_index** out) {
  return guarded([&] {
    require_arg(vectors && ids && labels && out, "index inputs must not be NULL");
    *out = nullptr;
    kahm::Matrix m = Eigen::Map<const kahm::Matrix>(vectors, static_cast<Eigen::Index>(rows),
                                                    static_cast<Eigen::Index>(cols));
    std::vector<std::string> id_list(ids, ids + rows);
    std::vector<std::string> label_list(labels, labels + rows);
    auto handle = std::make_unique<kahm_index>();
    handle->impl = kahm::build_index(std::move(m), std::move(id_list), std::move(label_list));
    *out = handle.release();
  });
}

void kahm_index_free(kahm_index* index) { delete index; }

size_t kahm_index_size(const kahm_index* index) { return index ? index->impl.size() : 0; }

kahm_status kahm_index_search(const kahm_index* index, const double* query, size_t k,
                              size_t* rows, double* scores) {
  return guarded([&] {
    require_arg(index && query && rows, "index, query and rows must not be NULL");
    const Eigen::Map<const kahm::Vector> q(query, index->impl.dim());
    const auto hits = kahm::search(index->impl, q, k);
    for (std::size_t i = 0; i < hits.size(); ++i) {
      rows[i] = hits[i].row;
      if (scores) scores[i] = hits[i].score;
    }
  });
}

void kahm_synth_options_init(kahm_synth_options* o) {
  if (!o) return;
  const kahm::SyntheticSpec s;
  *o = kahm_synth_options{};
  o->laws = s.n_laws;
  o->clusters = s.clusters_per_law;
  o->lexical_dim = s.lexical_dim;
  o->semantic_dim = s.semantic_dim;
  o->samples_per_cluster = s.samples_per_cluster;
  o->test_per_cluster = s.test_per_cluster;
  o->corpus_per_cluster = s.corpus_per_cluster;
  o->sigma = s.teacher_noise_sigma;
  o->distortion = s.lexical_distortion;
  o->lexical_spread = s.lexical_spread;
  o->corpus_spread = s.corpus_spread;
  o->seed = s.seed;
}

kahm_status kahm_gen_synth(const kahm_synth_options* o) {
  return guarded([&] {
    require_arg(o && o->out_dir, "options and out_dir must not be NULL");
    kahm::GenSynthOptions g;
    g.out = o->out_dir;
    g.spec.n_laws = o->laws;
    g.spec.clusters_per_law = o->clusters;
    g.spec.lexical_dim = o->lexical_dim;
    g.spec.semantic_dim = o->semantic_dim;
    g.spec.samples_per_cluster = o->samples_per_cluster;
    g.spec.test_per_cluster = o->test_per_cluster;
    g.spec.corpus_per_cluster = o->corpus_per_cluster;
    g.spec.teacher_noise_sigma = o->sigma;
    g.spec.lexical_distortion = o->distortion;
    g.spec.lexical_spread = o->lexical_spread;
    g.spec.corpus_spread = o->corpus_spread;
    g.spec.seed = o->seed;
    kahm::run_gen_synth(g);
  });
}

void kahm_train_options_init(kahm_train_options* o) {
  if (!o) return;
  const kahm::TrainConfig c;
  *o = kahm_train_options{};
  o->clusters = c.n_clusters;
  o->validation_fraction = c.validation_fraction;
  o->beta = c.nlms_step;
  o->epochs = c.nlms_epochs;
  o->seed = c.seed;
  o->jobs = 1;
}

kahm_status kahm_train(const kahm_train_options* o, char** summary) {
  if (summary) *summary = nullptr;
  return guarded([&] {
    require_arg(o && o->lexical && o->semantic && o->out_dir,
                "lexical, semantic and out_dir must be set");
    kahm::TrainOptions t;
    t.lexical = o->lexical;
    t.semantic = o->semantic;
    t.out = o->out_dir;
    t.config = train_config(*o);
    t.jobs = o->jobs;
    const auto outcome = kahm::run_train(t);
    if (summary) *summary = dup_string(kahm::format_train_table(outcome.laws));
  });
}

void kahm_evaluate_options_init(kahm_evaluate_options* o) {
  if (!o) return;
  const kahm::EvalOptions e;
  *o = kahm_evaluate_options{};
  o->tau = e.tau;
  o->bootstrap = e.bootstrap.resamples;
  o->alpha = e.bootstrap.alpha;
  o->seed = e.bootstrap.seed;
  o->sweep_k = e.sweep_k;
  o->diagnostics = 1;
  o->timing = 1;
  o->jobs = 1;
}

kahm_status kahm_evaluate(const kahm_evaluate_options* o, char** report) {
  if (report) *report = nullptr;
  return guarded([&] {
    require_arg(o && o->registry && o->corpus && o->queries && o->out_dir,
                "registry, corpus, queries and out_dir must be set");
    require_arg(o->comparators_len == 0 || o->comparators, "comparators must not be NULL");
    kahm::EvaluateOptions e;
    e.registry = o->registry;
    e.corpus = o->corpus;
    e.queries = o->queries;
    if (o->lexical_corpus) e.lexical_corpus = o->lexical_corpus;
    for (size_t i = 0; i < o->comparators_len; ++i) e.comparators.emplace_back(o->comparators[i]);
    e.out = o->out_dir;
    if (o->cutoffs) e.eval.cutoffs.assign(o->cutoffs, o->cutoffs + o->cutoffs_len);
    e.eval.tau = o->tau;
    e.eval.bootstrap.resamples = o->bootstrap;
    e.eval.bootstrap.alpha = o->alpha;
    e.eval.bootstrap.seed = o->seed;
    e.eval.macro = o->macro != 0;
    e.eval.sweep = o->sweep != 0;
    e.eval.sweep_k = o->sweep_k;
    e.diagnostics = o->diagnostics != 0;
    e.timing = o->timing != 0;
    e.jobs = o->jobs;
    const auto outcome = kahm::run_evaluate(e);
    if (report) *report = dup_string(kahm::format_report(outcome.report));
  });
}

void kahm_ablate_options_init(kahm_ablate_options* o) {
  if (!o) return;
  *o = kahm_ablate_options{};
  kahm_train_options_init(&o->train);
}

kahm_status kahm_ablate(const kahm_ablate_options* o, char** table) {
  if (table) *table = nullptr;
  return guarded([&] {
    require_arg(o && o->train_lexical && o->train_semantic && o->out_dir,
                "training bundles and out_dir must be set");
    kahm::AblateOptions a;
    a.train_lexical = o->train_lexical;
    a.train_semantic = o->train_semantic;
    if (o->test_lexical) a.test_lexical = o->test_lexical;
    if (o->test_semantic) a.test_semantic = o->test_semantic;
    if (o->cluster_grid) a.cluster_grid.assign(o->cluster_grid, o->cluster_grid + o->cluster_grid_len);
    a.config = train_config(o->train);
    a.out = o->out_dir;
    a.jobs = o->train.jobs;
    const auto rows = kahm::run_ablate(a);
    if (table) *table = dup_string(kahm::format_ablation_table(rows));
  });
}

}  // extern "C"
