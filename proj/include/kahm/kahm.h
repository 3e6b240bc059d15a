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

#ifndef KAHM_KAHM_H_
#define KAHM_KAHM_H_

/*
 * C interface to the KAHM encoder library.
 *
 * Conventions:
 *   - Every fallible call returns kahm_status; KAHM_OK is zero.
 *   - On failure the calling thread's last-error message is set and can be
 *     read with kahm_last_error() until the next failing call on that thread.
 *   - Handles are opaque and owned by the caller; free them with the matching
 *     *_free function. Passing NULL to a free function is a no-op.
 *   - Strings returned through char** out-parameters are heap-allocated by
 *     the library and released with kahm_string_free.
 *   - Matrices are dense, row-major double arrays.
 */

#include <stddef.h>
#include <stdint.h>

#if defined(KAHM_BUILDING_LIBRARY)
#define KAHM_API __attribute__((visibility("default")))
#else
#define KAHM_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

#define KAHM_API_VERSION 1

typedef enum kahm_status {
  KAHM_OK = 0,
  KAHM_ERR_INVALID_ARGUMENT = 1,
  KAHM_ERR_DEGENERATE_DATA,
  KAHM_ERR_SINGULAR_COVARIANCE,
  KAHM_ERR_ZERO_DATA,
  KAHM_ERR_NO_CONVERGENCE,
  KAHM_ERR_UNSTABLE_DENOMINATOR,
  KAHM_ERR_TOO_FEW_SAMPLES,
  KAHM_ERR_NO_NEIGHBOR,
  KAHM_ERR_EMPTY_REGISTRY,
  KAHM_ERR_ZERO_ROW,
  KAHM_ERR_DUPLICATE_ID,
  KAHM_ERR_EMPTY_QUERY,
  KAHM_ERR_CUTOFF_TOO_LARGE,
  KAHM_ERR_MISSING_PRIOR,
  KAHM_ERR_EMPTY_INPUT,
  KAHM_ERR_MALFORMED_MANIFEST,
  KAHM_ERR_SIZE_MISMATCH,
  KAHM_ERR_NON_FINITE_VALUE,
  KAHM_ERR_BAD_MAGIC,
  KAHM_ERR_VERSION_UNSUPPORTED,
  KAHM_ERR_CORRUPT_SECTION,
  KAHM_ERR_IO_FAILURE,
  KAHM_ERR_ID_MISMATCH,
  KAHM_ERR_INTERNAL = 100
} kahm_status;

KAHM_API int kahm_api_version(void);

/* Stable identifier such as "TooFewSamples"; never NULL. */
KAHM_API const char* kahm_status_name(kahm_status status);

/* Process exit code class: 0 ok, 2 validation, 3 data, 4 numerical. */
KAHM_API int kahm_status_exit_code(kahm_status status);

/* Message of the last failure on this thread, or "" if none. */
KAHM_API const char* kahm_last_error(void);

KAHM_API void kahm_string_free(char* s);

/* ---- Encoder registry ------------------------------------------------ */

typedef struct kahm_registry kahm_registry;

KAHM_API kahm_status kahm_registry_load(const char* path, kahm_registry** out);
KAHM_API kahm_status kahm_registry_save(const kahm_registry* registry, const char* path);
KAHM_API void kahm_registry_free(kahm_registry* registry);

KAHM_API size_t kahm_registry_size(const kahm_registry* registry);
KAHM_API int kahm_registry_input_dim(const kahm_registry* registry);
KAHM_API int kahm_registry_output_dim(const kahm_registry* registry);
/* Borrowed pointer valid for the registry's lifetime; NULL if out of range. */
KAHM_API const char* kahm_registry_law_id(const kahm_registry* registry, size_t i);

/*
 * Routes x (length input_dim) to a law and writes its L2-normalized embedding
 * (length output_dim) to `embedding`. `law_index` and `score` may be NULL.
 */
KAHM_API kahm_status kahm_registry_encode(const kahm_registry* registry, const double* x,
                                          double* embedding, size_t* law_index, double* score);

/* ---- Flat inner-product index ---------------------------------------- */

typedef struct kahm_index kahm_index;

/* Rows are normalized on build. `ids` and `labels` hold `rows` strings. */
KAHM_API kahm_status kahm_index_build(const double* vectors, size_t rows, size_t cols,
                                      const char* const* ids, const char* const* labels,
                                      kahm_index** out);
KAHM_API void kahm_index_free(kahm_index* index);
KAHM_API size_t kahm_index_size(const kahm_index* index);

/* Writes k row numbers and scores in descending score order; ties by row. */
KAHM_API kahm_status kahm_index_search(const kahm_index* index, const double* query, size_t k,
                                       size_t* rows, double* scores);

/* ---- Pipeline commands ----------------------------------------------- */

typedef struct kahm_synth_options {
  const char* out_dir;
  int laws;
  int clusters;
  int lexical_dim;
  int semantic_dim;
  int samples_per_cluster;
  int test_per_cluster;
  int corpus_per_cluster;
  double sigma;
  double distortion;
  double lexical_spread;
  double corpus_spread;
  uint64_t seed;
} kahm_synth_options;

KAHM_API void kahm_synth_options_init(kahm_synth_options* options);
KAHM_API kahm_status kahm_gen_synth(const kahm_synth_options* options);

typedef struct kahm_train_options {
  const char* lexical;
  const char* semantic;
  const char* out_dir;
  int clusters;
  double validation_fraction;
  const double* omega_grid; /* NULL selects the default grid */
  size_t omega_grid_len;
  const int* k_grid; /* NULL selects the default grid */
  size_t k_grid_len;
  double beta;
  int epochs;
  uint64_t seed;
  int jobs;
} kahm_train_options;

KAHM_API void kahm_train_options_init(kahm_train_options* options);
/* `summary` (nullable) receives the per-law table. */
KAHM_API kahm_status kahm_train(const kahm_train_options* options, char** summary);

typedef struct kahm_evaluate_options {
  const char* registry;
  const char* corpus;
  const char* queries;
  const char* lexical_corpus; /* nullable */
  const char* const* comparators;
  size_t comparators_len;
  const char* out_dir;
  const size_t* cutoffs; /* NULL selects 3,5,10,15,20 */
  size_t cutoffs_len;
  double tau;
  int bootstrap;
  double alpha;
  uint64_t seed;
  int macro;
  int sweep;
  size_t sweep_k;
  int diagnostics;
  int timing;
  int jobs;
} kahm_evaluate_options;

KAHM_API void kahm_evaluate_options_init(kahm_evaluate_options* options);
/* `report` (nullable) receives the text report. */
KAHM_API kahm_status kahm_evaluate(const kahm_evaluate_options* options, char** report);

typedef struct kahm_ablate_options {
  const char* train_lexical;
  const char* train_semantic;
  const char* test_lexical;  /* nullable; pairs with test_semantic */
  const char* test_semantic; /* nullable */
  const char* out_dir;
  const int* cluster_grid; /* NULL selects 100,200,300,400 */
  size_t cluster_grid_len;
  kahm_train_options train; /* lexical, semantic, out_dir and clusters are ignored */
} kahm_ablate_options;

KAHM_API void kahm_ablate_options_init(kahm_ablate_options* options);
/* `table` (nullable) receives the ablation table including wall-clock. */
KAHM_API kahm_status kahm_ablate(const kahm_ablate_options* options, char** table);

#ifdef __cplusplus
}
#endif

#endif /* KAHM_KAHM_H_ */
