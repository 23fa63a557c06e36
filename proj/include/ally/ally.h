/* C interface to the active learning library. All handles are opaque and
 * owned by the caller; release them with the matching *_free function.
 * Every function returns ALLY_OK on success. On failure the message of the
 * most recent error on the calling thread is available from
 * ally_last_error(). Strings returned through char** are heap-allocated and
 * released with ally_string_free. */
#ifndef ALLY_ALLY_H
#define ALLY_ALLY_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define ALLY_API __declspec(dllexport)
#else
#define ALLY_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum ally_status {
  ALLY_OK = 0,
  ALLY_ERR_CONFIG = 1,
  ALLY_ERR_INPUT = 2,
  ALLY_ERR_SHAPE = 3,
  ALLY_ERR_PARSE = 4,
  ALLY_ERR_NUMERIC = 5,
  ALLY_ERR_CONTRACT = 6,
  ALLY_ERR_IO = 7,
  ALLY_ERR_NULL = 8,
  ALLY_ERR_RANGE = 9,
  ALLY_ERR_INTERNAL = 10
} ally_status;

typedef enum ally_strategy {
  ALLY_STRATEGY_ALLY = 0,
  ALLY_STRATEGY_RANDOM = 1,
  ALLY_STRATEGY_CORESET = 2,
  ALLY_STRATEGY_TOP_DUAL = 3
} ally_strategy;

typedef struct ally_config ally_config;
typedef struct ally_result ally_result;
typedef struct ally_pool ally_pool;
typedef struct ally_model ally_model;

typedef struct ally_curve_point {
  ally_strategy strategy;
  uint64_t seed;
  size_t round;
  size_t n_labeled;
  int is_accuracy; /* 1: accuracy, 0: mse */
  double metric_value;
  size_t k;
} ally_curve_point;

ALLY_API const char* ally_last_error(void);
ALLY_API const char* ally_status_string(ally_status status);
ALLY_API void ally_string_free(char* s);

/* configuration */
ALLY_API ally_status ally_config_new(ally_config** out);
ALLY_API ally_status ally_config_load(const char* path, ally_config** out);
ALLY_API ally_status ally_config_parse(const char* text, ally_config** out);
ALLY_API ally_status ally_config_set(ally_config* config, const char* key, const char* value);
ALLY_API ally_status ally_config_validate(const ally_config* config);
ALLY_API ally_status ally_config_serialize(const ally_config* config, char** out);
ALLY_API ally_status ally_config_hash(const ally_config* config, char** out);
ALLY_API size_t ally_config_seed_count(const ally_config* config);
ALLY_API void ally_config_free(ally_config* config);

/* experiments; write_outputs != 0 writes files under output_dir */
ALLY_API ally_status ally_run_experiment(const ally_config* config, int write_outputs,
                                         ally_result** out);
/* ALLY only; k = 1 and k = budget are always added */
ALLY_API ally_status ally_sweep_clusters(const ally_config* config, const size_t* k_values,
                                         size_t n_k, int write_outputs, ally_result** out);
/* gaps[i] for seed i of the config: mean over rounds of ally - random
 * (original pool in gap_original, cloned pool in gap_cloned). Arrays must hold
 * one entry per configured seed; missing cells are NaN. */
ALLY_API ally_status ally_sweep_redundancy(const ally_config* config, size_t factor,
                                           int write_outputs, double* gap_original,
                                           double* gap_cloned, size_t* dup_labeled_cloned);
ALLY_API size_t ally_result_point_count(const ally_result* result);
ALLY_API ally_status ally_result_point(const ally_result* result, size_t i, ally_curve_point* out);
ALLY_API size_t ally_result_failed_cells(const ally_result* result);
ALLY_API ally_status ally_result_curves_csv(const ally_result* result, char** out);
ALLY_API ally_status ally_result_meta_json(const ally_result* result, char** out);
ALLY_API double ally_result_wall_seconds(const ally_result* result);
ALLY_API void ally_result_free(ally_result* result);

/* duality lab: JSON report, *passed set to 1 when every check holds */
ALLY_API ally_status ally_verify_duality(size_t n_instances, uint64_t seed, char** report_json,
                                         int* passed);

/* generation mode: JSON summary of the trajectories */
ALLY_API ally_status ally_generate(const ally_config* config, int write_outputs, char** summary_json);

/* pools */
ALLY_API ally_status ally_pool_load(const ally_config* config, ally_pool** out);
ALLY_API ally_status ally_pool_split_initial(ally_pool* pool, size_t n_initial, uint64_t seed);
ALLY_API ally_status ally_pool_clone(const ally_pool* pool, size_t factor, ally_pool** out);
ALLY_API ally_status ally_pool_move_to_labeled(ally_pool* pool, const size_t* positions, size_t n);
ALLY_API size_t ally_pool_size(const ally_pool* pool);
ALLY_API size_t ally_pool_dim(const ally_pool* pool);
ALLY_API size_t ally_pool_labeled_count(const ally_pool* pool);
ALLY_API size_t ally_pool_unlabeled_count(const ally_pool* pool);
ALLY_API size_t ally_pool_test_count(const ally_pool* pool);
ALLY_API void ally_pool_free(ally_pool* pool);

/* models trained on the labeled rows of a pool */
ALLY_API ally_status ally_model_train(const ally_pool* pool, const ally_config* config, uint64_t seed,
                                      int with_dual_head, ally_model** out);
ALLY_API size_t ally_model_embedding_dim(const ally_model* model);
ALLY_API double ally_model_violation_fraction(const ally_model* model);
ALLY_API ally_status ally_model_report_json(const ally_model* model, char** out);
/* x is n x input_dim row-major; out receives n x embedding_dim */
ALLY_API ally_status ally_model_embed(const ally_model* model, const double* x, size_t n, size_t dim,
                                      double* out);
/* out receives n x output_dim */
ALLY_API ally_status ally_model_predict(const ally_model* model, const double* x, size_t n,
                                        size_t dim, double* out);
ALLY_API ally_status ally_model_predict_duals(const ally_model* model, const double* x, size_t n,
                                             size_t dim, double* out);
ALLY_API ally_status ally_model_test_metric(const ally_model* model, const ally_pool* pool,
                                            double* out);
ALLY_API void ally_model_free(ally_model* model);

/* selection on raw row-major embeddings; selected positions are written to
 * out_indices (capacity b), their count to *out_count */
ALLY_API ally_status ally_kmeans(const double* points, size_t n, size_t dim, size_t k, uint64_t seed,
                                 size_t* assignment, double* centroids, double* inertia);
ALLY_API ally_status ally_select_ally(const double* embeddings, size_t n, size_t dim,
                                      const double* duals, size_t b, size_t k, uint64_t seed,
                                      size_t* out_indices, size_t* out_count);
ALLY_API ally_status ally_select_random(size_t n, size_t b, uint64_t seed, size_t* out_indices,
                                        size_t* out_count);
ALLY_API ally_status ally_select_coreset(const double* labeled, size_t n_labeled,
                                         const double* unlabeled, size_t n_unlabeled, size_t dim,
                                         size_t b, size_t* out_indices, size_t* out_count);

#ifdef __cplusplus
}
#endif

#endif /* ALLY_ALLY_H */
