#include "ally/ally.h"

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <limits>
#include <string>

#include "ally/error.hpp"
#include "ally/harness.hpp"
#include "ally/report_json.hpp"

struct ally_config {
  ally::ExperimentConfig value;
};

struct ally_result {
  ally::ExperimentResult value;
  ally::ExperimentConfig config;
};

struct ally_pool {
  ally::Pool value;
};

struct ally_model {
  ally::TrainedModel value;
};

namespace {

thread_local std::string last_error;

ally_status status_of(ally::ErrorKind kind) {
  switch (kind) {
    case ally::ErrorKind::config: return ALLY_ERR_CONFIG;
    case ally::ErrorKind::input: return ALLY_ERR_INPUT;
    case ally::ErrorKind::shape: return ALLY_ERR_SHAPE;
    case ally::ErrorKind::parse: return ALLY_ERR_PARSE;
    case ally::ErrorKind::numeric: return ALLY_ERR_NUMERIC;
    case ally::ErrorKind::contract: return ALLY_ERR_CONTRACT;
    case ally::ErrorKind::io: return ALLY_ERR_IO;
  }
  return ALLY_ERR_INTERNAL;
}

template <class F>
ally_status guard(F&& f) {
  try {
    f();
    last_error.clear();
    return ALLY_OK;
  } catch (const ally::Error& e) {
    last_error = e.what();
    return status_of(e.kind());
  } catch (const nlohmann::json::exception& e) {
    last_error = e.what();
    return ALLY_ERR_PARSE;
  } catch (const std::exception& e) {
    last_error = e.what();
    return ALLY_ERR_INTERNAL;
  } catch (...) {
    last_error = "unknown error";
    return ALLY_ERR_INTERNAL;
  }
}

#define ALLY_NOT_NULL(p)                                   \
  do {                                                     \
    if (!(p)) {                                            \
      last_error = "null argument: " #p;                   \
      return ALLY_ERR_NULL;                                \
    }                                                      \
  } while (0)

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

ally::Matrix view(const double* x, std::size_t n, std::size_t dim) {
  return ally::Matrix(n, dim, std::vector<double>(x, x + n * dim));
}

void copy_out(const ally::Matrix& m, double* out) { std::memcpy(out, m.values().data(), m.size() * sizeof(double)); }

void write_indices(const ally::QueryBatch& batch, std::size_t* out, std::size_t* count) {
  for (std::size_t i = 0; i < batch.indices.size(); ++i) out[i] = batch.indices[i];
  *count = batch.indices.size();
}

ally_strategy c_strategy(ally::Strategy s) {
  switch (s) {
    case ally::Strategy::ally: return ALLY_STRATEGY_ALLY;
    case ally::Strategy::random: return ALLY_STRATEGY_RANDOM;
    case ally::Strategy::coreset: return ALLY_STRATEGY_CORESET;
    case ally::Strategy::top_dual: return ALLY_STRATEGY_TOP_DUAL;
  }
  return ALLY_STRATEGY_RANDOM;
}

}  // namespace

extern "C" {

const char* ally_last_error(void) { return last_error.c_str(); }

const char* ally_status_string(ally_status status) {
  switch (status) {
    case ALLY_OK: return "ok";
    case ALLY_ERR_CONFIG: return "config error";
    case ALLY_ERR_INPUT: return "input error";
    case ALLY_ERR_SHAPE: return "shape error";
    case ALLY_ERR_PARSE: return "parse error";
    case ALLY_ERR_NUMERIC: return "numeric error";
    case ALLY_ERR_CONTRACT: return "contract error";
    case ALLY_ERR_IO: return "io error";
    case ALLY_ERR_NULL: return "null argument";
    case ALLY_ERR_RANGE: return "index out of range";
    case ALLY_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

void ally_string_free(char* s) { std::free(s); }

// ---------------------------------------------------------------- config

ally_status ally_config_new(ally_config** out) {
  ALLY_NOT_NULL(out);
  return guard([&] { *out = new ally_config{ally::default_config()}; });
}

ally_status ally_config_load(const char* path, ally_config** out) {
  ALLY_NOT_NULL(path);
  ALLY_NOT_NULL(out);
  return guard([&] { *out = new ally_config{ally::load_config(path)}; });
}

ally_status ally_config_parse(const char* text, ally_config** out) {
  ALLY_NOT_NULL(text);
  ALLY_NOT_NULL(out);
  return guard([&] { *out = new ally_config{ally::parse_config(text)}; });
}

ally_status ally_config_set(ally_config* config, const char* key, const char* value) {
  ALLY_NOT_NULL(config);
  ALLY_NOT_NULL(key);
  ALLY_NOT_NULL(value);
  return guard([&] { ally::apply_setting(config->value, key, value); });
}

ally_status ally_config_validate(const ally_config* config) {
  ALLY_NOT_NULL(config);
  return guard([&] { config->value.validate(); });
}

ally_status ally_config_serialize(const ally_config* config, char** out) {
  ALLY_NOT_NULL(config);
  ALLY_NOT_NULL(out);
  return guard([&] { *out = dup_string(ally::serialize_config(config->value)); });
}

ally_status ally_config_hash(const ally_config* config, char** out) {
  ALLY_NOT_NULL(config);
  ALLY_NOT_NULL(out);
  return guard([&] { *out = dup_string(ally::config_hash(config->value)); });
}

size_t ally_config_seed_count(const ally_config* config) {
  return config ? config->value.seeds.size() : 0;
}

void ally_config_free(ally_config* config) { delete config; }

// ---------------------------------------------------------------- experiments

ally_status ally_run_experiment(const ally_config* config, int write_outputs, ally_result** out) {
  ALLY_NOT_NULL(config);
  ALLY_NOT_NULL(out);
  return guard([&] {
    *out = new ally_result{ally::run_experiment(config->value, write_outputs != 0), config->value};
  });
}

ally_status ally_sweep_clusters(const ally_config* config, const size_t* k_values, size_t n_k,
                                int write_outputs, ally_result** out) {
  ALLY_NOT_NULL(config);
  ALLY_NOT_NULL(out);
  if (n_k > 0) ALLY_NOT_NULL(k_values);
  return guard([&] {
    const std::vector<std::size_t> ks(k_values, k_values + n_k);
    const auto runs = ally::sweep_clusters(config->value, ks, write_outputs != 0);
    auto* r = new ally_result{{}, config->value};
    r->value.config_hash = ally::config_hash(config->value);
    for (const auto& [k, run] : runs) {
      r->value.points.insert(r->value.points.end(), run.points.begin(), run.points.end());
      r->value.cells.insert(r->value.cells.end(), run.cells.begin(), run.cells.end());
      r->value.wall_seconds += run.wall_seconds;
    }
    r->value.summary = ally::summarize(r->value.points);
    *out = r;
  });
}

ally_status ally_sweep_redundancy(const ally_config* config, size_t factor, int write_outputs,
                                  double* gap_original, double* gap_cloned,
                                  size_t* dup_labeled_cloned) {
  ALLY_NOT_NULL(config);
  return guard([&] {
    const auto cmp = ally::sweep_redundancy(config->value, factor, write_outputs != 0);
    const auto& seeds = config->value.seeds;
    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (std::size_t i = 0; i < seeds.size(); ++i) {
      const auto a = cmp.gap_original.find(seeds[i]);
      const auto b = cmp.gap_cloned.find(seeds[i]);
      if (gap_original) gap_original[i] = a == cmp.gap_original.end() ? nan : a->second;
      if (gap_cloned) gap_cloned[i] = b == cmp.gap_cloned.end() ? nan : b->second;
    }
    if (dup_labeled_cloned) *dup_labeled_cloned = cmp.dup_labeled_cloned;
  });
}

size_t ally_result_point_count(const ally_result* result) {
  return result ? result->value.points.size() : 0;
}

ally_status ally_result_point(const ally_result* result, size_t i, ally_curve_point* out) {
  ALLY_NOT_NULL(result);
  ALLY_NOT_NULL(out);
  if (i >= result->value.points.size()) {
    last_error = "curve point index out of range";
    return ALLY_ERR_RANGE;
  }
  const auto& p = result->value.points[i];
  out->strategy = c_strategy(p.strategy);
  out->seed = p.seed;
  out->round = p.round;
  out->n_labeled = p.n_labeled;
  out->is_accuracy = p.metric_name == "accuracy";
  out->metric_value = p.metric_value;
  out->k = p.k;
  return ALLY_OK;
}

size_t ally_result_failed_cells(const ally_result* result) {
  if (!result) return 0;
  std::size_t n = 0;
  for (const auto& c : result->value.cells) n += !c.ok;
  return n;
}

ally_status ally_result_curves_csv(const ally_result* result, char** out) {
  ALLY_NOT_NULL(result);
  ALLY_NOT_NULL(out);
  return guard([&] { *out = dup_string(ally::curves_csv(result->value.points)); });
}

ally_status ally_result_meta_json(const ally_result* result, char** out) {
  ALLY_NOT_NULL(result);
  ALLY_NOT_NULL(out);
  return guard([&] { *out = dup_string(ally::experiment_meta(result->value, result->config).dump(2)); });
}

double ally_result_wall_seconds(const ally_result* result) {
  return result ? result->value.wall_seconds : 0.0;
}

void ally_result_free(ally_result* result) { delete result; }

ally_status ally_verify_duality(size_t n_instances, uint64_t seed, char** report_json, int* passed) {
  return guard([&] {
    const auto report = ally::verify_duality(n_instances, seed);
    if (report_json) *report_json = dup_string(ally::to_json(report).dump(2));
    if (passed) *passed = report.passed ? 1 : 0;
  });
}

ally_status ally_generate(const ally_config* config, int write_outputs, char** summary_json) {
  ALLY_NOT_NULL(config);
  return guard([&] {
    const auto result = ally::run_generate(config->value, write_outputs != 0);
    if (summary_json) {
      nlohmann::json j = {{"clip_lo", result.clip_lo},
                          {"clip_hi", result.clip_hi},
                          {"start_rows", result.start_rows}};
      j["trajectories"] = nlohmann::json::array();
      for (const auto& t : result.trajectories) j["trajectories"].push_back(ally::to_json(t));
      *summary_json = dup_string(j.dump(2));
    }
  });
}

// ---------------------------------------------------------------- pools

ally_status ally_pool_load(const ally_config* config, ally_pool** out) {
  ALLY_NOT_NULL(config);
  ALLY_NOT_NULL(out);
  return guard([&] { *out = new ally_pool{ally::load_dataset(config->value.dataset)}; });
}

ally_status ally_pool_split_initial(ally_pool* pool, size_t n_initial, uint64_t seed) {
  ALLY_NOT_NULL(pool);
  return guard([&] { pool->value = ally::split_initial(pool->value, n_initial, seed); });
}

ally_status ally_pool_clone(const ally_pool* pool, size_t factor, ally_pool** out) {
  ALLY_NOT_NULL(pool);
  ALLY_NOT_NULL(out);
  return guard([&] { *out = new ally_pool{ally::clone_redundant(pool->value, factor)}; });
}

ally_status ally_pool_move_to_labeled(ally_pool* pool, const size_t* positions, size_t n) {
  ALLY_NOT_NULL(pool);
  if (n > 0) ALLY_NOT_NULL(positions);
  return guard([&] {
    pool->value = ally::move_to_labeled(pool->value, std::vector<std::size_t>(positions, positions + n));
  });
}

size_t ally_pool_size(const ally_pool* pool) { return pool ? pool->value.size() : 0; }
size_t ally_pool_dim(const ally_pool* pool) { return pool ? pool->value.dim() : 0; }
size_t ally_pool_labeled_count(const ally_pool* pool) { return pool ? pool->value.labeled_idx.size() : 0; }
size_t ally_pool_unlabeled_count(const ally_pool* pool) {
  return pool ? pool->value.unlabeled_idx.size() : 0;
}
size_t ally_pool_test_count(const ally_pool* pool) { return pool ? pool->value.test_features.rows() : 0; }
void ally_pool_free(ally_pool* pool) { delete pool; }

// ---------------------------------------------------------------- models

ally_status ally_model_train(const ally_pool* pool, const ally_config* config, uint64_t seed,
                             int with_dual_head, ally_model** out) {
  ALLY_NOT_NULL(pool);
  ALLY_NOT_NULL(config);
  ALLY_NOT_NULL(out);
  return guard([&] {
    *out = new ally_model{ally::train_model(pool->value, config->value, seed, with_dual_head != 0)};
  });
}

size_t ally_model_embedding_dim(const ally_model* model) {
  return model ? model->value.params.embedding_dim() : 0;
}

double ally_model_violation_fraction(const ally_model* model) {
  return model ? model->value.report.violation_fraction : std::numeric_limits<double>::quiet_NaN();
}

ally_status ally_model_report_json(const ally_model* model, char** out) {
  ALLY_NOT_NULL(model);
  ALLY_NOT_NULL(out);
  return guard([&] { *out = dup_string(ally::to_json(model->value.report).dump(2)); });
}

ally_status ally_model_embed(const ally_model* model, const double* x, size_t n, size_t dim, double* out) {
  ALLY_NOT_NULL(model);
  ALLY_NOT_NULL(x);
  ALLY_NOT_NULL(out);
  return guard([&] { copy_out(ally::embed(model->value.params, view(x, n, dim)), out); });
}

ally_status ally_model_predict(const ally_model* model, const double* x, size_t n, size_t dim,
                               double* out) {
  ALLY_NOT_NULL(model);
  ALLY_NOT_NULL(x);
  ALLY_NOT_NULL(out);
  return guard([&] { copy_out(ally::forward(model->value.params, view(x, n, dim)).outputs, out); });
}

ally_status ally_model_predict_duals(const ally_model* model, const double* x, size_t n, size_t dim,
                                     double* out) {
  ALLY_NOT_NULL(model);
  ALLY_NOT_NULL(x);
  ALLY_NOT_NULL(out);
  return guard([&] {
    ally::require(!model->value.params.dual_head.empty(), ally::ErrorKind::contract,
                  "model was trained without a dual head");
    const auto d = ally::predict_duals(model->value.params.dual_head,
                                       ally::embed(model->value.params, view(x, n, dim)));
    std::memcpy(out, d.data(), d.size() * sizeof(double));
  });
}

ally_status ally_model_test_metric(const ally_model* model, const ally_pool* pool, double* out) {
  ALLY_NOT_NULL(model);
  ALLY_NOT_NULL(pool);
  ALLY_NOT_NULL(out);
  return guard([&] { *out = ally::test_metric(model->value.params, pool->value); });
}

void ally_model_free(ally_model* model) { delete model; }

// ---------------------------------------------------------------- selection

ally_status ally_kmeans(const double* points, size_t n, size_t dim, size_t k, uint64_t seed,
                        size_t* assignment, double* centroids, double* inertia) {
  ALLY_NOT_NULL(points);
  return guard([&] {
    const auto c = ally::kmeans(view(points, n, dim), k, seed);
    if (assignment) std::copy(c.assignment.begin(), c.assignment.end(), assignment);
    if (centroids) copy_out(c.centroids, centroids);
    if (inertia) *inertia = c.inertia;
  });
}

ally_status ally_select_ally(const double* embeddings, size_t n, size_t dim, const double* duals,
                             size_t b, size_t k, uint64_t seed, size_t* out_indices, size_t* out_count) {
  ALLY_NOT_NULL(embeddings);
  ALLY_NOT_NULL(duals);
  ALLY_NOT_NULL(out_indices);
  ALLY_NOT_NULL(out_count);
  return guard([&] {
    write_indices(ally::ally_select(view(embeddings, n, dim), std::span<const double>(duals, n), b, k, seed),
                  out_indices, out_count);
  });
}

ally_status ally_select_random(size_t n, size_t b, uint64_t seed, size_t* out_indices, size_t* out_count) {
  ALLY_NOT_NULL(out_indices);
  ALLY_NOT_NULL(out_count);
  return guard([&] { write_indices(ally::random_select(n, b, seed), out_indices, out_count); });
}

ally_status ally_select_coreset(const double* labeled, size_t n_labeled, const double* unlabeled,
                                size_t n_unlabeled, size_t dim, size_t b, size_t* out_indices,
                                size_t* out_count) {
  if (n_labeled > 0) ALLY_NOT_NULL(labeled);
  ALLY_NOT_NULL(unlabeled);
  ALLY_NOT_NULL(out_indices);
  ALLY_NOT_NULL(out_count);
  return guard([&] {
    const ally::Matrix l = n_labeled > 0 ? view(labeled, n_labeled, dim) : ally::Matrix(0, dim);
    write_indices(ally::coreset_select(l, view(unlabeled, n_unlabeled, dim), b), out_indices, out_count);
  });
}

}  // extern "C"
