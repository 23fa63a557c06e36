#include <gtest/gtest.h>

#include <cmath>
#include <string>
#include <vector>

#include "ally/ally.h"

// Exercises the shared library through its C interface only.

namespace {

struct Config {
  ally_config* p = nullptr;
  Config() {
    EXPECT_EQ(ally_config_parse(
                  "blobs.n_per_class = 20\nblobs.n_classes = 3\nblobs.test_per_class = 10\n"
                  "dataset.n_initial = 6\nmodel.hidden = 8\npdcl.max_iters = 8\n"
                  "dual_head.epochs = 10\nbudget = 3\nn_rounds = 2\nseeds = 0,1\n",
                  &p),
              ALLY_OK);
  }
  ~Config() { ally_config_free(p); }
};

std::string take(char* s) {
  std::string out = s ? s : "";
  ally_string_free(s);
  return out;
}

}  // namespace

TEST(CApi, ConfigErrorsCarryMessages) {
  Config c;
  EXPECT_EQ(ally_config_set(c.p, "budget", "abc"), ALLY_ERR_CONFIG);
  EXPECT_NE(std::string(ally_last_error()).find("budget"), std::string::npos);
  EXPECT_EQ(ally_config_set(c.p, "nope", "1"), ALLY_ERR_CONFIG);
  EXPECT_EQ(ally_config_set(nullptr, "budget", "1"), ALLY_ERR_NULL);
  ally_config* bad = nullptr;
  EXPECT_EQ(ally_config_parse("budget 3\n", &bad), ALLY_ERR_CONFIG);
  EXPECT_EQ(bad, nullptr);
  // a missing config file is a configuration problem (CLI exit code 1)
  EXPECT_EQ(ally_config_load("/nonexistent/ally.cfg", &bad), ALLY_ERR_CONFIG);
  EXPECT_STREQ(ally_status_string(ALLY_OK), "ok");
  EXPECT_EQ(ally_config_seed_count(c.p), 2u);
}

TEST(CApi, SerializeAndHashAreStable) {
  Config c;
  char* text = nullptr;
  ASSERT_EQ(ally_config_serialize(c.p, &text), ALLY_OK);
  const std::string serialized = take(text);
  ally_config* back = nullptr;
  ASSERT_EQ(ally_config_parse(serialized.c_str(), &back), ALLY_OK);
  char *h1 = nullptr, *h2 = nullptr;
  ally_config_hash(c.p, &h1);
  ally_config_hash(back, &h2);
  EXPECT_EQ(take(h1), take(h2));
  ally_config_free(back);
}

TEST(CApi, RunExperimentPoints) {
  Config c;
  ally_result* r = nullptr;
  ASSERT_EQ(ally_run_experiment(c.p, 0, &r), ALLY_OK) << ally_last_error();
  EXPECT_EQ(ally_result_point_count(r), 8u);
  EXPECT_EQ(ally_result_failed_cells(r), 0u);
  ally_curve_point pt;
  ASSERT_EQ(ally_result_point(r, 0, &pt), ALLY_OK);
  EXPECT_EQ(pt.is_accuracy, 1);
  EXPECT_EQ(pt.n_labeled, 6u);
  EXPECT_EQ(ally_result_point(r, 8, &pt), ALLY_ERR_RANGE);
  char* csv = nullptr;
  ASSERT_EQ(ally_result_curves_csv(r, &csv), ALLY_OK);
  EXPECT_EQ(take(csv).rfind("strategy,seed,round", 0), 0u);
  ally_result_free(r);
}

TEST(CApi, PoolModelAndSelection) {
  Config c;
  ally_pool* pool = nullptr;
  ASSERT_EQ(ally_pool_load(c.p, &pool), ALLY_OK);
  EXPECT_EQ(ally_pool_size(pool), 60u);
  ASSERT_EQ(ally_pool_split_initial(pool, 9, 0), ALLY_OK);
  EXPECT_EQ(ally_pool_labeled_count(pool), 9u);
  ally_model* model = nullptr;
  ASSERT_EQ(ally_model_train(pool, c.p, 0, 1, &model), ALLY_OK) << ally_last_error();
  const std::size_t dim = ally_pool_dim(pool), e = ally_model_embedding_dim(model);
  std::vector<double> x(5 * dim, 0.5), emb(5 * e), duals(5);
  ASSERT_EQ(ally_model_embed(model, x.data(), 5, dim, emb.data()), ALLY_OK);
  ASSERT_EQ(ally_model_predict_duals(model, x.data(), 5, dim, duals.data()), ALLY_OK);
  for (double d : duals) EXPECT_GE(d, 0.0);
  EXPECT_EQ(ally_model_embed(model, x.data(), 5, dim + 1, emb.data()), ALLY_ERR_SHAPE);
  double acc = -1.0;
  ASSERT_EQ(ally_model_test_metric(model, pool, &acc), ALLY_OK);
  EXPECT_GE(acc, 0.0);
  EXPECT_LE(acc, 1.0);

  const std::vector<double> pts{0, 0, 0, 1, 10, 10, 10, 11};
  const std::vector<double> sc{0.1, 0.9, 0.5, 0.2};
  std::size_t idx[2], count = 0;
  ASSERT_EQ(ally_select_ally(pts.data(), 4, 2, sc.data(), 2, 2, 0, idx, &count), ALLY_OK);
  ASSERT_EQ(count, 2u);
  EXPECT_TRUE((idx[0] == 1 && idx[1] == 2) || (idx[0] == 2 && idx[1] == 1));
  EXPECT_EQ(ally_select_random(3, 4, 0, idx, &count), ALLY_ERR_INPUT);
  ally_model_free(model);
  ally_pool_free(pool);
}

TEST(CApi, DualityReport) {
  char* json = nullptr;
  int passed = 0;
  ASSERT_EQ(ally_verify_duality(5, 0, &json, &passed), ALLY_OK);
  EXPECT_EQ(passed, 1);
  EXPECT_NE(take(json).find("max_duality_gap"), std::string::npos);
}
