#include <gtest/gtest.h>

#include <algorithm>

#include "ally/dualhead.hpp"
#include "ally/error.hpp"
#include "ally/pdcl.hpp"
#include "../support/oracles.hpp"

using namespace ally;

namespace {

Matrix embeddings(std::size_t n, std::size_t d, std::uint64_t seed) {
  Rng rng(seed);
  Matrix m = oracle::random_matrix(n, d, rng);
  for (double& v : m.data()) v = std::max(0.0, v);  // relu-like embeddings
  return m;
}

}  // namespace

TEST(DualHead, DefaultsMatchPublishedArchitecture) {
  const DualHeadConfig c;
  EXPECT_EQ(c.hidden_dims, (std::vector<std::size_t>{64, 32, 16}));
  EXPECT_EQ(c.lr, 1e-3);
  EXPECT_EQ(c.epochs, 200u);
}

TEST(DualHead, FitsConstantTargets) {
  const Matrix e = embeddings(40, 8, 1);
  for (double c : {0.0, 0.5, 2.0}) {
    DualHeadConfig cfg;
    cfg.epochs = 2000;
    const std::vector<double> lam(40, c);
    const Mlp head = train_dual_head(e, lam, cfg);
    for (double p : predict_duals(head, e)) {
      if (c == 0.0)
        EXPECT_LE(p, 0.05);
      else
        EXPECT_LE(std::abs(p - c), 0.05 * std::max(c, 1.0));
    }
  }
}

TEST(DualHead, TrainingLowersTheFitLoss) {
  for (std::uint64_t s = 0; s < 5; ++s) {
    const Matrix e = embeddings(30, 6, s);
    Rng rng(s + 100);
    std::vector<double> lam(30);
    for (double& v : lam) v = 2.0 * uniform01(rng);
    std::vector<double> trace;
    DualHeadConfig cfg;
    cfg.seed = s;
    const Mlp head = train_dual_head(e, lam, cfg, &trace);
    ASSERT_EQ(trace.size(), cfg.epochs + 1);
    EXPECT_LT(trace.back(), trace.front());
    EXPECT_DOUBLE_EQ(dual_fit_loss(head, e, lam), trace.back());
  }
}

TEST(DualHead, FrozenEmbeddingSourceUntouched) {
  const LabeledSet set{embeddings(30, 3, 2), Targets::classification(std::vector<int>(30, 1))};
  PdclConfig cfg;
  cfg.max_iters = 5;
  auto res = pdcl_train(set, {3, {8}, 2, Activation::relu}, cfg, 1);
  const ModelParams before = res.params;
  const Matrix e = embed(res.params, set.features.select_rows(res.report.train_indices));
  res.params.dual_head = train_dual_head(e, res.dual.lambdas, DualHeadConfig{});
  EXPECT_EQ(res.params.backbone, before.backbone);
  EXPECT_EQ(res.params.pred_head, before.pred_head);
}

TEST(DualHead, PredictionsNonnegativeDeterministicAndRowwise) {
  const Matrix e = embeddings(25, 4, 3);
  std::vector<double> lam(25);
  for (std::size_t i = 0; i < 25; ++i) lam[i] = static_cast<double>(i % 3);
  DualHeadConfig cfg;
  cfg.epochs = 20;
  const Mlp head = train_dual_head(e, lam, cfg);
  EXPECT_EQ(train_dual_head(e, lam, cfg), head);

  Rng rng(4);
  const Matrix wild = oracle::random_matrix(50, 4, rng, 100.0);
  for (double p : predict_duals(head, wild)) EXPECT_GE(p, 0.0);

  const auto base = predict_duals(head, e);
  std::vector<std::size_t> perm{3, 3, 0, 24, 7};
  const auto sub = predict_duals(head, e.select_rows(perm));
  for (std::size_t i = 0; i < perm.size(); ++i) EXPECT_EQ(sub[i], base[perm[i]]);
}

TEST(DualHead, InputValidation) {
  const Matrix e = embeddings(5, 2, 5);
  EXPECT_THROW(train_dual_head(Matrix(0, 2), {}, DualHeadConfig{}), Error);
  EXPECT_THROW(train_dual_head(e, std::vector<double>(4, 0.0), DualHeadConfig{}), Error);
  EXPECT_THROW(train_dual_head(e, std::vector<double>{0, 0, 0, 0, -1}, DualHeadConfig{}), Error);
  DualHeadConfig cfg;
  cfg.epochs = 1;
  const Mlp head = train_dual_head(e, std::vector<double>(5, 0.0), cfg);
  EXPECT_THROW(predict_duals(head, Matrix(2, 3)), Error);
  EXPECT_THROW(predict_duals(Mlp{}, e), Error);
}
