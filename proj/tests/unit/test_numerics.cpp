#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "ally/error.hpp"
#include "ally/model.hpp"
#include "ally/optimizer.hpp"
#include "ally/pdcl.hpp"
#include "expect.hpp"
#include "../support/oracles.hpp"

using namespace ally;

namespace {

MlpArchitecture arch(std::size_t in, std::vector<std::size_t> hidden, std::size_t out) {
  MlpArchitecture a;
  a.input_dim = in;
  a.hidden_dims = std::move(hidden);
  a.output_dim = out;
  a.activation = Activation::relu;
  return a;
}

Mlp full_chain(const ModelParams& p) {
  Mlp m = p.backbone;
  m.layers.insert(m.layers.end(), p.pred_head.layers.begin(), p.pred_head.layers.end());
  return m;
}

}  // namespace

TEST(Matrix, ConstructorRejectsWrongDataLength) {
  EXPECT_EQ(kind_of([] { Matrix(2, 3, std::vector<double>(5)); }), ErrorKind::shape);
}

TEST(Matrix, MatmulMatchesLoops) {
  Rng rng(3);
  const Matrix a = oracle::random_matrix(4, 5, rng), b = oracle::random_matrix(5, 3, rng);
  const Matrix c = matmul(a, b);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 3; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < 5; ++k) s += a(i, k) * b(k, j);
      EXPECT_NEAR(c(i, j), s, 1e-12);
    }
  EXPECT_EQ(matmul_nt(a, transpose(b)), c);
  EXPECT_EQ(matmul_tn(transpose(a), b), c);
}

TEST(Matrix, MatmulRejectsMismatch) {
  EXPECT_EQ(kind_of([] { matmul(Matrix(2, 3), Matrix(2, 3)); }), ErrorKind::shape);
}

TEST(Matrix, VstackAndSelectRows) {
  const Matrix a{{1, 2}, {3, 4}};
  const Matrix b{{5, 6}};
  const Matrix s = vstack(a, b);
  EXPECT_EQ(s, (Matrix{{1, 2}, {3, 4}, {5, 6}}));
  const std::vector<std::size_t> idx{2, 0};
  EXPECT_EQ(s.select_rows(idx), (Matrix{{5, 6}, {1, 2}}));
  EXPECT_EQ(vstack(Matrix(), b), b);
  EXPECT_EQ(kind_of([&] { vstack(a, Matrix(1, 3)); }), ErrorKind::shape);
}

TEST(InitParams, AffineNetHasZeroBias) {
  const auto p = init_params(arch(2, {}, 1), 7);
  EXPECT_TRUE(p.backbone.empty());
  ASSERT_EQ(p.pred_head.layers.size(), 1u);
  EXPECT_EQ(p.pred_head.layers[0].weight.rows(), 1u);
  EXPECT_EQ(p.pred_head.layers[0].weight.cols(), 2u);
  EXPECT_EQ(p.pred_head.layers[0].bias, std::vector<double>{0.0});
}

TEST(InitParams, SameSeedSameParameters) {
  EXPECT_EQ(init_params(arch(5, {8, 4}, 3), 11), init_params(arch(5, {8, 4}, 3), 11));
  EXPECT_NE(init_params(arch(5, {8, 4}, 3), 11), init_params(arch(5, {8, 4}, 3), 12));
}

TEST(InitParams, ShapesChain) {
  const auto p = init_params(arch(4, {3}, 2), 1);
  ASSERT_EQ(p.backbone.layers.size(), 1u);
  EXPECT_EQ(p.backbone.layers[0].weight.rows(), 3u);
  EXPECT_EQ(p.backbone.layers[0].weight.cols(), 4u);
  EXPECT_EQ(p.pred_head.layers[0].weight.rows(), 2u);
  EXPECT_EQ(p.pred_head.layers[0].weight.cols(), 3u);
  EXPECT_EQ(p.embedding_dim(), 3u);
}

TEST(InitParams, KaimingBoundOnReluLayers) {
  const auto p = init_params(arch(50, {40}, 3), 5);
  const double bound = std::sqrt(6.0 / 50.0);
  for (double w : p.backbone.layers[0].weight.values()) EXPECT_LE(std::abs(w), bound);
  const double xavier = std::sqrt(6.0 / (40.0 + 3.0));
  for (double w : p.pred_head.layers[0].weight.values()) EXPECT_LE(std::abs(w), xavier);
}

TEST(Forward, ZeroAffineNetGivesBias) {
  auto p = init_params(arch(3, {}, 2), 1);
  p.pred_head.layers[0].weight.fill(0.0);
  const auto r = forward(p, Matrix(1, 3));
  EXPECT_EQ(r.outputs, Matrix(1, 2));
}

TEST(Forward, NegativePreActivationsKillEmbedding) {
  auto p = init_params(arch(3, {4}, 2), 1);
  p.backbone.layers[0].weight.fill(0.0);
  p.backbone.layers[0].bias.assign(4, -1.0);
  Rng rng(1);
  const auto r = forward(p, oracle::random_matrix(5, 3, rng));
  EXPECT_EQ(r.embeddings, Matrix(5, 4));
}

TEST(Forward, MatchesNaiveReimplementation) {
  Rng rng(42);
  for (int trial = 0; trial < 20; ++trial) {
    const auto p = init_params(arch(6, {7, 5}, 3), 100 + trial);
    const Matrix x = oracle::random_matrix(9, 6, rng);
    const auto r = forward(p, x);
    const Matrix ref = oracle::naive_forward(full_chain(p), x);
    for (std::size_t i = 0; i < ref.size(); ++i) EXPECT_NEAR(r.outputs.values()[i], ref.values()[i], 1e-12);
    const Matrix emb = oracle::naive_forward(p.backbone, x);
    EXPECT_EQ(r.embeddings.rows(), emb.rows());
    for (std::size_t i = 0; i < emb.size(); ++i) EXPECT_NEAR(r.embeddings.values()[i], emb.values()[i], 1e-12);
  }
}

TEST(Forward, RejectsDimensionMismatch) {
  const auto p = init_params(arch(3, {4}, 2), 1);
  EXPECT_EQ(kind_of([&] { forward(p, Matrix(2, 4)); }), ErrorKind::shape);
}

TEST(Backward, ZeroUpstreamGivesZeroGradients) {
  const auto p = init_params(arch(3, {4}, 2), 1);
  Rng rng(2);
  const auto r = forward(p, oracle::random_matrix(5, 3, rng));
  const auto g = backward_lagrangian(p, r.cache, Matrix(5, 2));
  for (const auto& v : g.backbone.parameter_views())
    for (double x : v) EXPECT_EQ(x, 0.0);
  for (const auto& v : g.pred_head.parameter_views())
    for (double x : v) EXPECT_EQ(x, 0.0);
}

TEST(Backward, DoublingUpstreamDoublesGradients) {
  const auto p = init_params(arch(3, {4, 4}, 2), 3);
  Rng rng(4);
  const auto r = forward(p, oracle::random_matrix(6, 3, rng));
  Matrix up = oracle::random_matrix(6, 2, rng);
  const auto g1 = backward_lagrangian(p, r.cache, up);
  for (double& v : up.data()) v *= 2.0;
  const auto g2 = backward_lagrangian(p, r.cache, up);
  const auto a = g1.backbone.parameter_views(), b = g2.backbone.parameter_views();
  for (std::size_t t = 0; t < a.size(); ++t)
    for (std::size_t i = 0; i < a[t].size(); ++i) EXPECT_NEAR(b[t][i], 2.0 * a[t][i], 1e-14);
}

TEST(Backward, SquareLossOnAffineNetMatchesFiniteDifferences) {
  auto p = init_params(arch(3, {}, 1), 9);
  Rng rng(9);
  const Matrix x = oracle::random_matrix(4, 3, rng);
  const Matrix y = oracle::random_matrix(4, 1, rng);
  auto loss = [&](const ModelParams& q) {
    const auto out = forward(q, x).outputs;
    double s = 0.0;
    for (std::size_t i = 0; i < 4; ++i) s += (out(i, 0) - y(i, 0)) * (out(i, 0) - y(i, 0));
    return s;
  };
  const auto r = forward(p, x);
  Matrix up(4, 1);
  for (std::size_t i = 0; i < 4; ++i) up(i, 0) = 2.0 * (r.outputs(i, 0) - y(i, 0));
  const auto g = backward_lagrangian(p, r.cache, up);
  auto views = p.pred_head.parameter_views();
  const auto gv = g.pred_head.parameter_views();
  for (std::size_t t = 0; t < views.size(); ++t)
    for (std::size_t i = 0; i < views[t].size(); ++i) {
      const double keep = views[t][i];
      views[t][i] = keep + 1e-5;
      const double up_v = loss(p);
      views[t][i] = keep - 1e-5;
      const double down_v = loss(p);
      views[t][i] = keep;
      EXPECT_LE(oracle::rel_error(gv[t][i], (up_v - down_v) / 2e-5), 1e-6);
    }
}

TEST(Backward, StaleCacheIsRejected) {
  auto p = init_params(arch(3, {4}, 2), 1);
  const auto r = forward(p, Matrix(2, 3, 0.5));
  p.pred_head.layers[0].weight(0, 0) += 1.0;
  EXPECT_EQ(kind_of([&] { backward_lagrangian(p, r.cache, Matrix(2, 2)); }), ErrorKind::contract);
}

TEST(Backward, LagrangianGradientMatchesFiniteDifferences) {
  Rng rng(77);
  for (int trial = 0; trial < 10; ++trial) {
    auto p = init_params(arch(4, {6, 5}, 3), 500 + trial);
    LabeledSet set{oracle::random_matrix(5, 4, rng), Targets::classification({0, 2, 1, 1, 0})};
    DualState dual = DualState::zeros(5, std::vector<double>{0.3});
    for (double& l : dual.lambdas) l = uniform01(rng);

    const auto r = forward(p, set.features);
    auto loss = evaluate_loss(r.outputs, set.targets);
    for (std::size_t i = 0; i < 5; ++i)
      for (double& g : loss.grads.row(i)) g *= (1.0 + dual.lambdas[i]) / 5.0;
    const auto g = backward_lagrangian(p, r.cache, loss.grads);

    auto views = p.backbone.parameter_views();
    const auto gv = g.backbone.parameter_views();
    for (std::size_t t = 0; t < views.size(); ++t)
      for (std::size_t i = 0; i < views[t].size(); ++i) {
        const double keep = views[t][i];
        views[t][i] = keep + 1e-5;
        const double a = empirical_lagrangian(p, set, dual);
        views[t][i] = keep - 1e-5;
        const double b = empirical_lagrangian(p, set, dual);
        views[t][i] = keep;
        EXPECT_LE(oracle::rel_error(gv[t][i], (a - b) / 2e-5), 1e-4) << "trial " << trial;
      }
  }
}

TEST(Optimizer, SgdStep) {
  auto st = make_optimizer(OptimizerKind::sgd, 0.1);
  std::vector<double> p{1.0};
  const std::vector<double> g{2.0};
  const std::vector<std::span<double>> pv{p};
  const std::vector<std::span<const double>> gv{g};
  optimizer_step(st, pv, gv);
  EXPECT_DOUBLE_EQ(p[0], 0.8);
  EXPECT_EQ(st.step_count, 1u);
}

TEST(Optimizer, AdamZeroGradientsLeaveParameters) {
  auto st = make_optimizer(OptimizerKind::adam, 0.005);
  std::vector<double> p{1.5, -2.0};
  const std::vector<double> g{0.0, 0.0};
  const std::vector<std::span<double>> pv{p};
  const std::vector<std::span<const double>> gv{g};
  for (int i = 0; i < 100; ++i) optimizer_step(st, pv, gv);
  EXPECT_EQ(p, (std::vector<double>{1.5, -2.0}));
}

TEST(Optimizer, AdamFirstStepMatchesClosedForm) {
  auto st = make_optimizer(OptimizerKind::adam, 0.005);
  std::vector<double> p{1.0, 1.0, 1.0};
  const std::vector<double> g{0.3, -4.0, 1e-3};
  const std::vector<std::span<double>> pv{p};
  const std::vector<std::span<const double>> gv{g};
  optimizer_step(st, pv, gv);
  for (std::size_t i = 0; i < 3; ++i) {
    // m_hat = g, v_hat = g^2 after bias correction
    const double expected = 1.0 - 0.005 * g[i] / (std::abs(g[i]) + 1e-8);
    EXPECT_NEAR(p[i], expected, 1e-15);
    EXPECT_NEAR(std::abs(p[i] - 1.0), 0.005, 1e-7);
  }
}

TEST(Optimizer, NonFiniteGradientLeavesStateUnchanged) {
  auto st = make_optimizer(OptimizerKind::adam, 0.01);
  std::vector<double> p{1.0, 2.0};
  const std::vector<double> g{0.5, 0.5};
  const std::vector<double> bad{0.5, std::numeric_limits<double>::quiet_NaN()};
  const std::vector<std::span<double>> pv{p};
  optimizer_step(st, pv, std::vector<std::span<const double>>{g});
  const auto before_state = st;
  const auto before = p;
  EXPECT_EQ(kind_of([&] { optimizer_step(st, pv, std::vector<std::span<const double>>{bad}); }),
            ErrorKind::numeric);
  EXPECT_EQ(p, before);
  EXPECT_EQ(st.step_count, before_state.step_count);
  EXPECT_EQ(st.first_moment, before_state.first_moment);
  EXPECT_EQ(st.second_moment, before_state.second_moment);
}

TEST(Optimizer, ShapeMismatchRejected) {
  auto st = make_optimizer(OptimizerKind::sgd, 0.1);
  std::vector<double> p{1.0, 2.0};
  const std::vector<double> g{0.5};
  EXPECT_EQ(kind_of([&] {
              optimizer_step(st, std::vector<std::span<double>>{p},
                             std::vector<std::span<const double>>{g});
            }),
            ErrorKind::shape);
}

TEST(Determinism, ForwardBackwardBitwiseRepeatable) {
  const auto p = init_params(arch(5, {8, 6}, 4), 21);
  Rng rng(21);
  const Matrix x = oracle::random_matrix(7, 5, rng);
  const Matrix up = oracle::random_matrix(7, 4, rng);
  const auto r1 = forward(p, x), r2 = forward(p, x);
  EXPECT_EQ(r1.outputs, r2.outputs);
  const auto g1 = backward_lagrangian(p, r1.cache, up), g2 = backward_lagrangian(p, r2.cache, up);
  EXPECT_EQ(g1.backbone, g2.backbone);
  EXPECT_EQ(g1.pred_head, g2.pred_head);
}

TEST(Activations, SoftplusAndSigmoidAreStable) {
  EXPECT_NEAR(softplus(0.0), std::log(2.0), 1e-15);
  EXPECT_DOUBLE_EQ(softplus(800.0), 800.0);
  EXPECT_GE(softplus(-800.0), 0.0);
  EXPECT_NEAR(sigmoid(0.0), 0.5, 1e-15);
  EXPECT_DOUBLE_EQ(sigmoid(-800.0), 0.0);
  EXPECT_DOUBLE_EQ(sigmoid(800.0), 1.0);
}
