#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "ally/pdcl.hpp"
#include "ally/report_json.hpp"
#include "../support/oracles.hpp"

using namespace ally;

namespace {

MlpArchitecture arch(std::size_t in, std::vector<std::size_t> hidden, std::size_t out) {
  return {in, std::move(hidden), out, Activation::relu};
}

LabeledSet random_classification(std::size_t n, std::size_t d, int classes, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<int> y(n);
  for (auto& v : y) v = static_cast<int>(uniform_index(rng, static_cast<std::size_t>(classes)));
  return {oracle::random_matrix(n, d, rng), Targets::classification(std::move(y))};
}

}  // namespace

TEST(Lagrangian, ZeroDualsGiveMeanPrimaryLoss) {
  const auto set = random_classification(12, 3, 3, 1);
  const auto p = init_params(arch(3, {5}, 3), 1);
  const auto dual = DualState::zeros(12, std::vector<double>{0.2});
  const auto loss = evaluate_loss(forward(p, set.features).outputs, set.targets);
  double mean = 0.0;
  for (double v : loss.values) mean += v;
  EXPECT_NEAR(empirical_lagrangian(p, set, dual), mean / 12.0, 1e-15);
}

TEST(Lagrangian, SingleSampleFormula) {
  DualState d = DualState::zeros(1, std::vector<double>{0.2});
  d.lambdas[0] = 2.0;
  EXPECT_NEAR(lagrangian_value(std::vector<double>{1.0}, std::vector<double>{0.5}, d), 1.6, 1e-15);
}

TEST(Lagrangian, MatchesLoopOracle) {
  const auto set = random_classification(20, 4, 3, 2);
  const auto p = init_params(arch(4, {6}, 3), 2);
  Rng rng(2);
  DualState d = DualState::zeros(20, std::vector<double>{0.3});
  for (std::size_t i = 0; i < 20; ++i) {
    d.lambdas[i] = uniform01(rng) * 3.0;
    d.epsilons[i] = uniform01(rng);
  }
  const Matrix out = oracle::naive_forward(
      Mlp{{p.backbone.layers[0], p.pred_head.layers[0]}}, set.features);
  double s = 0.0;
  for (std::size_t i = 0; i < 20; ++i) {
    long double lse = 0.0L;
    for (double z : out.row(i)) lse += std::exp(static_cast<long double>(z));
    const double l = static_cast<double>(std::log(lse) - out(i, static_cast<std::size_t>(set.targets.classes[i])));
    s += l + d.lambdas[i] * (l - d.epsilons[i]);
  }
  EXPECT_NEAR(empirical_lagrangian(p, set, d), s / 20.0, 1e-12);
}

TEST(Lagrangian, AffineInDuals) {
  const auto set = random_classification(15, 3, 2, 3);
  const auto p = init_params(arch(3, {4}, 2), 3);
  Rng rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    DualState base = DualState::zeros(15, std::vector<double>{0.2});
    std::vector<double> dir(15);
    for (std::size_t i = 0; i < 15; ++i) {
      base.lambdas[i] = uniform01(rng);
      dir[i] = uniform01(rng);
    }
    auto at = [&](double t) {
      DualState d = base;
      for (std::size_t i = 0; i < 15; ++i) d.lambdas[i] += t * dir[i];
      return empirical_lagrangian(p, set, d);
    };
    const double l0 = at(0.0), l1 = at(1.0), l2 = at(2.0), l3 = at(3.0);
    EXPECT_NEAR(l2 - 2.0 * l1 + l0, 0.0, 1e-12);
    EXPECT_NEAR(l3 - l2, l1 - l0, 1e-12);
  }
}

TEST(Slacks, EqualToBoundGivesZero) {
  const auto set = random_classification(8, 3, 3, 4);
  const auto p = init_params(arch(3, {}, 3), 4);
  const auto loss = evaluate_loss(forward(p, set.features).outputs, set.targets);
  const auto s = compute_slacks(p, set, loss.values);
  for (double v : s) EXPECT_EQ(v, 0.0);
}

TEST(Slacks, RegressionExample) {
  auto p = init_params(arch(2, {}, 1), 1);
  p.pred_head.layers[0].weight.fill(0.0);
  const LabeledSet set{Matrix(1, 2), Targets::regression(Matrix{{std::sqrt(0.7)}})};
  const auto s = compute_slacks(p, set, std::vector<double>{0.2});
  EXPECT_NEAR(s[0], 0.5, 1e-15);
}

TEST(DualStep, Examples) {
  DualState d = DualState::zeros(3, std::vector<double>{0.2});
  d.lambdas = {0.3, 0.01, 0.7};
  const auto n = dual_step(d, std::vector<double>{-0.1, -1.0, 0.0}, 0.05);
  EXPECT_NEAR(n.lambdas[0], 0.295, 1e-15);
  EXPECT_EQ(n.lambdas[1], 0.0);
  EXPECT_EQ(n.lambdas[2], 0.7);
  EXPECT_EQ(n.slacks, (std::vector<double>{-0.1, -1.0, 0.0}));
}

TEST(DualStep, LengthMismatchRejected) {
  const auto d = DualState::zeros(3, std::vector<double>{0.2});
  EXPECT_THROW(dual_step(d, std::vector<double>{0.1}, 0.05), Error);
}

TEST(PdclConfig, InvalidValuesAreConfigErrors) {
  auto bad = [](auto mutate) {
    PdclConfig c;
    mutate(c);
    try {
      c.validate();
    } catch (const Error& e) {
      return e.kind() == ErrorKind::config;
    }
    return false;
  };
  EXPECT_TRUE(bad([](PdclConfig& c) { c.eta_p = 0.0; }));
  EXPECT_TRUE(bad([](PdclConfig& c) { c.eta_d = -1.0; }));
  EXPECT_TRUE(bad([](PdclConfig& c) { c.max_iters = 0; }));
  EXPECT_TRUE(bad([](PdclConfig& c) { c.primal_steps = 0; }));
  EXPECT_TRUE(bad([](PdclConfig& c) { c.validation_fraction = 1.0; }));
  EXPECT_NO_THROW(PdclConfig{}.validate());
}

TEST(PdclTrain, DefaultsMatchPublishedSettings) {
  const PdclConfig c;
  EXPECT_EQ(c.eta_p, 0.005);
  EXPECT_EQ(c.eta_d, 0.05);
  EXPECT_EQ(c.primal_steps, 1u);
  EXPECT_EQ(c.patience, 6u);
  EXPECT_EQ(c.epsilon, std::vector<double>{0.2});
  EXPECT_EQ(c.primal_optimizer, OptimizerKind::adam);
}

// Unconstrained ERM written against the public building blocks only.
TEST(PdclTrain, InfiniteEpsilonEqualsPlainErm) {
  const auto set = random_classification(40, 3, 3, 5);
  PdclConfig cfg;
  cfg.epsilon = {std::numeric_limits<double>::infinity()};
  cfg.validation_fraction = 0.0;
  cfg.max_iters = 15;
  cfg.batch_size = 16;
  cfg.record_history = true;
  const auto a = arch(3, {8}, 3);
  const auto res = pdcl_train(set, a, cfg, 99);

  ModelParams p = init_params(a, derive_seed(99, 0x1a17ULL));
  auto opt = make_optimizer(OptimizerKind::adam, cfg.eta_p);
  std::vector<double> objective;
  for (std::size_t t = 0; t < cfg.max_iters; ++t) {
    const auto order = minibatch_order(99, t, 0, 40);
    for (std::size_t s = 0; s < 40; s += 16) {
      const std::size_t e = std::min<std::size_t>(40, s + 16);
      const std::span<const std::size_t> idx(order.data() + s, e - s);
      const auto fr = forward(p, set.features.select_rows(idx));
      auto loss = evaluate_loss(fr.outputs, set.targets.select(idx));
      for (double& g : loss.grads.data()) g /= static_cast<double>(idx.size());
      const auto g = backward_lagrangian(p, fr.cache, loss.grads);
      auto pv = p.backbone.parameter_views();
      auto hv = p.pred_head.parameter_views();
      pv.insert(pv.end(), hv.begin(), hv.end());
      auto gv = g.backbone.parameter_views();
      auto ghv = g.pred_head.parameter_views();
      gv.insert(gv.end(), ghv.begin(), ghv.end());
      optimizer_step(opt, pv, gv);
    }
    const auto l = evaluate_loss(forward(p, set.features).outputs, set.targets);
    double m = 0.0;
    for (double v : l.values) m += v;
    objective.push_back(m / 40.0);
  }
  EXPECT_EQ(res.params.backbone, p.backbone);
  EXPECT_EQ(res.params.pred_head, p.pred_head);
  EXPECT_EQ(res.report.objective_trace, objective);
  for (const auto& lam : res.report.lambda_history)
    for (double v : lam) EXPECT_EQ(v, 0.0);
}

TEST(PdclTrain, SeparableToyReachesFeasibility) {
  // 1-D, two classes split at zero with a margin
  Matrix x(60, 1);
  std::vector<int> y(60);
  Rng rng(8);
  for (std::size_t i = 0; i < 60; ++i) {
    y[i] = static_cast<int>(i % 2);
    x(i, 0) = (y[i] ? 1.0 : -1.0) * (0.5 + uniform01(rng));
  }
  PdclConfig cfg;
  cfg.max_iters = 400;
  cfg.validation_fraction = 0.0;
  cfg.eta_p = 0.05;
  const auto res = pdcl_train({x, Targets::classification(y)}, arch(1, {}, 2), cfg, 1);
  EXPECT_LE(res.report.violation_fraction, 0.05);
}

TEST(PdclTrain, DeterministicReport) {
  const auto set = random_classification(50, 4, 3, 6);
  PdclConfig cfg;
  cfg.max_iters = 20;
  cfg.record_history = true;
  const auto a = pdcl_train(set, arch(4, {8}, 3), cfg, 3);
  const auto b = pdcl_train(set, arch(4, {8}, 3), cfg, 3);
  EXPECT_EQ(to_json(a.report).dump(), to_json(b.report).dump());
  EXPECT_EQ(a.params, b.params);
}

TEST(PdclTrain, DualsStayNonnegativeEveryIteration) {
  const auto set = random_classification(50, 4, 3, 7);
  PdclConfig cfg;
  cfg.max_iters = 60;
  cfg.record_history = true;
  cfg.validation_fraction = 0.0;
  const auto res = pdcl_train(set, arch(4, {8}, 3), cfg, 4);
  ASSERT_EQ(res.report.lambda_history.size(), 60u);
  for (const auto& lam : res.report.lambda_history)
    for (double v : lam) EXPECT_GE(v, 0.0);
}

TEST(PdclTrain, DualsAccumulateSlacksWithoutProjection) {
  const auto set = random_classification(30, 3, 3, 9);
  PdclConfig cfg;
  cfg.max_iters = 25;
  cfg.record_history = true;
  cfg.validation_fraction = 0.0;
  cfg.epsilon = {0.0};  // cross-entropy is positive, so every slack is positive
  const auto res = pdcl_train(set, arch(3, {6}, 3), cfg, 5);
  std::vector<double> acc(30, 0.0);
  for (std::size_t t = 0; t < res.report.slack_history.size(); ++t)
    for (std::size_t i = 0; i < 30; ++i) {
      ASSERT_GT(res.report.slack_history[t][i], 0.0);
      acc[i] += res.report.slack_history[t][i];
      EXPECT_NEAR(res.report.lambda_history[t][i], cfg.eta_d * acc[i], 1e-10);
    }
}

TEST(PdclTrain, TracesHaveOneEntryPerIteration) {
  const auto set = random_classification(60, 4, 3, 10);
  PdclConfig cfg;
  cfg.max_iters = 200;
  const auto res = pdcl_train(set, arch(4, {32}, 3), cfg, 6);
  EXPECT_EQ(res.report.objective_trace.size(), res.report.stopped_epoch);
  EXPECT_EQ(res.report.lagrangian_trace.size(), res.report.stopped_epoch);
  EXPECT_EQ(res.report.validation_trace.size(), res.report.stopped_epoch);
  EXPECT_EQ(res.dual.size(), res.report.train_indices.size());
  EXPECT_EQ(res.report.train_indices.size() + res.report.validation_indices.size(), 60u);
  EXPECT_EQ(res.report.validation_indices.size(), 6u);
  if (res.report.early_stopped) {
    // the last `patience` validation losses never beat the best before them
    const auto& v = res.report.validation_trace;
    const double best = *std::min_element(v.begin(), v.end() - 6);
    for (auto it = v.end() - 6; it != v.end(); ++it) EXPECT_GE(*it, best);
  }
}

TEST(PdclTrain, NoValidationRunsAllIterations) {
  const auto set = random_classification(20, 2, 2, 11);
  PdclConfig cfg;
  cfg.max_iters = 17;
  cfg.validation_fraction = 0.0;
  const auto res = pdcl_train(set, arch(2, {4}, 2), cfg, 1);
  EXPECT_EQ(res.report.stopped_epoch, 17u);
  EXPECT_FALSE(res.report.early_stopped);
  EXPECT_TRUE(res.report.validation_indices.empty());
}

TEST(PdclTrain, NonFiniteTrainingAbortsWithReport) {
  auto set = random_classification(10, 2, 2, 12);
  set.features(0, 0) = 1e308;
  set.features(0, 1) = 1e308;
  PdclConfig cfg;
  cfg.validation_fraction = 0.0;
  try {
    pdcl_train(set, arch(2, {4}, 2), cfg, 1);
    FAIL() << "expected TrainingAborted";
  } catch (const TrainingAborted& e) {
    EXPECT_EQ(e.kind(), ErrorKind::numeric);
    EXPECT_FALSE(e.report().diagnostic.empty());
  }
}

TEST(PdclTrain, EmptyLabeledSetRejected) {
  const LabeledSet empty{Matrix(0, 2), Targets::classification({})};
  EXPECT_THROW(pdcl_train(empty, arch(2, {}, 2), PdclConfig{}, 1), Error);
}

TEST(PdclTrain, PerSampleEpsilonLengthChecked) {
  const auto set = random_classification(10, 2, 2, 13);
  PdclConfig cfg;
  cfg.epsilon = {0.1, 0.2};
  EXPECT_THROW(pdcl_train(set, arch(2, {}, 2), cfg, 1), Error);
}

TEST(TrainReportJson, RoundTrips) {
  const auto set = random_classification(30, 3, 3, 14);
  PdclConfig cfg;
  cfg.max_iters = 10;
  cfg.record_history = true;
  const auto res = pdcl_train(set, arch(3, {4}, 3), cfg, 2);
  const auto j = to_json(res.report);
  const auto back = train_report_from_json(nlohmann::json::parse(j.dump()));
  EXPECT_EQ(to_json(back).dump(), j.dump());
  EXPECT_EQ(back.final_dual.lambdas, res.report.final_dual.lambdas);
}
