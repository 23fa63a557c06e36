#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "ally/harness.hpp"
#include "ally/report_json.hpp"
#include "expect.hpp"

using namespace ally;
namespace fs = std::filesystem;

namespace {

ExperimentConfig tiny(std::vector<Strategy> strategies = {Strategy::ally, Strategy::random}) {
  ExperimentConfig c = default_config();
  c.dataset.blobs.n_per_class = 30;
  c.dataset.blobs.n_classes = 3;
  c.dataset.blobs.test_per_class = 20;
  c.dataset.n_initial = 6;
  c.hidden_dims = {8};
  c.pdcl.max_iters = 10;
  c.dual_head.epochs = 20;
  c.strategies = std::move(strategies);
  c.budget = 4;
  c.n_rounds = 3;
  c.seeds = {0, 1};
  return c;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST(Experiment, CountsOnePointPerSeedStrategyRound) {
  const auto r = run_experiment(tiny());
  EXPECT_EQ(r.points.size(), 12u);
  EXPECT_TRUE(r.all_ok());
  EXPECT_EQ(r.cells.size(), 4u);
  for (const auto& p : r.points) {
    EXPECT_EQ(p.n_labeled, 6 + 4 * p.round);
    EXPECT_EQ(p.metric_name, "accuracy");
    EXPECT_EQ(p.k, 4u);
  }
}

TEST(Experiment, SummaryRecomputesFromRawRows) {
  const auto r = run_experiment(tiny());
  ASSERT_EQ(r.summary.size(), 6u);
  for (const auto& row : r.summary) {
    std::vector<double> v;
    for (const auto& p : r.points)
      if (p.strategy == row.strategy && p.round == row.round) v.push_back(p.metric_value);
    ASSERT_EQ(v.size(), row.n_seeds);
    double mean = 0.0;
    for (double x : v) mean += x / static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    EXPECT_NEAR(row.mean, mean, 1e-12);
    EXPECT_NEAR(row.std, std::sqrt(ss / static_cast<double>(v.size() - 1)), 1e-12);
  }
}

TEST(Experiment, RerunsAndSingleCellsReproduceEveryPoint) {
  const auto cfg = tiny();
  const auto a = run_experiment(cfg), b = run_experiment(cfg);
  EXPECT_EQ(a.points, b.points);
  auto one = cfg;
  one.seeds = {1};
  one.strategies = {Strategy::random};
  const auto c = run_experiment(one);
  std::vector<CurvePoint> expected;
  for (const auto& p : a.points)
    if (p.seed == 1 && p.strategy == Strategy::random) expected.push_back(p);
  EXPECT_EQ(c.points, expected);
}

TEST(Experiment, RandomNeverTrainsDualHead) {
  const auto r = run_experiment(tiny({Strategy::ally, Strategy::random, Strategy::coreset}));
  for (const auto& cell : r.cells)
    for (bool trained : cell.dual_head_trained) EXPECT_EQ(trained, cell.strategy == Strategy::ally);
}

TEST(Experiment, WritesOutputs) {
  auto cfg = tiny();
  cfg.output_dir = fs::temp_directory_path() / "ally_unit_run";
  fs::remove_all(cfg.output_dir);
  const auto r = run_experiment(cfg, true);
  const auto curves = slurp(cfg.output_dir / "curves.csv");
  EXPECT_EQ(curves, curves_csv(r.points));
  EXPECT_EQ(curves.substr(0, curves.find('\n')),
            "strategy,seed,round,n_labeled,metric_name,metric_value,k");
  const auto meta = nlohmann::json::parse(slurp(cfg.output_dir / "meta.json"));
  EXPECT_EQ(meta["config_hash"], config_hash(cfg));
  EXPECT_TRUE(meta.contains("wall_seconds"));
  EXPECT_TRUE(fs::exists(cfg.output_dir / "cells" / "ally_k4_seed0.csv"));
  EXPECT_TRUE(fs::exists(cfg.output_dir / "summary.csv"));
}

TEST(Round, BookkeepingAcrossRounds) {
  const auto cfg = tiny({Strategy::ally});
  Pool pool = split_initial(load_dataset(cfg.dataset), 6, 0);
  const Matrix test = pool.test_features;
  for (std::size_t round = 0; round < 3; ++round) {
    const auto r = al_round(pool, cfg, Strategy::ally, round, 0);
    EXPECT_EQ(r.pool.labeled_idx.size(), pool.labeled_idx.size() + r.batch.indices.size());
    EXPECT_EQ(r.batch.indices.size(), 4u);
    r.pool.check_invariants();
    std::set<std::size_t> all(r.pool.labeled_idx.begin(), r.pool.labeled_idx.end());
    all.insert(r.pool.unlabeled_idx.begin(), r.pool.unlabeled_idx.end());
    EXPECT_EQ(all.size(), pool.size());
    EXPECT_EQ(r.pool.test_features, test);
    EXPECT_EQ(r.point.n_labeled, pool.labeled_idx.size());
    pool = r.pool;
  }
}

TEST(Round, BudgetBeyondPoolLabelsEverything) {
  auto cfg = tiny({Strategy::random});
  cfg.budget = 1000;
  const Pool pool = split_initial(load_dataset(cfg.dataset), 6, 0);
  const auto r = al_round(pool, cfg, Strategy::random, 0, 0);
  EXPECT_TRUE(r.pool.unlabeled_idx.empty());
  EXPECT_EQ(r.pool.labeled_idx.size(), pool.size());
  auto run = cfg;
  run.n_rounds = 5;
  run.seeds = {0};
  EXPECT_EQ(run_experiment(run).points.size(), 1u);  // loop ends once the pool is exhausted
}

TEST(Round, RegressionReportsMse) {
  auto cfg = tiny({Strategy::ally, Strategy::random});
  cfg.dataset.source = DataSource::synth_regression;
  cfg.dataset.regression.n = 60;
  cfg.dataset.regression.n_test = 30;
  cfg.seeds = {0};
  const auto r = run_experiment(cfg);
  ASSERT_TRUE(r.all_ok());
  for (const auto& p : r.points) {
    EXPECT_EQ(p.metric_name, "mse");
    EXPECT_GE(p.metric_value, 0.0);
  }
}

TEST(Redundancy, FactorOneMatchesBaseAndClonesAreCounted) {
  auto cfg = tiny();
  const auto control = sweep_redundancy(cfg, 1);
  const auto base = run_experiment(cfg);
  EXPECT_EQ(control.original.points, base.points);
  EXPECT_EQ(control.cloned.points, base.points);
  EXPECT_EQ(control.dup_labeled_cloned, 0u);
  const auto cloned = sweep_redundancy(cfg, 10);
  EXPECT_EQ(cloned.gap_original.size(), 2u);
  EXPECT_EQ(cloned.gap_cloned.size(), 2u);
  std::size_t dup = 0;
  for (const auto& cell : cloned.cloned.cells)
    if (cell.strategy == Strategy::ally)
      for (std::size_t d : cell.dup_labeled) dup += d;
  EXPECT_EQ(dup, cloned.dup_labeled_cloned);
}

TEST(Clusters, GridIncludesEndpoints) {
  EXPECT_EQ(cluster_grid({5, 3, 5}, 10), (std::vector<std::size_t>{1, 3, 5, 10}));
  EXPECT_EQ(cluster_grid({}, 4), (std::vector<std::size_t>{1, 4}));
  EXPECT_EQ(kind_of([] { cluster_grid({11}, 10); }), ErrorKind::config);
}

TEST(Clusters, SweepTagsPointsWithK) {
  auto cfg = tiny();
  cfg.seeds = {0};
  cfg.n_rounds = 2;
  const auto sweep = sweep_clusters(cfg, {2});
  ASSERT_EQ(sweep.size(), 3u);
  for (const auto& [k, res] : sweep)
    for (const auto& p : res.points) {
      EXPECT_EQ(p.k, k);
      EXPECT_EQ(p.strategy, Strategy::ally);
    }
}

TEST(Config, SerializeRoundTrips) {
  auto cfg = tiny({Strategy::coreset, Strategy::ally});
  cfg.pdcl.epsilon = {0.3};
  cfg.k_clusters = 2;
  const std::string text = serialize_config(cfg);
  const auto back = parse_config(text);
  EXPECT_EQ(serialize_config(back), text);
  EXPECT_EQ(config_hash(back), config_hash(cfg));
  EXPECT_EQ(config_hash(cfg).size(), 16u);
  auto other = cfg;
  other.budget = 5;
  EXPECT_NE(config_hash(other), config_hash(cfg));
}

TEST(Config, ParsesCommentsAndReportsLines) {
  const auto c = parse_config("# comment\n\nbudget = 7\nstrategies = random\n");
  EXPECT_EQ(c.budget, 7u);
  EXPECT_EQ(c.strategies, std::vector<Strategy>{Strategy::random});
  try {
    parse_config("budget = 7\nno_such_key = 1\n");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::config);
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
  }
  EXPECT_EQ(kind_of([] { parse_config("budget = many\n"); }), ErrorKind::config);
  EXPECT_EQ(kind_of([] { parse_config("just words\n"); }), ErrorKind::config);
  EXPECT_EQ(kind_of([] { parse_config("strategies = badge\n"); }), ErrorKind::config);
}

TEST(Config, ValidationRejectsInconsistentSettings) {
  auto c = tiny();
  c.k_clusters = 5;
  EXPECT_EQ(kind_of([&] { c.validate(); }), ErrorKind::config);
  c = tiny();
  c.seeds.clear();
  EXPECT_EQ(kind_of([&] { c.validate(); }), ErrorKind::config);
  c = tiny();
  c.dataset.source = DataSource::idx_files;
  EXPECT_EQ(kind_of([&] { c.validate(); }), ErrorKind::config);
  c = tiny();
  c.dataset.n_initial = 10000;
  EXPECT_EQ(kind_of([&] { run_experiment(c); }), ErrorKind::config);
}

TEST(Generate, TrajectoriesStartFromLeastInformativeRows) {
  auto cfg = tiny({Strategy::ally});
  cfg.generate.n_trajectories = 5;
  cfg.generate.n_steps = 20;
  const auto g = run_generate(cfg);
  ASSERT_EQ(g.trajectories.size(), 5u);
  EXPECT_EQ(g.start_rows.size(), 5u);
  EXPECT_TRUE(g.report.dual_head_trained);
  for (const auto& t : g.trajectories)
    for (const auto& s : t.snapshots)
      for (double v : s.x) {
        EXPECT_GE(v, g.clip_lo);
        EXPECT_LE(v, g.clip_hi);
      }
}

TEST(ReportJson, ExperimentMetaHasCells) {
  const auto cfg = tiny();
  const auto r = run_experiment(cfg);
  const auto meta = experiment_meta(r, cfg);
  EXPECT_EQ(meta["cells"].size(), 4u);
  EXPECT_TRUE(meta["all_ok"].get<bool>());
  EXPECT_EQ(meta["cells"][0]["violation_fractions"].size(), 3u);
}
