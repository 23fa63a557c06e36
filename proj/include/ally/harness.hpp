#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "ally/data.hpp"
#include "ally/dualhead.hpp"
#include "ally/generate.hpp"
#include "ally/pdcl.hpp"
#include "ally/selection.hpp"

namespace ally {

enum class DataSource { synth_blobs, synth_regression, idx_files, csv };

const char* to_string(DataSource s) noexcept;
DataSource parse_data_source(const std::string& name);

struct DatasetSpec {
  DataSource source = DataSource::synth_blobs;
  Normalization normalization = Normalization::none;
  BlobsSpec blobs;
  RegressionSpec regression;
  std::filesystem::path train_images, train_labels;  // idx_files
  std::filesystem::path test_images, test_labels;    // optional; otherwise carved
  std::filesystem::path csv_path;
  std::vector<std::string> target_columns;
  std::vector<std::string> feature_columns;
  double test_fraction = 0.2;  // carved when no separate test files exist
  std::size_t pool_limit = 0;  // keep only the first n pool rows (0 = all)
  std::size_t n_initial = 100;
  std::size_t redundancy = 1;  // clone factor applied after the initial split
  std::uint64_t seed = 0;      // data generation and test carving
};

/// Builds the pool (all unlabeled, test split attached) for a dataset spec.
Pool load_dataset(const DatasetSpec& spec);

struct GenerateOptions {
  std::size_t n_trajectories = 50;
  double step_size = 0.05;
  std::size_t n_steps = 200;
  std::size_t snapshot_every = 20;
  double uninformative_fraction = 0.1;  // start points come from this lowest share
  std::size_t image_rows = 0;  // PGM tile shape; 0 infers a square when possible
  std::size_t image_cols = 0;
};

struct ExperimentConfig {
  DatasetSpec dataset;
  std::vector<std::size_t> hidden_dims{64, 32};
  PdclConfig pdcl;
  DualHeadConfig dual_head;
  std::vector<Strategy> strategies{Strategy::ally, Strategy::random};
  std::size_t budget = 200;
  std::size_t n_rounds = 5;
  std::size_t k_clusters = 0;  // 0 means k = budget
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  std::filesystem::path output_dir = "out";
  GenerateOptions generate;

  std::size_t effective_k() const noexcept { return k_clusters == 0 ? budget : k_clusters; }
  void validate() const;
};

/// Default epsilon by task: 0.2 for classification, 0.1 for regression.
ExperimentConfig default_config(DataSource source = DataSource::synth_blobs);

/// Applies one `key = value` setting. Unknown keys and bad values raise
/// config errors.
void apply_setting(ExperimentConfig& config, const std::string& key, const std::string& value);

/// Parses a key-value config text ('#' comments, blank lines ignored) on top
/// of `base`.
ExperimentConfig parse_config(const std::string& text, ExperimentConfig base = default_config());
ExperimentConfig load_config(const std::filesystem::path& path);

/// Every setting as `key = value` lines in a fixed order; parse_config of the
/// result reproduces the config.
std::string serialize_config(const ExperimentConfig& config);

/// FNV-1a of the serialized config, as 16 hex digits.
std::string config_hash(const ExperimentConfig& config);

struct CurvePoint {
  Strategy strategy = Strategy::random;
  std::uint64_t seed = 0;
  std::size_t round = 0;
  std::size_t n_labeled = 0;
  std::string metric_name;  // accuracy or mse
  double metric_value = 0.0;
  std::size_t k = 0;

  friend bool operator==(const CurvePoint&, const CurvePoint&) = default;
};

struct TrainedModel {
  ModelParams params;
  DualState dual;
  TrainReport report;
};

/// PDCL training on the labeled rows of `pool` from a fresh initialization,
/// optionally followed by dual-head fitting on the frozen embeddings.
TrainedModel train_model(const Pool& pool, const ExperimentConfig& config, std::uint64_t seed,
                         bool with_dual_head);

struct RoundOutcome {
  Pool pool;  // after moving the queried batch
  CurvePoint point;
  TrainReport report;
  QueryBatch batch;            // positions refer to the pre-move unlabeled set
  std::size_t dup_labeled = 0;  // queried rows cloned from an already labeled row
  std::size_t dup_in_batch = 0; // queried rows sharing provenance with an earlier pick
};

/// One round: fresh PDCL training on the labeled set, dual head (ally and
/// top_dual only), selection, oracle labeling, and the test metric of the
/// model trained before the move.
RoundOutcome al_round(const Pool& pool, const ExperimentConfig& config, Strategy strategy,
                      std::size_t round, std::uint64_t seed);

/// Test accuracy (classification) or mean squared error (regression).
double test_metric(const ModelParams& params, const Pool& pool, std::string* name = nullptr);

struct CellRecord {
  Strategy strategy = Strategy::random;
  std::uint64_t seed = 0;
  std::size_t k = 0;
  bool ok = true;
  std::string error;
  std::vector<double> violation_fractions;  // per round
  std::vector<bool> dual_head_trained;      // per round
  std::vector<std::size_t> dup_labeled;     // per round
  std::vector<std::size_t> dup_in_batch;
  double seconds = 0.0;
};

struct SummaryRow {
  Strategy strategy = Strategy::random;
  std::size_t k = 0;
  std::size_t round = 0;
  std::size_t n_labeled = 0;
  std::string metric_name;
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation; 0 with a single seed
  std::size_t n_seeds = 0;
};

struct ExperimentResult {
  std::vector<CurvePoint> points;
  std::vector<CellRecord> cells;
  std::vector<SummaryRow> summary;
  std::string config_hash;
  double wall_seconds = 0.0;

  bool all_ok() const noexcept;
};

std::vector<SummaryRow> summarize(const std::vector<CurvePoint>& points);

/// Runs every (seed, strategy) cell. A failing cell is recorded and the
/// others still run. When `write_outputs` is set, each finished cell is
/// written atomically under output_dir/cells and the combined files at the end.
ExperimentResult run_experiment(const ExperimentConfig& config, bool write_outputs = false);

/// curves.csv, summary.csv and meta.json under `dir`.
void write_experiment(const ExperimentResult& result, const ExperimentConfig& config,
                      const std::filesystem::path& dir);

std::string curves_csv(const std::vector<CurvePoint>& points);
std::string summary_csv(const std::vector<SummaryRow>& rows);

/// ALLY only, one run per k. The values 1 and budget are always included.
std::vector<std::size_t> cluster_grid(std::vector<std::size_t> k_values, std::size_t budget);
std::map<std::size_t, ExperimentResult> sweep_clusters(const ExperimentConfig& config,
                                                       const std::vector<std::size_t>& k_values,
                                                       bool write_outputs = false);

struct RedundancyComparison {
  std::size_t factor = 1;
  ExperimentResult original;
  ExperimentResult cloned;
  // Per seed, mean over rounds of (ally - random) metric; sign-adjusted so
  // that positive always favours ally.
  std::map<std::uint64_t, double> gap_original;
  std::map<std::uint64_t, double> gap_cloned;
  std::size_t dup_labeled_cloned = 0;  // total over ally cells and rounds
};

RedundancyComparison sweep_redundancy(const ExperimentConfig& config, std::size_t factor,
                                      bool write_outputs = false);

struct GenerateResult {
  std::vector<AscentTrajectory> trajectories;
  std::vector<std::size_t> start_rows;  // pool rows the trajectories start from
  double clip_lo = 0.0;
  double clip_hi = 1.0;
  TrainReport report;
};

/// Trains on the initial labeled set of the first seed, then runs input
/// ascent from the least informative unlabeled rows. Writes scores.csv,
/// generate.json and (for image-shaped data) snapshots.pgm when requested.
GenerateResult run_generate(const ExperimentConfig& config, bool write_outputs = false);

}  // namespace ally
