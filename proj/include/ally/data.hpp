#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ally/dataset.hpp"

namespace ally {

/// A pool-based active learning dataset. Every pool row carries its oracle
/// label; the learner only sees labels of rows listed in `labeled_idx`.
/// The test split is held separately and never enters the pool.
struct Pool {
  Matrix features;  // n x D
  Targets labels;   // n oracle labels
  std::vector<std::size_t> labeled_idx;
  std::vector<std::size_t> unlabeled_idx;
  std::vector<std::size_t> provenance;  // source row of each row (identity unless cloned)
  Matrix test_features;
  Targets test_labels;

  std::size_t size() const noexcept { return features.rows(); }
  std::size_t dim() const noexcept { return features.cols(); }

  LabeledSet labeled() const;
  LabeledSet test() const { return {test_features, test_labels}; }
  Matrix labeled_features() const { return features.select_rows(labeled_idx); }
  Matrix unlabeled_features() const { return features.select_rows(unlabeled_idx); }

  /// Throws a contract error if index sets overlap, go out of range, or
  /// labels are missing.
  void check_invariants() const;
};

/// Pool with every row unlabeled and provenance = identity.
Pool make_pool(Matrix features, Targets labels);

enum class Normalization { none, minmax, zscore };

Normalization parse_normalization(const std::string& name);

/// Per-column affine map fitted on one matrix and applied to others.
struct Normalizer {
  Normalization kind = Normalization::none;
  std::vector<double> offset;
  std::vector<double> scale;

  static constexpr double variance_floor = 1e-12;

  static Normalizer fit(const Matrix& m, Normalization kind);
  void apply(Matrix& m) const;
};

/// Fits on the pool features (training split) and applies to pool and test
/// features. Regression targets are z-scored the same way when `targets` is set.
void normalize_pool(Pool& pool, Normalization kind, bool targets = false);

/// Reads an IDX image file (magic 2051) and label file (magic 2049). Pixels
/// are scaled to [0, 1]; images are flattened row-major.
Pool load_idx(const std::filesystem::path& images, const std::filesystem::path& labels);

/// Writes features (values in [0, 1], quantized to bytes) and class labels.
void write_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
               const Matrix& features, const std::vector<int>& classes, std::size_t img_rows,
               std::size_t img_cols);

/// Reads a numeric CSV with a header row. Empty `feature_columns` selects every
/// non-target column. Features and targets are normalized over the file rows.
Pool load_csv(const std::filesystem::path& path, const std::vector<std::string>& target_columns,
              const std::vector<std::string>& feature_columns = {},
              Normalization normalization = Normalization::zscore);

struct BlobsSpec {
  std::size_t n_per_class = 100;
  std::size_t n_classes = 4;
  std::size_t dim = 2;
  double spread = 0.5;       // per-coordinate noise standard deviation
  double separation = 3.0;   // distance between neighbouring class centers
  std::size_t test_per_class = 100;
  std::uint64_t seed = 0;
};

/// Gaussian blobs around centers spaced evenly on a circle in the first two
/// coordinates (on a line when dim == 1). Exact class balance in pool and
/// test split.
Pool synth_blobs(const BlobsSpec& spec);

/// Class centers used by synth_blobs.
Matrix blob_centers(std::size_t n_classes, std::size_t dim, double separation);

struct RegressionSpec {
  std::size_t n = 500;
  std::size_t n_test = 500;
  std::size_t dim = 4;
  double noise = 0.1;
  std::uint64_t seed = 0;
};

/// y = w.x + 0.5 sin(3 x_0) + noise with x uniform in [-1, 1]^dim.
Pool synth_regression(const RegressionSpec& spec);

/// Replicates each row `factor` times. Labeled rows keep one labeled copy
/// and contribute factor - 1 unlabeled copies; unlabeled rows contribute
/// factor unlabeled copies.
Pool clone_redundant(const Pool& pool, std::size_t factor);

/// Labels n_initial rows drawn uniformly without replacement.
Pool split_initial(const Pool& pool, std::size_t n_initial, std::uint64_t seed);

/// Moves the unlabeled rows at the given positions of `unlabeled_idx` into
/// the labeled set.
Pool move_to_labeled(const Pool& pool, const std::vector<std::size_t>& unlabeled_positions);

/// Moves a random fraction of the pool rows into the test split.
Pool carve_test_split(const Pool& pool, double fraction, std::uint64_t seed);

}  // namespace ally
