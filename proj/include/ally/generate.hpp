#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "ally/model.hpp"

namespace ally {

struct AscentConfig {
  double step_size = 0.05;
  std::size_t n_steps = 200;
  std::vector<double> clip_lo;  // per feature
  std::vector<double> clip_hi;
  std::size_t snapshot_every = 20;

  /// Same [lo, hi] for every feature.
  static AscentConfig with_range(std::size_t dim, double lo, double hi);

  void validate(std::size_t dim) const;
};

struct InputGradient {
  double score = 0.0;          // softplus(dual_head(backbone(x)))
  std::vector<double> grad_x;  // d score / d x
};

/// Predicted dual of `x` and its exact gradient w.r.t. the input features.
/// Requires a trained dual head.
InputGradient input_gradient(const ModelParams& params, std::span<const double> x);

struct AscentSnapshot {
  std::size_t step = 0;
  std::vector<double> x;
  double score = 0.0;
};

struct AscentTrajectory {
  std::vector<AscentSnapshot> snapshots;  // step 0 first, last step last
  std::size_t steps_taken = 0;
  bool stalled = false;  // stopped moving, or ended below the initial score
  bool aborted = false;  // non-finite score; snapshots hold the path so far
  std::string diagnostic;

  double initial_score() const { return snapshots.front().score; }
  double final_score() const { return snapshots.back().score; }
};

/// x <- clip(x + step * grad_x) for n_steps, recording a snapshot every
/// `snapshot_every` steps plus the start and end points. Stops early, with
/// `stalled` set, once an update leaves x unchanged.
AscentTrajectory ascend_input(const ModelParams& params, std::span<const double> x0,
                              const AscentConfig& config);

/// Rows of `x` whose predicted dual falls in the lowest `fraction`, ordered by
/// increasing score.
std::vector<std::size_t> least_informative(const ModelParams& params, const Matrix& x,
                                           double fraction = 0.1);

/// Writes images (rows of length img_rows*img_cols) into one binary PGM laid
/// out as a grid with `grid_cols` tiles per row. Values are mapped linearly
/// from [lo, hi] to [0, 255].
void write_pgm_grid(const std::filesystem::path& path, const std::vector<std::vector<double>>& images,
                    std::size_t img_rows, std::size_t img_cols, std::size_t grid_cols,
                    double lo = 0.0, double hi = 1.0);

/// CSV with columns trajectory, step, score.
void write_score_trace(const std::filesystem::path& path,
                       const std::vector<AscentTrajectory>& trajectories);

}  // namespace ally
