#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ally/matrix.hpp"

namespace ally {

enum class KMeansSeeding { kmeans_plus_plus, uniform };

struct KMeansOptions {
  std::size_t max_iters = 100;
  double tol = 1e-8;  // stop once every centroid moves less than this
  KMeansSeeding seeding = KMeansSeeding::kmeans_plus_plus;
};

struct ClusterAssignment {
  Matrix centroids;                     // k x d
  std::vector<std::size_t> assignment;  // nearest centroid per point
  double inertia = 0.0;                 // sum of squared distances to assigned centroid
  std::size_t iterations = 0;
  std::vector<double> inertia_trace;    // inertia after each assignment step
};

ClusterAssignment kmeans(const Matrix& points, std::size_t k, std::uint64_t seed,
                         const KMeansOptions& options = {});

enum class Strategy { ally, random, coreset, top_dual };

const char* to_string(Strategy s) noexcept;
Strategy parse_strategy(const std::string& name);

struct QueryBatch {
  std::vector<std::size_t> indices;  // positions in the unlabeled set
  Strategy strategy = Strategy::random;
  // For ally: cluster each index was drawn from; SIZE_MAX for remainder picks.
  std::vector<std::size_t> source_cluster;
};

struct AllyOptions {
  KMeansOptions kmeans;
  // Spend the b - k*floor(b/k) leftover slots (and any shortfall from small
  // clusters) on the highest-dual unselected samples.
  bool fill_remainder = true;
};

/// Clusters the unlabeled embeddings into k groups and takes the floor(b/k)
/// highest predicted duals from each cluster (ties: lowest index).
QueryBatch ally_select(const Matrix& embeddings_unlabeled, std::span<const double> predicted_duals,
                       std::size_t b, std::size_t k, std::uint64_t seed,
                       const AllyOptions& options = {});

/// The b highest predicted duals, no clustering.
QueryBatch top_dual_select(std::span<const double> predicted_duals, std::size_t b);

/// Uniform sample without replacement.
QueryBatch random_select(std::size_t n_unlabeled, std::size_t b, std::uint64_t seed);

/// Greedy k-center: repeatedly adds the unlabeled point farthest from every
/// labeled or already selected point. With no labeled points the first pick
/// is index 0.
QueryBatch coreset_select(const Matrix& embeddings_labeled, const Matrix& embeddings_unlabeled,
                          std::size_t b);

/// max over unlabeled points of the distance to the nearest labeled or
/// selected point.
double covering_radius(const Matrix& embeddings_labeled, const Matrix& embeddings_unlabeled,
                       std::span<const std::size_t> selected);

}  // namespace ally
