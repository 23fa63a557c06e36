#include "ally/selection.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "ally/error.hpp"
#include "ally/rng.hpp"

namespace ally {

const char* to_string(Strategy s) noexcept {
  switch (s) {
    case Strategy::ally: return "ally";
    case Strategy::random: return "random";
    case Strategy::coreset: return "coreset";
    case Strategy::top_dual: return "top_dual";
  }
  return "unknown";
}

Strategy parse_strategy(const std::string& name) {
  if (name == "ally") return Strategy::ally;
  if (name == "random") return Strategy::random;
  if (name == "coreset") return Strategy::coreset;
  if (name == "top_dual") return Strategy::top_dual;
  fail(ErrorKind::config, "unknown strategy '" + name + "'");
}

namespace {

std::size_t nearest(const Matrix& centroids, std::span<const double> p, double& best) {
  std::size_t arg = 0;
  best = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < centroids.rows(); ++c) {
    const double d = squared_distance(centroids.row(c), p);
    if (d < best) {
      best = d;
      arg = c;
    }
  }
  return arg;
}

Matrix seed_centroids(const Matrix& points, std::size_t k, Rng& rng, KMeansSeeding seeding) {
  const std::size_t n = points.rows();
  std::vector<std::size_t> chosen;
  if (seeding == KMeansSeeding::uniform) {
    auto perm = permutation(n, rng);
    chosen.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(k));
  } else {
    chosen.push_back(uniform_index(rng, n));
    std::vector<double> d2(n);
    for (std::size_t i = 0; i < n; ++i)
      d2[i] = squared_distance(points.row(i), points.row(chosen[0]));
    while (chosen.size() < k) {
      const double total = std::accumulate(d2.begin(), d2.end(), 0.0);
      std::size_t pick = n;
      if (total > 0.0) {
        const double u = uniform01(rng) * total;
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          acc += d2[i];
          if (d2[i] > 0.0 && u < acc) {
            pick = i;
            break;
          }
        }
        if (pick == n)  // rounding at the tail
          for (std::size_t i = n; i-- > 0;)
            if (d2[i] > 0.0) {
              pick = i;
              break;
            }
      } else {
        // Fewer distinct points than k: take the lowest unchosen index.
        for (std::size_t i = 0; i < n && pick == n; ++i)
          if (std::find(chosen.begin(), chosen.end(), i) == chosen.end()) pick = i;
      }
      chosen.push_back(pick);
      for (std::size_t i = 0; i < n; ++i)
        d2[i] = std::min(d2[i], squared_distance(points.row(i), points.row(pick)));
    }
  }
  return points.select_rows(chosen);
}

}  // namespace

ClusterAssignment kmeans(const Matrix& points, std::size_t k, std::uint64_t seed,
                         const KMeansOptions& options) {
  const std::size_t n = points.rows(), d = points.cols();
  require(k >= 1, ErrorKind::input, "kmeans: k must be >= 1");
  require(k <= n, ErrorKind::input,
          "kmeans: k = " + std::to_string(k) + " exceeds point count " + std::to_string(n));
  require(points.all_finite(), ErrorKind::numeric, "kmeans: non-finite points");

  Rng rng(derive_seed(seed, 0x6b6dULL));
  ClusterAssignment out;
  out.centroids = seed_centroids(points, k, rng, options.seeding);
  out.assignment.assign(n, 0);
  std::vector<double> dist(n);

  auto assign = [&] {
    double inertia = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      out.assignment[i] = nearest(out.centroids, points.row(i), dist[i]);
      inertia += dist[i];
    }
    return inertia;
  };

  out.inertia = assign();
  out.inertia_trace.push_back(out.inertia);
  for (std::size_t it = 0; it < options.max_iters; ++it) {
    Matrix sums(k, d);
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t c = out.assignment[i];
      ++counts[c];
      auto s = sums.row(c);
      auto p = points.row(i);
      for (std::size_t j = 0; j < d; ++j) s[j] += p[j];
    }
    Matrix next(k, d);
    std::vector<bool> taken(n, false);
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] > 0) {
        for (std::size_t j = 0; j < d; ++j)
          next(c, j) = sums(c, j) / static_cast<double>(counts[c]);
        continue;
      }
      // Empty cluster: move it onto the point farthest from its centroid.
      std::size_t far = 0;
      double far_d = -1.0;
      for (std::size_t i = 0; i < n; ++i)
        if (!taken[i] && dist[i] > far_d) {
          far_d = dist[i];
          far = i;
        }
      taken[far] = true;
      auto dst = next.row(c);
      auto src = points.row(far);
      std::copy(src.begin(), src.end(), dst.begin());
    }
    double shift = 0.0;
    for (std::size_t c = 0; c < k; ++c)
      shift = std::max(shift, std::sqrt(squared_distance(next.row(c), out.centroids.row(c))));
    out.centroids = std::move(next);
    out.iterations = it + 1;
    out.inertia = assign();
    out.inertia_trace.push_back(out.inertia);
    if (shift < options.tol) break;
  }
  return out;
}

namespace {

// Indices sorted by descending score, ties by ascending index.
void sort_by_score(std::vector<std::size_t>& idx, std::span<const double> score) {
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    if (score[a] != score[b]) return score[a] > score[b];
    return a < b;
  });
}

}  // namespace

QueryBatch ally_select(const Matrix& embeddings_unlabeled, std::span<const double> predicted_duals,
                       std::size_t b, std::size_t k, std::uint64_t seed,
                       const AllyOptions& options) {
  const std::size_t n = embeddings_unlabeled.rows();
  require(predicted_duals.size() == n, ErrorKind::shape,
          "ally_select: one predicted dual per unlabeled sample required");
  require(b >= 1, ErrorKind::input, "ally_select: budget must be >= 1");
  require(b <= n, ErrorKind::input,
          "ally_select: budget " + std::to_string(b) + " exceeds unlabeled count " +
              std::to_string(n));
  require(k >= 1 && k <= b, ErrorKind::input, "ally_select: need 1 <= k <= b");

  const auto clusters = kmeans(embeddings_unlabeled, k, seed, options.kmeans);
  std::vector<std::vector<std::size_t>> members(k);
  for (std::size_t i = 0; i < n; ++i) members[clusters.assignment[i]].push_back(i);

  QueryBatch batch;
  batch.strategy = Strategy::ally;
  std::vector<bool> picked(n, false);
  const std::size_t per_cluster = b / k;
  for (std::size_t c = 0; c < k; ++c) {
    sort_by_score(members[c], predicted_duals);
    const std::size_t take = std::min(per_cluster, members[c].size());
    for (std::size_t j = 0; j < take; ++j) {
      batch.indices.push_back(members[c][j]);
      batch.source_cluster.push_back(c);
      picked[members[c][j]] = true;
    }
  }
  if (options.fill_remainder && batch.indices.size() < b) {
    std::vector<std::size_t> rest;
    for (std::size_t i = 0; i < n; ++i)
      if (!picked[i]) rest.push_back(i);
    sort_by_score(rest, predicted_duals);
    for (std::size_t j = 0; batch.indices.size() < b; ++j) {
      batch.indices.push_back(rest[j]);
      batch.source_cluster.push_back(SIZE_MAX);
    }
  }
  return batch;
}

QueryBatch top_dual_select(std::span<const double> predicted_duals, std::size_t b) {
  require(b <= predicted_duals.size(), ErrorKind::input, "top_dual_select: budget exceeds pool");
  std::vector<std::size_t> idx(predicted_duals.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  sort_by_score(idx, predicted_duals);
  idx.resize(b);
  return {std::move(idx), Strategy::top_dual, {}};
}

QueryBatch random_select(std::size_t n_unlabeled, std::size_t b, std::uint64_t seed) {
  require(b <= n_unlabeled, ErrorKind::input,
          "random_select: budget " + std::to_string(b) + " exceeds unlabeled count " +
              std::to_string(n_unlabeled));
  Rng rng(derive_seed(seed, 0x7a4dULL));
  auto perm = permutation(n_unlabeled, rng);
  perm.resize(b);
  return {std::move(perm), Strategy::random, {}};
}

QueryBatch coreset_select(const Matrix& embeddings_labeled, const Matrix& embeddings_unlabeled,
                          std::size_t b) {
  const std::size_t n = embeddings_unlabeled.rows();
  require(b <= n, ErrorKind::input, "coreset_select: budget exceeds unlabeled count");
  if (embeddings_labeled.rows() > 0)
    require(embeddings_labeled.cols() == embeddings_unlabeled.cols(), ErrorKind::shape,
            "coreset_select: labeled and unlabeled embedding widths differ");

  QueryBatch batch;
  batch.strategy = Strategy::coreset;
  if (b == 0) return batch;
  std::vector<double> min_d(n, std::numeric_limits<double>::infinity());
  for (std::size_t l = 0; l < embeddings_labeled.rows(); ++l)
    for (std::size_t i = 0; i < n; ++i)
      min_d[i] = std::min(min_d[i], squared_distance(embeddings_labeled.row(l),
                                                     embeddings_unlabeled.row(i)));
  std::vector<bool> picked(n, false);
  while (batch.indices.size() < b) {
    std::size_t arg = n;
    if (embeddings_labeled.rows() == 0 && batch.indices.empty()) {
      arg = 0;
    } else {
      double best = -1.0;
      for (std::size_t i = 0; i < n; ++i)
        if (!picked[i] && min_d[i] > best) {
          best = min_d[i];
          arg = i;
        }
    }
    picked[arg] = true;
    batch.indices.push_back(arg);
    for (std::size_t i = 0; i < n; ++i)
      min_d[i] = std::min(min_d[i], squared_distance(embeddings_unlabeled.row(arg),
                                                     embeddings_unlabeled.row(i)));
  }
  return batch;
}

double covering_radius(const Matrix& embeddings_labeled, const Matrix& embeddings_unlabeled,
                       std::span<const std::size_t> selected) {
  double radius = 0.0;
  for (std::size_t i = 0; i < embeddings_unlabeled.rows(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t l = 0; l < embeddings_labeled.rows(); ++l)
      best = std::min(best, squared_distance(embeddings_labeled.row(l), embeddings_unlabeled.row(i)));
    for (std::size_t s : selected)
      best = std::min(best, squared_distance(embeddings_unlabeled.row(s), embeddings_unlabeled.row(i)));
    radius = std::max(radius, best);
  }
  return std::sqrt(radius);
}

}  // namespace ally
