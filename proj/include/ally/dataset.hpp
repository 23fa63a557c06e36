#pragma once

#include <span>
#include <vector>

#include "ally/losses.hpp"
#include "ally/matrix.hpp"

namespace ally {

/// Supervision for a set of samples: integer classes (cross-entropy) or real
/// target rows (mse).
struct Targets {
  LossKind kind = LossKind::cross_entropy;
  std::vector<int> classes;
  Matrix values;

  static Targets classification(std::vector<int> labels);
  static Targets regression(Matrix values);

  std::size_t size() const noexcept;
  Targets select(std::span<const std::size_t> indices) const;
  Targets concat(const Targets& other) const;

  friend bool operator==(const Targets&, const Targets&) = default;
};

PerSampleLoss evaluate_loss(const Matrix& outputs, const Targets& targets);

struct LabeledSet {
  Matrix features;
  Targets targets;

  std::size_t size() const noexcept { return features.rows(); }
  LabeledSet select(std::span<const std::size_t> indices) const;
};

}  // namespace ally
