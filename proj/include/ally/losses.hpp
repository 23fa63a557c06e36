#pragma once

#include <span>
#include <vector>

#include "ally/matrix.hpp"

namespace ally {

enum class LossKind { cross_entropy, mse };

/// Per-sample loss values and their gradients w.r.t. the model outputs.
/// Gradients are of each sample's own loss (not of a batch mean).
struct PerSampleLoss {
  std::vector<double> values;
  Matrix grads;
};

/// -log softmax(logits)[label] per row, via log-sum-exp.
PerSampleLoss cross_entropy(const Matrix& logits, std::span<const int> labels);

/// Mean over output dims of the squared error, per row.
PerSampleLoss mse(const Matrix& preds, const Matrix& targets);

struct ScalarLoss {
  double value = 0.0;
  std::vector<double> grads;
};

/// Mean squared error between predicted and target dual variables.
/// Targets must be nonnegative.
ScalarLoss dual_head_fit_loss(std::span<const double> predicted,
                              std::span<const double> lambda_targets);

}  // namespace ally
