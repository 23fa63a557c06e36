#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ally/mlp.hpp"

namespace ally {

struct DualHeadConfig {
  std::vector<std::size_t> hidden_dims{64, 32, 16};
  double lr = 1e-3;
  std::size_t epochs = 200;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Fits a relu MLP embedding -> R (softplus output) to the labeled duals by
/// full-batch adam on the mean squared error. The embeddings are inputs only;
/// whatever produced them is not touched. `loss_trace`, when given, receives
/// the fit loss before training and after every epoch.
Mlp train_dual_head(const Matrix& embeddings, std::span<const double> lambdas,
                    const DualHeadConfig& config, std::vector<double>* loss_trace = nullptr);

/// softplus(head(e)) for every row e of `embeddings`.
std::vector<double> predict_duals(const Mlp& head, const Matrix& embeddings);

/// Mean squared error of the head's predictions against `lambdas`.
double dual_fit_loss(const Mlp& head, const Matrix& embeddings, std::span<const double> lambdas);

/// Gradient of dual_fit_loss w.r.t. the head parameters; `loss`, when given,
/// receives the loss value.
Mlp dual_fit_gradient(const Mlp& head, const Matrix& embeddings, std::span<const double> lambdas,
                      double* loss = nullptr);

}  // namespace ally
