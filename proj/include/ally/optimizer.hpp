#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ally/mlp.hpp"

namespace ally {

enum class OptimizerKind { adam, sgd };

struct OptimizerState {
  OptimizerKind kind = OptimizerKind::adam;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t step_count = 0;
  std::vector<std::vector<double>> first_moment;   // adam only
  std::vector<std::vector<double>> second_moment;  // adam only
};

OptimizerState make_optimizer(OptimizerKind kind, double learning_rate);

/// One update of `params` from `grads`. Tensors are matched positionally and
/// must agree in size. Non-finite gradients raise a numeric error before any
/// parameter or accumulator is touched.
void optimizer_step(OptimizerState& state, std::span<const std::span<double>> params,
                    std::span<const std::span<const double>> grads);

void optimizer_step(OptimizerState& state, Mlp& params, const Mlp& grads);

}  // namespace ally
