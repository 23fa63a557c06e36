#include "ally/optimizer.hpp"

#include <cmath>
#include <string>

#include "ally/error.hpp"

namespace ally {

OptimizerState make_optimizer(OptimizerKind kind, double learning_rate) {
  require(learning_rate > 0.0 && std::isfinite(learning_rate), ErrorKind::input,
          "optimizer learning rate must be positive");
  OptimizerState s;
  s.kind = kind;
  s.learning_rate = learning_rate;
  return s;
}

void optimizer_step(OptimizerState& state, std::span<const std::span<double>> params,
                    std::span<const std::span<const double>> grads) {
  require(params.size() == grads.size(), ErrorKind::shape,
          "optimizer: parameter and gradient tensor counts differ");
  for (std::size_t t = 0; t < params.size(); ++t) {
    require(params[t].size() == grads[t].size(), ErrorKind::shape,
            "optimizer: tensor " + std::to_string(t) + " size mismatch");
    for (double g : grads[t])
      require(std::isfinite(g), ErrorKind::numeric,
              "optimizer: non-finite gradient in tensor " + std::to_string(t));
  }

  if (state.kind == OptimizerKind::sgd) {
    for (std::size_t t = 0; t < params.size(); ++t)
      for (std::size_t i = 0; i < params[t].size(); ++i)
        params[t][i] -= state.learning_rate * grads[t][i];
    ++state.step_count;
    return;
  }

  if (state.first_moment.empty()) {
    for (std::size_t t = 0; t < params.size(); ++t) {
      state.first_moment.emplace_back(params[t].size(), 0.0);
      state.second_moment.emplace_back(params[t].size(), 0.0);
    }
  }
  require(state.first_moment.size() == params.size(), ErrorKind::shape,
          "optimizer: state was created for a different parameter set");
  for (std::size_t t = 0; t < params.size(); ++t)
    require(state.first_moment[t].size() == params[t].size(), ErrorKind::shape,
            "optimizer: accumulator shape mismatch");

  ++state.step_count;
  const double step = static_cast<double>(state.step_count);
  const double c1 = 1.0 - std::pow(state.beta1, step);
  const double c2 = 1.0 - std::pow(state.beta2, step);
  for (std::size_t t = 0; t < params.size(); ++t) {
    auto& m = state.first_moment[t];
    auto& v = state.second_moment[t];
    for (std::size_t i = 0; i < params[t].size(); ++i) {
      const double g = grads[t][i];
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g;
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g * g;
      const double mhat = m[i] / c1;
      const double vhat = v[i] / c2;
      params[t][i] -= state.learning_rate * mhat / (std::sqrt(vhat) + state.epsilon);
    }
  }
}

void optimizer_step(OptimizerState& state, Mlp& params, const Mlp& grads) {
  const auto p = params.parameter_views();
  const auto g = grads.parameter_views();
  optimizer_step(state, p, g);
}

}  // namespace ally
