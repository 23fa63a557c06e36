#pragma once

#include <cstdint>

#include "ally/mlp.hpp"

namespace ally {

/// Parameters of the full model: a backbone mapping inputs to embeddings, a
/// prediction head on top of it, and a dual head estimating per-sample
/// dual variables from embeddings.
///
/// The model applies the backbone first: outputs = pred_head(backbone(x)).
/// For an architecture with hidden dims [h1, ..., hk] the backbone holds the
/// k relu layers (embedding size hk) and the prediction head is the final
/// affine layer. With no hidden layers the backbone is empty and embeddings
/// are the raw inputs.
struct ModelParams {
  Mlp backbone;
  Mlp pred_head;
  Mlp dual_head;  // empty until trained; final output passes through softplus

  std::size_t input_dim() const noexcept;
  std::size_t embedding_dim() const noexcept;
  std::size_t output_dim() const noexcept { return pred_head.output_dim(); }

  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

ModelParams init_params(const MlpArchitecture& arch, std::uint64_t seed);

struct ForwardCache {
  MlpCache backbone;
  MlpCache head;
  std::uint64_t params_fingerprint = 0;
};

struct ForwardResult {
  Matrix embeddings;
  Matrix outputs;
  ForwardCache cache;
};

ForwardResult forward(const ModelParams& params, const Matrix& x);

/// Embeddings only (no cache retained).
Matrix embed(const ModelParams& params, const Matrix& x);

struct ParamGrads {
  Mlp backbone;
  Mlp pred_head;
};

/// Gradients of a scalar whose derivative w.r.t. the outputs is `grad_outputs`.
/// The cache must come from `forward` on the same parameter values.
ParamGrads backward_lagrangian(const ModelParams& params, const ForwardCache& cache,
                               const Matrix& grad_outputs);

/// Fingerprint of the trainable (backbone + prediction head) parameters.
std::uint64_t primal_fingerprint(const ModelParams& params) noexcept;

double softplus(double z) noexcept;
double sigmoid(double z) noexcept;

}  // namespace ally
