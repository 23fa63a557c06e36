#include "ally/model.hpp"

#include <cmath>
#include <span>

#include "ally/error.hpp"

namespace ally {

std::size_t ModelParams::input_dim() const noexcept {
  return backbone.empty() ? pred_head.input_dim() : backbone.input_dim();
}

std::size_t ModelParams::embedding_dim() const noexcept {
  return backbone.empty() ? pred_head.input_dim() : backbone.output_dim();
}

ModelParams init_params(const MlpArchitecture& arch, std::uint64_t seed) {
  arch.validate();
  Rng rng(seed);
  ModelParams p;
  std::size_t prev = arch.input_dim;
  for (std::size_t h : arch.hidden_dims) {
    const double bound = arch.activation == Activation::relu
                             ? std::sqrt(6.0 / static_cast<double>(prev))
                             : std::sqrt(6.0 / static_cast<double>(prev + h));
    DenseLayer layer{Matrix(h, prev), std::vector<double>(h, 0.0), arch.activation};
    for (double& w : layer.weight.data()) w = (2.0 * uniform01(rng) - 1.0) * bound;
    p.backbone.layers.push_back(std::move(layer));
    prev = h;
  }
  p.pred_head = init_mlp(prev, std::span<const std::size_t>{}, arch.output_dim,
                         Activation::identity, rng);
  return p;
}

std::uint64_t primal_fingerprint(const ModelParams& params) noexcept {
  return fingerprint(params.pred_head, fingerprint(params.backbone));
}

ForwardResult forward(const ModelParams& params, const Matrix& x) {
  require(x.cols() == params.input_dim(), ErrorKind::shape,
          "forward: input width " + std::to_string(x.cols()) + " != model input " +
              std::to_string(params.input_dim()));
  ForwardResult r;
  r.embeddings = mlp_forward(params.backbone, x, &r.cache.backbone);
  r.outputs = mlp_forward(params.pred_head, r.embeddings, &r.cache.head);
  r.cache.params_fingerprint = primal_fingerprint(params);
  return r;
}

Matrix embed(const ModelParams& params, const Matrix& x) {
  require(x.cols() == params.input_dim(), ErrorKind::shape, "embed: input width mismatch");
  return mlp_forward(params.backbone, x);
}

ParamGrads backward_lagrangian(const ModelParams& params, const ForwardCache& cache,
                               const Matrix& grad_outputs) {
  require(cache.params_fingerprint == primal_fingerprint(params), ErrorKind::contract,
          "backward: forward cache was produced by different parameters");
  ParamGrads g;
  Matrix grad_embed;
  g.pred_head = mlp_backward(params.pred_head, cache.head, grad_outputs,
                             params.backbone.empty() ? nullptr : &grad_embed);
  if (params.backbone.empty())
    g.backbone = Mlp{};
  else
    g.backbone = mlp_backward(params.backbone, cache.backbone, grad_embed);
  return g;
}

double softplus(double z) noexcept {
  return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

double sigmoid(double z) noexcept {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace ally
