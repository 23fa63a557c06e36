#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ally/matrix.hpp"
#include "ally/rng.hpp"

namespace ally {

enum class Activation { relu, identity };

struct MlpArchitecture {
  std::size_t input_dim = 1;
  std::vector<std::size_t> hidden_dims;
  std::size_t output_dim = 1;
  Activation activation = Activation::relu;

  void validate() const;
};

/// Fully-connected layer computing act(x W^T + b); weight is out x in.
struct DenseLayer {
  Matrix weight;
  std::vector<double> bias;
  Activation activation = Activation::identity;

  std::size_t in_dim() const noexcept { return weight.cols(); }
  std::size_t out_dim() const noexcept { return weight.rows(); }
  friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

/// A chain of dense layers. An empty chain is the identity map.
struct Mlp {
  std::vector<DenseLayer> layers;

  std::size_t input_dim() const noexcept;
  std::size_t output_dim() const noexcept;
  std::size_t parameter_count() const noexcept;
  bool empty() const noexcept { return layers.empty(); }

  /// Zero-valued copy with identical shapes (gradient accumulator).
  Mlp zeros_like() const;

  std::vector<std::span<double>> parameter_views();
  std::vector<std::span<const double>> parameter_views() const;

  friend bool operator==(const Mlp&, const Mlp&) = default;
};

/// Builds a chain in -> hidden... -> out. Hidden layers use `hidden_act`,
/// the last layer is affine. Relu layers get Kaiming-uniform weights,
/// identity layers Xavier-uniform; biases start at zero.
Mlp init_mlp(std::size_t in, std::span<const std::size_t> hidden, std::size_t out,
             Activation hidden_act, Rng& rng);

/// Activations retained by a forward pass: the input of every layer and its
/// pre-activation.
struct MlpCache {
  std::vector<Matrix> inputs;
  std::vector<Matrix> pre_activations;
  std::size_t batch_rows = 0;
};

Matrix mlp_forward(const Mlp& net, const Matrix& x, MlpCache* cache = nullptr);

/// Backpropagates `grad_out` (d scalar / d output) through the chain. Returns
/// parameter gradients shaped like `net`; writes d scalar / d input into
/// `grad_input` when non-null.
Mlp mlp_backward(const Mlp& net, const MlpCache& cache, const Matrix& grad_out,
                 Matrix* grad_input = nullptr);

/// FNV-1a over the raw parameter bytes.
std::uint64_t fingerprint(const Mlp& net, std::uint64_t seed = 0xcbf29ce484222325ULL) noexcept;

}  // namespace ally
