#include "ally/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>

#include "ally/error.hpp"

namespace ally {

void MlpArchitecture::validate() const {
  require(input_dim >= 1, ErrorKind::input, "architecture input_dim must be >= 1");
  require(output_dim >= 1, ErrorKind::input, "architecture output_dim must be >= 1");
  for (std::size_t h : hidden_dims)
    require(h >= 1, ErrorKind::input, "architecture hidden dims must be >= 1");
}

std::size_t Mlp::input_dim() const noexcept {
  return layers.empty() ? 0 : layers.front().in_dim();
}

std::size_t Mlp::output_dim() const noexcept {
  return layers.empty() ? 0 : layers.back().out_dim();
}

std::size_t Mlp::parameter_count() const noexcept {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.weight.size() + l.bias.size();
  return n;
}

Mlp Mlp::zeros_like() const {
  Mlp z;
  z.layers.reserve(layers.size());
  for (const auto& l : layers)
    z.layers.push_back({Matrix(l.out_dim(), l.in_dim()), std::vector<double>(l.bias.size()),
                        l.activation});
  return z;
}

std::vector<std::span<double>> Mlp::parameter_views() {
  std::vector<std::span<double>> views;
  for (auto& l : layers) {
    views.emplace_back(l.weight.data());
    views.emplace_back(l.bias);
  }
  return views;
}

std::vector<std::span<const double>> Mlp::parameter_views() const {
  std::vector<std::span<const double>> views;
  for (const auto& l : layers) {
    views.emplace_back(l.weight.data());
    views.emplace_back(l.bias);
  }
  return views;
}

namespace {

DenseLayer make_layer(std::size_t in, std::size_t out, Activation act, Rng& rng) {
  const double bound = act == Activation::relu
                           ? std::sqrt(6.0 / static_cast<double>(in))
                           : std::sqrt(6.0 / static_cast<double>(in + out));
  DenseLayer layer{Matrix(out, in), std::vector<double>(out, 0.0), act};
  for (double& w : layer.weight.data()) w = (2.0 * uniform01(rng) - 1.0) * bound;
  return layer;
}

}  // namespace

Mlp init_mlp(std::size_t in, std::span<const std::size_t> hidden, std::size_t out,
             Activation hidden_act, Rng& rng) {
  Mlp net;
  std::size_t prev = in;
  for (std::size_t h : hidden) {
    net.layers.push_back(make_layer(prev, h, hidden_act, rng));
    prev = h;
  }
  net.layers.push_back(make_layer(prev, out, Activation::identity, rng));
  return net;
}

Matrix mlp_forward(const Mlp& net, const Matrix& x, MlpCache* cache) {
  if (!net.empty())
    require(x.cols() == net.input_dim(), ErrorKind::shape,
            "forward: input has " + std::to_string(x.cols()) + " columns, network expects " +
                std::to_string(net.input_dim()));
  if (cache) {
    cache->inputs.clear();
    cache->pre_activations.clear();
    cache->batch_rows = x.rows();
  }
  Matrix h = x;
  for (const auto& layer : net.layers) {
    Matrix z = matmul_nt(h, layer.weight);
    for (std::size_t r = 0; r < z.rows(); ++r) {
      auto zr = z.row(r);
      for (std::size_t c = 0; c < zr.size(); ++c) zr[c] += layer.bias[c];
    }
    Matrix a = z;
    if (layer.activation == Activation::relu)
      for (double& v : a.data()) v = v > 0.0 ? v : 0.0;
    if (cache) {
      cache->inputs.push_back(std::move(h));
      cache->pre_activations.push_back(std::move(z));
    }
    h = std::move(a);
  }
  return h;
}

Mlp mlp_backward(const Mlp& net, const MlpCache& cache, const Matrix& grad_out,
                 Matrix* grad_input) {
  require(cache.inputs.size() == net.layers.size() &&
              cache.pre_activations.size() == net.layers.size(),
          ErrorKind::contract, "backward: cache does not match network depth");
  require(grad_out.rows() == cache.batch_rows, ErrorKind::shape,
          "backward: gradient batch size differs from cached forward pass");
  if (!net.empty())
    require(grad_out.cols() == net.output_dim(), ErrorKind::shape,
            "backward: gradient width differs from network output");

  Mlp grads = net.zeros_like();
  Matrix delta = grad_out;
  for (std::size_t li = net.layers.size(); li-- > 0;) {
    const DenseLayer& layer = net.layers[li];
    const Matrix& pre = cache.pre_activations[li];
    require(pre.rows() == delta.rows() && pre.cols() == layer.out_dim(), ErrorKind::contract,
            "backward: cached pre-activation shape mismatch");
    if (layer.activation == Activation::relu) {
      auto d = delta.data();
      auto p = pre.data();
      for (std::size_t i = 0; i < d.size(); ++i)
        if (!(p[i] > 0.0)) d[i] = 0.0;
    }
    grads.layers[li].weight = matmul_tn(delta, cache.inputs[li]);
    auto& gb = grads.layers[li].bias;
    for (std::size_t r = 0; r < delta.rows(); ++r) {
      auto dr = delta.row(r);
      for (std::size_t c = 0; c < dr.size(); ++c) gb[c] += dr[c];
    }
    if (li > 0 || grad_input) delta = matmul(delta, layer.weight);
  }
  if (grad_input) *grad_input = std::move(delta);
  return grads;
}

std::uint64_t fingerprint(const Mlp& net, std::uint64_t seed) noexcept {
  std::uint64_t h = seed;
  auto mix = [&h](std::span<const double> xs) {
    for (double x : xs) {
      std::uint64_t bits;
      std::memcpy(&bits, &x, sizeof bits);
      for (int b = 0; b < 8; ++b) {
        h ^= (bits >> (8 * b)) & 0xffu;
        h *= 0x100000001b3ULL;
      }
    }
  };
  for (const auto& l : net.layers) {
    h ^= l.out_dim() * 31 + l.in_dim();
    h *= 0x100000001b3ULL;
    mix(l.weight.data());
    mix(l.bias);
  }
  return h;
}

}  // namespace ally
