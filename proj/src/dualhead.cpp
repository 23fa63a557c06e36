#include "ally/dualhead.hpp"

#include "ally/error.hpp"
#include "ally/losses.hpp"
#include "ally/model.hpp"
#include "ally/optimizer.hpp"

namespace ally {

void DualHeadConfig::validate() const {
  for (std::size_t h : hidden_dims)
    require(h >= 1, ErrorKind::config, "dual head hidden dims must be >= 1");
  require(lr > 0.0, ErrorKind::config, "dual head lr must be > 0");
}

std::vector<double> predict_duals(const Mlp& head, const Matrix& embeddings) {
  require(!head.empty(), ErrorKind::contract, "predict_duals: dual head is untrained");
  require(embeddings.cols() == head.input_dim(), ErrorKind::shape,
          "predict_duals: embedding width " + std::to_string(embeddings.cols()) +
              " != dual head input " + std::to_string(head.input_dim()));
  const Matrix z = mlp_forward(head, embeddings);
  std::vector<double> out(z.rows());
  for (std::size_t i = 0; i < z.rows(); ++i) out[i] = softplus(z(i, 0));
  return out;
}

double dual_fit_loss(const Mlp& head, const Matrix& embeddings, std::span<const double> lambdas) {
  return dual_head_fit_loss(predict_duals(head, embeddings), lambdas).value;
}

Mlp dual_fit_gradient(const Mlp& head, const Matrix& embeddings, std::span<const double> lambdas,
                      double* loss) {
  require(!head.empty(), ErrorKind::contract, "dual_fit_gradient: dual head is untrained");
  MlpCache cache;
  const Matrix z = mlp_forward(head, embeddings, &cache);
  std::vector<double> pred(z.rows());
  for (std::size_t i = 0; i < z.rows(); ++i) pred[i] = softplus(z(i, 0));
  const auto fit = dual_head_fit_loss(pred, lambdas);
  if (loss) *loss = fit.value;
  Matrix grad(z.rows(), 1);
  for (std::size_t i = 0; i < z.rows(); ++i) grad(i, 0) = fit.grads[i] * sigmoid(z(i, 0));
  return mlp_backward(head, cache, grad);
}

Mlp train_dual_head(const Matrix& embeddings, std::span<const double> lambdas,
                    const DualHeadConfig& config, std::vector<double>* loss_trace) {
  config.validate();
  require(embeddings.rows() > 0, ErrorKind::input, "train_dual_head: no labeled embeddings");
  require(embeddings.rows() == lambdas.size(), ErrorKind::shape,
          "train_dual_head: embedding rows != dual count");
  for (double l : lambdas)
    require(l >= 0.0, ErrorKind::input, "train_dual_head: dual targets must be nonnegative");

  Rng rng(derive_seed(config.seed, 0xd0a1ULL));
  Mlp head = init_mlp(embeddings.cols(), config.hidden_dims, 1, Activation::relu, rng);
  OptimizerState opt = make_optimizer(OptimizerKind::adam, config.lr);
  if (loss_trace) loss_trace->clear();

  for (std::size_t epoch = 0; epoch <= config.epochs; ++epoch) {
    double value = 0.0;
    const Mlp g = dual_fit_gradient(head, embeddings, lambdas, &value);
    if (loss_trace) loss_trace->push_back(value);
    if (epoch == config.epochs) break;
    optimizer_step(opt, head, g);
  }
  return head;
}

}  // namespace ally
