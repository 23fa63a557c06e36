#include "ally/losses.hpp"

#include <cmath>
#include <string>

#include "ally/error.hpp"

namespace ally {

PerSampleLoss cross_entropy(const Matrix& logits, std::span<const int> labels) {
  require(labels.size() == logits.rows(), ErrorKind::shape,
          "cross_entropy: " + std::to_string(labels.size()) + " labels for " +
              std::to_string(logits.rows()) + " rows");
  const std::size_t classes = logits.cols();
  PerSampleLoss out{std::vector<double>(logits.rows()), Matrix(logits.rows(), classes)};
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    const int y = labels[r];
    require(y >= 0 && static_cast<std::size_t>(y) < classes, ErrorKind::input,
            "cross_entropy: label " + std::to_string(y) + " outside [0, " +
                std::to_string(classes) + ")");
    auto z = logits.row(r);
    double zmax = z[0];
    for (double v : z) zmax = v > zmax ? v : zmax;
    require(std::isfinite(zmax), ErrorKind::numeric, "cross_entropy: non-finite logits");
    double sum = 0.0;
    for (double v : z) sum += std::exp(v - zmax);
    const double lse = zmax + std::log(sum);
    out.values[r] = lse - z[static_cast<std::size_t>(y)];
    auto g = out.grads.row(r);
    for (std::size_t c = 0; c < classes; ++c) g[c] = std::exp(z[c] - lse);
    g[static_cast<std::size_t>(y)] -= 1.0;
  }
  return out;
}

PerSampleLoss mse(const Matrix& preds, const Matrix& targets) {
  require(preds.rows() == targets.rows() && preds.cols() == targets.cols(), ErrorKind::shape,
          "mse: prediction and target shapes differ");
  const double dim = static_cast<double>(preds.cols());
  PerSampleLoss out{std::vector<double>(preds.rows()), Matrix(preds.rows(), preds.cols())};
  for (std::size_t r = 0; r < preds.rows(); ++r) {
    auto p = preds.row(r);
    auto t = targets.row(r);
    auto g = out.grads.row(r);
    double s = 0.0;
    for (std::size_t c = 0; c < p.size(); ++c) {
      const double d = p[c] - t[c];
      s += d * d;
      g[c] = 2.0 * d / dim;
    }
    out.values[r] = s / dim;
  }
  return out;
}

ScalarLoss dual_head_fit_loss(std::span<const double> predicted,
                              std::span<const double> lambda_targets) {
  require(predicted.size() == lambda_targets.size(), ErrorKind::shape,
          "dual_head_fit_loss: length mismatch");
  require(!predicted.empty(), ErrorKind::input, "dual_head_fit_loss: empty input");
  const double n = static_cast<double>(predicted.size());
  ScalarLoss out{0.0, std::vector<double>(predicted.size())};
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    require(lambda_targets[i] >= 0.0, ErrorKind::input,
            "dual_head_fit_loss: negative dual target at " + std::to_string(i));
    const double d = predicted[i] - lambda_targets[i];
    out.value += d * d;
    out.grads[i] = 2.0 * d / n;
  }
  out.value /= n;
  return out;
}

}  // namespace ally
