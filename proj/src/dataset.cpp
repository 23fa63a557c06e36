#include "ally/dataset.hpp"

#include "ally/error.hpp"

namespace ally {

Targets Targets::classification(std::vector<int> labels) {
  Targets t;
  t.kind = LossKind::cross_entropy;
  t.classes = std::move(labels);
  return t;
}

Targets Targets::regression(Matrix values) {
  Targets t;
  t.kind = LossKind::mse;
  t.values = std::move(values);
  return t;
}

std::size_t Targets::size() const noexcept {
  return kind == LossKind::cross_entropy ? classes.size() : values.rows();
}

Targets Targets::select(std::span<const std::size_t> indices) const {
  Targets out;
  out.kind = kind;
  if (kind == LossKind::cross_entropy) {
    out.classes.reserve(indices.size());
    for (std::size_t i : indices) {
      require(i < classes.size(), ErrorKind::input, "target index out of range");
      out.classes.push_back(classes[i]);
    }
  } else {
    out.values = values.select_rows(indices);
  }
  return out;
}

Targets Targets::concat(const Targets& other) const {
  require(kind == other.kind, ErrorKind::input, "cannot concatenate targets of different kinds");
  Targets out = *this;
  if (kind == LossKind::cross_entropy)
    out.classes.insert(out.classes.end(), other.classes.begin(), other.classes.end());
  else
    out.values = vstack(values, other.values);
  return out;
}

PerSampleLoss evaluate_loss(const Matrix& outputs, const Targets& targets) {
  return targets.kind == LossKind::cross_entropy ? cross_entropy(outputs, targets.classes)
                                                 : mse(outputs, targets.values);
}

LabeledSet LabeledSet::select(std::span<const std::size_t> indices) const {
  return {features.select_rows(indices), targets.select(indices)};
}

}  // namespace ally
