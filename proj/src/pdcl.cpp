#include "ally/pdcl.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace ally {

DualState DualState::zeros(std::size_t n, std::span<const double> epsilon) {
  DualState d;
  d.lambdas.assign(n, 0.0);
  d.epsilons = broadcast_epsilon(epsilon, n);
  d.slacks.assign(n, 0.0);
  return d;
}

std::vector<double> broadcast_epsilon(std::span<const double> epsilon, std::size_t n) {
  require(epsilon.size() == 1 || epsilon.size() == n, ErrorKind::input,
          "epsilon must be a scalar or have one entry per labeled sample");
  for (double e : epsilon)
    require(!std::isnan(e), ErrorKind::input, "epsilon must not be NaN");
  if (epsilon.size() == 1) return std::vector<double>(n, epsilon[0]);
  return {epsilon.begin(), epsilon.end()};
}

void PdclConfig::validate() const {
  require(eta_p > 0.0 && std::isfinite(eta_p), ErrorKind::config, "pdcl: eta_p must be > 0");
  require(eta_d > 0.0 && std::isfinite(eta_d), ErrorKind::config, "pdcl: eta_d must be > 0");
  require(max_iters >= 1, ErrorKind::config, "pdcl: max_iters must be >= 1");
  require(primal_steps >= 1, ErrorKind::config, "pdcl: primal_steps must be >= 1");
  require(!epsilon.empty(), ErrorKind::config, "pdcl: epsilon is empty");
  require(batch_size >= 1, ErrorKind::config, "pdcl: batch_size must be >= 1");
  require(validation_fraction >= 0.0 && validation_fraction < 1.0, ErrorKind::config,
          "pdcl: validation_fraction must lie in [0, 1)");
}

namespace {

double mean(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

double lagrangian_value(std::span<const double> primary, std::span<const double> constraint,
                        const DualState& dual) {
  require(primary.size() == constraint.size() && primary.size() == dual.size() &&
              dual.epsilons.size() == dual.size(),
          ErrorKind::shape, "lagrangian: loss and dual lengths differ");
  require(!primary.empty(), ErrorKind::input, "lagrangian: no samples");
  double sum = 0.0;
  for (std::size_t i = 0; i < primary.size(); ++i) {
    sum += primary[i];
    if (dual.lambdas[i] != 0.0) sum += dual.lambdas[i] * (constraint[i] - dual.epsilons[i]);
  }
  return sum / static_cast<double>(primary.size());
}

double empirical_lagrangian(const ModelParams& params, const LabeledSet& labeled,
                            const DualState& dual) {
  require(dual.size() == labeled.size() && dual.epsilons.size() == labeled.size(),
          ErrorKind::shape, "empirical_lagrangian: dual length != labeled count");
  require(labeled.size() > 0, ErrorKind::input, "empirical_lagrangian: empty labeled set");
  const auto outputs = forward(params, labeled.features).outputs;
  const auto loss = evaluate_loss(outputs, labeled.targets);
  return lagrangian_value(loss.values, loss.values, dual);
}

ParamGrads lagrangian_gradient(const ModelParams& params, const LabeledSet& batch,
                               std::span<const double> lambdas) {
  require(lambdas.size() == batch.size(), ErrorKind::shape,
          "lagrangian_gradient: dual length != batch size");
  require(batch.size() > 0, ErrorKind::input, "lagrangian_gradient: empty batch");
  const auto fr = forward(params, batch.features);
  auto loss = evaluate_loss(fr.outputs, batch.targets);
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  for (std::size_t r = 0; r < batch.size(); ++r) {
    const double w = (1.0 + lambdas[r]) * inv_b;
    for (double& g : loss.grads.row(r)) g *= w;
  }
  return backward_lagrangian(params, fr.cache, loss.grads);
}

std::vector<double> compute_slacks(const ModelParams& params, const LabeledSet& labeled,
                                   std::span<const double> epsilons) {
  require(epsilons.size() == labeled.size(), ErrorKind::shape,
          "compute_slacks: epsilon length != labeled count");
  const auto outputs = forward(params, labeled.features).outputs;
  auto loss = evaluate_loss(outputs, labeled.targets);
  for (std::size_t i = 0; i < loss.values.size(); ++i) loss.values[i] -= epsilons[i];
  return std::move(loss.values);
}

DualState dual_step(const DualState& dual, std::span<const double> slacks, double eta_d) {
  require(slacks.size() == dual.size(), ErrorKind::shape, "dual_step: slack length mismatch");
  DualState next = dual;
  next.slacks.assign(slacks.begin(), slacks.end());
  for (std::size_t i = 0; i < slacks.size(); ++i)
    next.lambdas[i] = std::max(0.0, dual.lambdas[i] + eta_d * slacks[i]);
  return next;
}

std::vector<std::size_t> minibatch_order(std::uint64_t seed, std::size_t iteration,
                                         std::size_t pass, std::size_t n) {
  Rng rng(derive_seed(derive_seed(seed, 0x5eed0001ULL + iteration), pass));
  return permutation(n, rng);
}

void split_validation(std::size_t n, double fraction, std::uint64_t seed,
                      std::vector<std::size_t>& train, std::vector<std::size_t>& validation) {
  train.clear();
  validation.clear();
  auto n_val = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n)));
  if (n_val >= n) n_val = n - 1;
  Rng rng(derive_seed(seed, 0x7a11da7eULL));
  auto perm = permutation(n, rng);
  validation.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_val));
  train.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_val), perm.end());
  std::sort(train.begin(), train.end());
  std::sort(validation.begin(), validation.end());
}

PdclResult pdcl_train(const LabeledSet& labeled, const MlpArchitecture& arch,
                      const PdclConfig& config, std::uint64_t seed) {
  return pdcl_train_from(labeled, init_params(arch, derive_seed(seed, 0x1a17ULL)), config, seed);
}

PdclResult pdcl_train_from(const LabeledSet& labeled, ModelParams params,
                           const PdclConfig& config, std::uint64_t seed) {
  config.validate();
  require(labeled.size() > 0, ErrorKind::input, "pdcl_train: labeled set is empty");
  require(labeled.targets.size() == labeled.size(), ErrorKind::shape,
          "pdcl_train: feature and target counts differ");
  const auto eps_all = broadcast_epsilon(config.epsilon, labeled.size());

  TrainReport report;
  split_validation(labeled.size(), config.validation_fraction, seed, report.train_indices,
                   report.validation_indices);
  const LabeledSet train = labeled.select(report.train_indices);
  const LabeledSet val = labeled.select(report.validation_indices);
  const std::size_t n = train.size();

  std::vector<double> eps(n);
  for (std::size_t i = 0; i < n; ++i) eps[i] = eps_all[report.train_indices[i]];
  DualState dual = DualState::zeros(n, eps);

  OptimizerState opt = make_optimizer(config.primal_optimizer, config.eta_p);
  double best_val = std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;

  auto primal_passes = [&](std::size_t t) {
    for (std::size_t pass = 0; pass < config.primal_steps; ++pass) {
      const auto order = minibatch_order(seed, t, pass, n);
      for (std::size_t start = 0; start < n; start += config.batch_size) {
        const std::size_t end = std::min(n, start + config.batch_size);
        const std::span<const std::size_t> idx(order.data() + start, end - start);
        std::vector<double> lam(idx.size());
        for (std::size_t r = 0; r < idx.size(); ++r) lam[r] = dual.lambdas[idx[r]];
        const auto grads = lagrangian_gradient(params, train.select(idx), lam);
        auto pv = params.backbone.parameter_views();
        auto hv = params.pred_head.parameter_views();
        pv.insert(pv.end(), hv.begin(), hv.end());
        auto gv = grads.backbone.parameter_views();
        auto ghv = grads.pred_head.parameter_views();
        gv.insert(gv.end(), ghv.begin(), ghv.end());
        optimizer_step(opt, pv, gv);
      }
    }
  };

  for (std::size_t t = 0; t < config.max_iters; ++t) {
    try {
      primal_passes(t);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::numeric) throw;
      report.diagnostic = "iteration " + std::to_string(t) + ": " + e.what();
      throw TrainingAborted(report.diagnostic, std::move(report));
    }

    const auto outputs = forward(params, train.features).outputs;
    const bool finite = std::all_of(outputs.data().begin(), outputs.data().end(),
                                    [](double v) { return std::isfinite(v); });
    const auto loss = finite ? evaluate_loss(outputs, train.targets) : PerSampleLoss{};
    const double lag = finite ? lagrangian_value(loss.values, loss.values, dual)
                              : std::numeric_limits<double>::quiet_NaN();
    if (!std::isfinite(lag)) {
      report.diagnostic = "non-finite Lagrangian at iteration " + std::to_string(t);
      throw TrainingAborted(report.diagnostic, std::move(report));
    }
    std::vector<double> slacks(n);
    for (std::size_t i = 0; i < n; ++i) slacks[i] = loss.values[i] - eps[i];
    report.lagrangian_trace.push_back(lag);
    report.objective_trace.push_back(mean(loss.values));
    dual = dual_step(dual, slacks, config.eta_d);
    if (config.record_history) {
      report.lambda_history.push_back(dual.lambdas);
      report.slack_history.push_back(slacks);
    }
    report.stopped_epoch = t + 1;

    if (val.size() > 0) {
      const auto vloss = evaluate_loss(forward(params, val.features).outputs, val.targets);
      const double v = mean(vloss.values);
      report.validation_trace.push_back(v);
      if (v < best_val) {
        best_val = v;
        since_best = 0;
      } else if (++since_best >= config.patience) {
        report.early_stopped = true;
        break;
      }
    }
  }

  report.final_slacks = dual.slacks;
  report.violation_fraction =
      static_cast<double>(std::count_if(dual.slacks.begin(), dual.slacks.end(),
                                        [](double s) { return s > 0.0; })) /
      static_cast<double>(n);
  report.final_dual = dual;
  return {std::move(params), std::move(dual), std::move(report)};
}

}  // namespace ally
