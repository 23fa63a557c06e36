#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ally/dataset.hpp"
#include "ally/error.hpp"
#include "ally/model.hpp"
#include "ally/optimizer.hpp"

namespace ally {

/// Per-sample dual variables and constraint bounds of the labeled set.
struct DualState {
  std::vector<double> lambdas;
  std::vector<double> epsilons;
  std::vector<double> slacks;

  static DualState zeros(std::size_t n, std::span<const double> epsilon);
  std::size_t size() const noexcept { return lambdas.size(); }
};

/// Expands a scalar bound (size 1) or checks a per-sample vector (size n).
std::vector<double> broadcast_epsilon(std::span<const double> epsilon, std::size_t n);

struct PdclConfig {
  double eta_p = 0.005;                // primal learning rate
  double eta_d = 0.05;                 // dual learning rate
  std::size_t max_iters = 100;         // T
  std::size_t primal_steps = 1;        // T_p: minibatch passes over the training split
  std::vector<double> epsilon{0.2};    // scalar (broadcast) or one bound per sample
  std::size_t patience = 6;            // early stopping on validation primary loss
  double validation_fraction = 0.1;    // 0 disables the split and early stopping
  std::size_t batch_size = 64;
  OptimizerKind primal_optimizer = OptimizerKind::adam;
  bool record_history = false;         // keep per-iteration lambdas and slacks

  void validate() const;
};

struct TrainReport {
  std::vector<double> objective_trace;   // mean primary loss on the training split
  std::vector<double> lagrangian_trace;  // empirical Lagrangian before each dual step
  std::vector<double> validation_trace;  // mean primary loss on the validation split
  std::vector<double> final_slacks;
  double violation_fraction = 0.0;
  std::size_t stopped_epoch = 0;         // number of completed iterations
  bool early_stopped = false;
  DualState final_dual;
  std::vector<std::size_t> train_indices;       // rows of the labeled set carrying duals
  std::vector<std::size_t> validation_indices;
  std::vector<std::vector<double>> lambda_history;
  std::vector<std::vector<double>> slack_history;
  bool dual_head_trained = false;
  std::string diagnostic;
};

struct PdclResult {
  ModelParams params;
  DualState dual;
  TrainReport report;
};

/// Raised when the Lagrangian turns non-finite; carries the report so far.
class TrainingAborted : public Error {
 public:
  TrainingAborted(const std::string& what, TrainReport report)
      : Error(ErrorKind::numeric, what), report_(std::move(report)) {}
  const TrainReport& report() const noexcept { return report_; }

 private:
  TrainReport report_;
};

/// (1/n) sum_i [ l_i + lambda_i (l'_i - eps_i) ] with l = l' the loss implied
/// by the targets. Terms with lambda_i == 0 contribute only l_i.
double empirical_lagrangian(const ModelParams& params, const LabeledSet& labeled,
                            const DualState& dual);

/// The same average from precomputed primary losses l_i and constraint
/// losses l'_i.
double lagrangian_value(std::span<const double> primary, std::span<const double> constraint,
                        const DualState& dual);

/// Gradient of the empirical Lagrangian of `batch` w.r.t. backbone and
/// prediction head: each row's loss gradient is weighted by (1 + lambda_i) / n.
ParamGrads lagrangian_gradient(const ModelParams& params, const LabeledSet& batch,
                               std::span<const double> lambdas);

/// s_i = l'(f(x_i), y_i) - eps_i.
std::vector<double> compute_slacks(const ModelParams& params, const LabeledSet& labeled,
                                   std::span<const double> epsilons);

/// lambda_i <- max(0, lambda_i + eta_d * s_i); records the slacks.
DualState dual_step(const DualState& dual, std::span<const double> slacks, double eta_d);

/// Visiting order of training rows for one minibatch pass.
std::vector<std::size_t> minibatch_order(std::uint64_t seed, std::size_t iteration,
                                         std::size_t pass, std::size_t n);

/// Deterministic validation split of n labeled rows.
void split_validation(std::size_t n, double fraction, std::uint64_t seed,
                      std::vector<std::size_t>& train, std::vector<std::size_t>& validation);

PdclResult pdcl_train(const LabeledSet& labeled, const MlpArchitecture& arch,
                      const PdclConfig& config, std::uint64_t seed);

/// Same loop starting from the supplied parameters instead of a fresh init.
PdclResult pdcl_train_from(const LabeledSet& labeled, ModelParams init,
                           const PdclConfig& config, std::uint64_t seed);

}  // namespace ally
