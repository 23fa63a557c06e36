#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ally/matrix.hpp"

namespace ally {

enum class InstanceKind { constrained_scalar_ls, constrained_multi_ls };

/// Constrained least squares over theta in R^p:
///
///   minimize   (1/m) sum_j (a_j . theta - y_j)^2
///   subject to (c_i . theta - z_i)^2 <= eps_i   for every constraint i.
///
/// The objective rows must have full column rank, so the Lagrangian has a
/// unique minimizer for every nonnegative multiplier vector.
struct ConvexInstance {
  InstanceKind kind = InstanceKind::constrained_multi_ls;
  Matrix objective_rows;                   // m x p
  std::vector<double> objective_targets;   // m
  Matrix constraint_rows;                  // q x p
  std::vector<double> constraint_targets;  // q
  std::vector<double> epsilon;             // q

  std::size_t dim() const noexcept { return objective_rows.cols(); }
  std::size_t constraint_count() const noexcept { return constraint_rows.rows(); }

  double objective(std::span<const double> theta) const;
  double constraint_value(std::size_t i, std::span<const double> theta) const;
  void validate() const;

  /// Scalar instance: minimize (theta - target)^2 s.t. theta^2 <= eps.
  static ConvexInstance scalar(double target, double eps);
};

struct KktSolution {
  std::vector<double> primal_opt;
  std::vector<double> dual_opt;
  std::vector<double> slacks;  // g_i(theta*) - eps_i
  double p_star = 0.0;
  double d_star = 0.0;
  double stationarity_residual = 0.0;     // |grad_theta L(theta*, lambda*)|_inf
  double complementarity_residual = 0.0;  // max_i lambda_i * max(0, |s_i|)
};

/// Minimizer of the Lagrangian for fixed multipliers and its value, the dual
/// function d(lambda).
double dual_function(const ConvexInstance& inst, std::span<const double> lambda,
                     std::vector<double>* argmin = nullptr);

/// Exact solution: closed form for scalar instances, projected Newton ascent
/// on the dual otherwise. Infeasible instances raise an input error naming
/// the strict-feasibility assumption.
KktSolution solve_instance(const ConvexInstance& inst);

/// Always uses the iterative dual solver (independent of the closed form).
KktSolution solve_instance_iterative(const ConvexInstance& inst);

struct SensitivityResult {
  double numeric_derivative = 0.0;
  double lambda_star = 0.0;
  double abs_error = 0.0;  // |numeric_derivative + lambda_star|
};

/// Central difference of P* in eps_i compared with -lambda_i*. Raises an
/// input error when eps_i - h destroys feasibility or the active set changes
/// inside [eps_i - h, eps_i + h].
SensitivityResult sensitivity_check(const ConvexInstance& inst, std::size_t constraint_index,
                                    double h);

struct WeakDualityResult {
  double dual_value = 0.0;
  double p_star = 0.0;
};

/// Evaluates d(lambda_trial) and P*; raises a numeric error if
/// d(lambda_trial) > P* + 1e-10.
WeakDualityResult weak_duality_probe(const ConvexInstance& inst,
                                     std::span<const double> lambda_trial);

/// Random strictly feasible instance with strict complementarity (every
/// constraint either has lambda* > margin or slack < -margin) and at least
/// one active constraint.
ConvexInstance random_instance(std::uint64_t seed, std::size_t dim, std::size_t n_objective,
                               std::size_t n_constraints);

/// The constrained ERM problem of a linear model with bias under squared
/// loss, with one constraint per sample. Its multipliers relate to the
/// per-sample duals of the empirical Lagrangian by lambda_sample = n * lambda.
/// A single epsilon applies to every sample.
ConvexInstance linear_cerm_instance(const Matrix& x, std::span<const double> y,
                                    std::span<const double> epsilon);

struct InstanceReport {
  std::uint64_t seed = 0;
  std::size_t dim = 0;
  std::size_t constraints = 0;
  double p_star = 0.0;
  double d_star = 0.0;
  double duality_gap = 0.0;
  double complementarity_residual = 0.0;
  double weak_duality_max_excess = 0.0;  // max over trials of d(lambda) - P*
  std::vector<double> lambda_star;
  std::vector<double> numeric_derivative;
  std::vector<double> sensitivity_error;
  bool passed = false;
};

struct DualityReport {
  std::vector<InstanceReport> instances;
  double max_duality_gap = 0.0;
  double max_complementarity = 0.0;
  double max_active_sensitivity_error = 0.0;    // relative to max(1, lambda*)
  double max_inactive_sensitivity_error = 0.0;
  double max_weak_duality_excess = 0.0;
  double step = 1e-4;
  bool passed = false;
};

/// Runs sensitivity, strong and weak duality checks on `n_instances`
/// random instances with the thresholds used by the acceptance suite.
DualityReport verify_duality(std::size_t n_instances, std::uint64_t seed,
                             std::size_t weak_trials = 100, double h = 1e-4);

}  // namespace ally
