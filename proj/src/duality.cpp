#include "ally/duality.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "ally/error.hpp"
#include "ally/rng.hpp"

namespace ally {

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// In-place Cholesky of a symmetric matrix; false if not positive definite.
bool cholesky(Matrix& a) {
  const std::size_t n = a.rows();
  for (std::size_t j = 0; j < n; ++j) {
    double d = a(j, j);
    for (std::size_t k = 0; k < j; ++k) d -= a(j, k) * a(j, k);
    if (!(d > 0.0)) return false;
    a(j, j) = std::sqrt(d);
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = a(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= a(i, k) * a(j, k);
      a(i, j) = s / a(j, j);
    }
  }
  return true;
}

std::vector<double> cholesky_solve(const Matrix& l, std::vector<double> b) {
  const std::size_t n = l.rows();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < i; ++k) b[i] -= l(i, k) * b[k];
    b[i] /= l(i, i);
  }
  for (std::size_t i = n; i-- > 0;) {
    for (std::size_t k = i + 1; k < n; ++k) b[i] -= l(k, i) * b[k];
    b[i] /= l(i, i);
  }
  return b;
}

// Solves a PSD system, adding a growing ridge if it is numerically singular.
std::vector<double> psd_solve(Matrix a, const std::vector<double>& b) {
  double scale = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i) scale = std::max(scale, a(i, i));
  if (scale == 0.0) scale = 1.0;
  for (double ridge = 0.0; ridge < scale; ridge = ridge == 0.0 ? 1e-14 * scale : ridge * 100) {
    Matrix l = a;
    for (std::size_t i = 0; i < l.rows(); ++i) l(i, i) += ridge;
    if (cholesky(l)) return cholesky_solve(l, b);
  }
  fail(ErrorKind::numeric, "duality: singular Newton system");
}

struct LagrangianSystem {
  Matrix hessian;  // (1/m) A^T A + sum lambda_i c_i c_i^T
  std::vector<double> rhs;
};

LagrangianSystem build_system(const ConvexInstance& inst, std::span<const double> lambda) {
  const std::size_t p = inst.dim(), m = inst.objective_rows.rows();
  LagrangianSystem s{Matrix(p, p), std::vector<double>(p, 0.0)};
  const double inv_m = 1.0 / static_cast<double>(m);
  for (std::size_t j = 0; j < m; ++j) {
    auto a = inst.objective_rows.row(j);
    for (std::size_t r = 0; r < p; ++r) {
      s.rhs[r] += inv_m * inst.objective_targets[j] * a[r];
      for (std::size_t c = 0; c < p; ++c) s.hessian(r, c) += inv_m * a[r] * a[c];
    }
  }
  for (std::size_t i = 0; i < inst.constraint_count(); ++i) {
    if (lambda[i] == 0.0) continue;
    auto c_row = inst.constraint_rows.row(i);
    for (std::size_t r = 0; r < p; ++r) {
      s.rhs[r] += lambda[i] * inst.constraint_targets[i] * c_row[r];
      for (std::size_t c = 0; c < p; ++c) s.hessian(r, c) += lambda[i] * c_row[r] * c_row[c];
    }
  }
  return s;
}

KktSolution finish(const ConvexInstance& inst, std::vector<double> theta,
                   std::vector<double> lambda) {
  KktSolution s;
  const std::size_t q = inst.constraint_count(), p = inst.dim(), m = inst.objective_rows.rows();
  s.p_star = inst.objective(theta);
  s.d_star = dual_function(inst, lambda);
  s.slacks.resize(q);
  std::vector<double> grad(p, 0.0);
  for (std::size_t j = 0; j < m; ++j) {
    const double r = dot(inst.objective_rows.row(j), theta) - inst.objective_targets[j];
    for (std::size_t k = 0; k < p; ++k)
      grad[k] += 2.0 * r * inst.objective_rows(j, k) / static_cast<double>(m);
  }
  for (std::size_t i = 0; i < q; ++i) {
    s.slacks[i] = inst.constraint_value(i, theta) - inst.epsilon[i];
    const double r = dot(inst.constraint_rows.row(i), theta) - inst.constraint_targets[i];
    for (std::size_t k = 0; k < p; ++k) grad[k] += 2.0 * lambda[i] * r * inst.constraint_rows(i, k);
    s.complementarity_residual =
        std::max(s.complementarity_residual, lambda[i] * std::abs(s.slacks[i]));
  }
  for (double g : grad) s.stationarity_residual = std::max(s.stationarity_residual, std::abs(g));
  s.primal_opt = std::move(theta);
  s.dual_opt = std::move(lambda);
  return s;
}

[[noreturn]] void infeasible(const std::string& detail) {
  fail(ErrorKind::input,
       "instance violates strict feasibility (no point satisfies every constraint strictly): " +
           detail);
}

KktSolution solve_scalar(const ConvexInstance& inst) {
  const std::size_t m = inst.objective_rows.rows(), q = inst.constraint_count();
  double saa = 0.0, say = 0.0;
  for (std::size_t j = 0; j < m; ++j) {
    saa += inst.objective_rows(j, 0) * inst.objective_rows(j, 0);
    say += inst.objective_rows(j, 0) * inst.objective_targets[j];
  }
  const double unconstrained = say / saa;
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
  std::size_t lo_idx = q, hi_idx = q;
  for (std::size_t i = 0; i < q; ++i) {
    const double c = inst.constraint_rows(i, 0), z = inst.constraint_targets[i];
    const double w = std::sqrt(inst.epsilon[i]);
    if (c == 0.0) {
      if (!(z * z < inst.epsilon[i])) infeasible("constraint " + std::to_string(i));
      continue;
    }
    const double a = (z - w) / c, b = (z + w) / c;
    const double l = std::min(a, b), h = std::max(a, b);
    if (l > lo) {
      lo = l;
      lo_idx = i;
    }
    if (h < hi) {
      hi = h;
      hi_idx = i;
    }
  }
  if (!(lo < hi)) infeasible("constraint intervals do not overlap");
  const double theta = std::clamp(unconstrained, lo, hi);
  std::vector<double> lambda(q, 0.0);
  std::size_t binding = q;
  if (theta == lo && unconstrained < lo) binding = lo_idx;
  if (theta == hi && unconstrained > hi) binding = hi_idx;
  if (binding < q) {
    const double fprime = 2.0 * (saa * theta - say) / static_cast<double>(m);
    const double c = inst.constraint_rows(binding, 0);
    const double gprime = 2.0 * c * (c * theta - inst.constraint_targets[binding]);
    lambda[binding] = -fprime / gprime;
  }
  return finish(inst, {theta}, std::move(lambda));
}

}  // namespace

double ConvexInstance::objective(std::span<const double> theta) const {
  double s = 0.0;
  for (std::size_t j = 0; j < objective_rows.rows(); ++j) {
    const double r = dot(objective_rows.row(j), theta) - objective_targets[j];
    s += r * r;
  }
  return s / static_cast<double>(objective_rows.rows());
}

double ConvexInstance::constraint_value(std::size_t i, std::span<const double> theta) const {
  const double r = dot(constraint_rows.row(i), theta) - constraint_targets[i];
  return r * r;
}

void ConvexInstance::validate() const {
  require(objective_rows.rows() >= 1 && objective_rows.cols() >= 1, ErrorKind::input,
          "instance: empty objective");
  require(objective_targets.size() == objective_rows.rows(), ErrorKind::shape,
          "instance: objective target count mismatch");
  require(constraint_rows.rows() == 0 || constraint_rows.cols() == dim(), ErrorKind::shape,
          "instance: constraint width mismatch");
  require(constraint_targets.size() == constraint_count() && epsilon.size() == constraint_count(),
          ErrorKind::shape, "instance: constraint target/epsilon count mismatch");
  require(kind != InstanceKind::constrained_scalar_ls || dim() == 1, ErrorKind::input,
          "instance: scalar kind requires dimension 1");
  for (double e : epsilon)
    if (!(e > 0.0)) infeasible("epsilon must be > 0 since squared losses are nonnegative");
  Matrix h = build_system(*this, std::vector<double>(constraint_count(), 0.0)).hessian;
  require(cholesky(h), ErrorKind::input,
          "instance: objective rows must have full column rank (objective not strictly convex)");
}

ConvexInstance ConvexInstance::scalar(double target, double eps) {
  ConvexInstance inst;
  inst.kind = InstanceKind::constrained_scalar_ls;
  inst.objective_rows = Matrix{{1.0}};
  inst.objective_targets = {target};
  inst.constraint_rows = Matrix{{1.0}};
  inst.constraint_targets = {0.0};
  inst.epsilon = {eps};
  return inst;
}

double dual_function(const ConvexInstance& inst, std::span<const double> lambda,
                     std::vector<double>* argmin) {
  require(lambda.size() == inst.constraint_count(), ErrorKind::shape,
          "dual_function: multiplier count mismatch");
  for (double l : lambda)
    require(l >= 0.0, ErrorKind::input, "dual_function: multipliers must be nonnegative");
  auto sys = build_system(inst, lambda);
  Matrix l = sys.hessian;
  require(cholesky(l), ErrorKind::numeric, "dual_function: Lagrangian Hessian not definite");
  auto theta = cholesky_solve(l, sys.rhs);
  double value = inst.objective(theta);
  for (std::size_t i = 0; i < lambda.size(); ++i)
    if (lambda[i] != 0.0) value += lambda[i] * (inst.constraint_value(i, theta) - inst.epsilon[i]);
  if (argmin) *argmin = std::move(theta);
  return value;
}

KktSolution solve_instance_iterative(const ConvexInstance& inst) {
  inst.validate();
  const std::size_t q = inst.constraint_count(), p = inst.dim();
  std::vector<double> lambda(q, 0.0), theta;
  double eps_scale = 1.0;
  for (double e : inst.epsilon) eps_scale = std::max(eps_scale, e);
  const double tol = 1e-14 * eps_scale;

  double value = dual_function(inst, lambda, &theta);
  for (int iter = 0; iter < 500; ++iter) {
    std::vector<double> r(q), g(q);
    for (std::size_t i = 0; i < q; ++i) {
      r[i] = dot(inst.constraint_rows.row(i), theta) - inst.constraint_targets[i];
      g[i] = r[i] * r[i] - inst.epsilon[i];
    }
    double pg = 0.0;
    std::vector<std::size_t> free;
    for (std::size_t i = 0; i < q; ++i) {
      const double gi = lambda[i] > 0.0 ? g[i] : std::max(g[i], 0.0);
      pg = std::max(pg, std::abs(gi));
      if (lambda[i] > 0.0 || g[i] > 0.0) free.push_back(i);
    }
    if (pg <= tol) break;
    for (double l : lambda)
      if (l > 1e10) infeasible("dual variables diverge");

    // Newton system on the free multipliers: -Hess_d = 2 diag(r) C H^-1 C^T diag(r).
    Matrix hl = build_system(inst, lambda).hessian;
    require(cholesky(hl), ErrorKind::numeric, "solver: Lagrangian Hessian not definite");
    const std::size_t nf = free.size();
    std::vector<std::vector<double>> hinv_c(nf);
    for (std::size_t a = 0; a < nf; ++a) {
      auto row = inst.constraint_rows.row(free[a]);
      hinv_c[a] = cholesky_solve(hl, std::vector<double>(row.begin(), row.end()));
    }
    Matrix newton(nf, nf);
    std::vector<double> rhs(nf);
    for (std::size_t a = 0; a < nf; ++a) {
      rhs[a] = g[free[a]];
      for (std::size_t b = 0; b < nf; ++b)
        newton(a, b) = 2.0 * r[free[a]] * r[free[b]] *
                       dot(inst.constraint_rows.row(free[a]), hinv_c[b]);
    }
    std::vector<double> step = psd_solve(newton, rhs);
    // More free multipliers than dimensions leaves the Newton system singular
    // and the ridge then yields huge steps; keep them inside a trust region.
    double lam_max = 0.0, step_max = 0.0;
    for (double l : lambda) lam_max = std::max(lam_max, l);
    for (double v : step) step_max = std::max(step_max, std::abs(v));
    const double cap = 10.0 * (1.0 + lam_max);
    if (!std::isfinite(step_max)) step.assign(nf, 0.0);
    else if (step_max > cap)
      for (double& v : step) v *= cap / step_max;

    bool moved = false;
    for (double alpha = 1.0; alpha > 1e-12; alpha *= 0.5) {
      std::vector<double> trial = lambda;
      for (std::size_t a = 0; a < nf; ++a)
        trial[free[a]] = std::max(0.0, lambda[free[a]] + alpha * step[a]);
      std::vector<double> trial_theta;
      double trial_value;
      try {
        trial_value = dual_function(inst, trial, &trial_theta);
      } catch (const Error&) {
        continue;
      }
      double ascent = 0.0;
      for (std::size_t i = 0; i < q; ++i) ascent += g[i] * (trial[i] - lambda[i]);
      if (trial_value >= value + 1e-4 * ascent ||
          (trial_value >= value - 1e-15 * std::abs(value) && ascent < 1e-13)) {
        lambda = std::move(trial);
        theta = std::move(trial_theta);
        value = trial_value;
        moved = true;
        break;
      }
    }
    if (!moved) {
      // Newton failed to ascend; take a projected gradient step instead.
      double alpha = 1.0;
      for (; alpha > 1e-20; alpha *= 0.5) {
        std::vector<double> trial = lambda;
        for (std::size_t i = 0; i < q; ++i) trial[i] = std::max(0.0, lambda[i] + alpha * g[i]);
        std::vector<double> trial_theta;
        const double trial_value = dual_function(inst, trial, &trial_theta);
        if (trial_value > value) {
          lambda = std::move(trial);
          theta = std::move(trial_theta);
          value = trial_value;
          moved = true;
          break;
        }
      }
      if (!moved) break;  // at roundoff level
    }
  }
  (void)p;
  return finish(inst, std::move(theta), std::move(lambda));
}

KktSolution solve_instance(const ConvexInstance& inst) {
  inst.validate();
  if (inst.kind == InstanceKind::constrained_scalar_ls) return solve_scalar(inst);
  return solve_instance_iterative(inst);
}

SensitivityResult sensitivity_check(const ConvexInstance& inst, std::size_t constraint_index,
                                    double h) {
  require(constraint_index < inst.constraint_count(), ErrorKind::input,
          "sensitivity_check: constraint index out of range");
  require(h > 0.0, ErrorKind::input, "sensitivity_check: step must be positive");
  require(h < inst.epsilon[constraint_index], ErrorKind::input,
          "sensitivity_check: step exceeds the feasibility margin of the constraint");
  const KktSolution base = solve_instance(inst);
  ConvexInstance plus = inst, minus = inst;
  plus.epsilon[constraint_index] += h;
  minus.epsilon[constraint_index] -= h;
  KktSolution sp, sm;
  try {
    sm = solve_instance(minus);
  } catch (const Error& e) {
    fail(ErrorKind::input, std::string("sensitivity_check: perturbation destroys feasibility: ") +
                               e.what());
  }
  sp = solve_instance(plus);
  auto active = [](const KktSolution& s) {
    std::vector<bool> a;
    for (double l : s.dual_opt) a.push_back(l > 1e-9);
    return a;
  };
  require(active(base) == active(sp) && active(base) == active(sm), ErrorKind::input,
          "sensitivity_check: active set changes within the perturbation; P* is not "
          "differentiable there");
  SensitivityResult r;
  r.numeric_derivative = (sp.p_star - sm.p_star) / (2.0 * h);
  r.lambda_star = base.dual_opt[constraint_index];
  r.abs_error = std::abs(r.numeric_derivative + r.lambda_star);
  return r;
}

WeakDualityResult weak_duality_probe(const ConvexInstance& inst,
                                     std::span<const double> lambda_trial) {
  WeakDualityResult r;
  r.p_star = solve_instance(inst).p_star;
  r.dual_value = dual_function(inst, lambda_trial);
  require(r.dual_value <= r.p_star + 1e-10, ErrorKind::numeric,
          "weak duality violated: d(lambda) exceeds P*");
  return r;
}

ConvexInstance random_instance(std::uint64_t seed, std::size_t dim, std::size_t n_objective,
                               std::size_t n_constraints) {
  require(dim >= 1 && n_objective >= dim && n_constraints >= 1, ErrorKind::input,
          "random_instance: need n_objective >= dim >= 1 and at least one constraint");
  for (std::uint64_t attempt = 0; attempt < 1000; ++attempt) {
    Rng rng(derive_seed(seed, attempt));
    ConvexInstance inst;
    inst.kind = dim == 1 ? InstanceKind::constrained_scalar_ls : InstanceKind::constrained_multi_ls;
    std::vector<double> anchor(dim), target(dim);
    for (std::size_t k = 0; k < dim; ++k) {
      anchor[k] = standard_normal(rng);
      target[k] = anchor[k] + 1.5 * standard_normal(rng);
    }
    inst.objective_rows = Matrix(n_objective, dim);
    inst.objective_targets.resize(n_objective);
    for (std::size_t j = 0; j < n_objective; ++j) {
      for (std::size_t k = 0; k < dim; ++k) inst.objective_rows(j, k) = standard_normal(rng);
      inst.objective_targets[j] =
          dot(inst.objective_rows.row(j), target) + 0.1 * standard_normal(rng);
    }
    inst.constraint_rows = Matrix(n_constraints, dim);
    inst.constraint_targets.resize(n_constraints);
    inst.epsilon.resize(n_constraints);
    for (std::size_t i = 0; i < n_constraints; ++i) {
      for (std::size_t k = 0; k < dim; ++k) inst.constraint_rows(i, k) = standard_normal(rng);
      const double offset = 0.3 * standard_normal(rng);
      inst.constraint_targets[i] = dot(inst.constraint_rows.row(i), anchor) + offset;
      // anchor satisfies every constraint with margin >= 0.05
      inst.epsilon[i] = offset * offset + 0.05 + 0.5 * uniform01(rng);
    }
    KktSolution s;
    try {
      s = solve_instance(inst);
    } catch (const Error&) {
      continue;
    }
    bool ok = false, nondegenerate = true;
    for (std::size_t i = 0; i < n_constraints; ++i) {
      if (s.dual_opt[i] > 1e-2) ok = true;
      else if (!(s.dual_opt[i] == 0.0 && s.slacks[i] < -1e-2)) nondegenerate = false;
    }
    if (ok && nondegenerate) return inst;
  }
  fail(ErrorKind::numeric, "random_instance: no nondegenerate instance found");
}

ConvexInstance linear_cerm_instance(const Matrix& x, std::span<const double> y,
                                    std::span<const double> epsilon) {
  require(x.rows() == y.size() && (epsilon.size() == 1 || epsilon.size() == y.size()),
          ErrorKind::shape, "linear_cerm_instance: sample counts differ");
  ConvexInstance inst;
  inst.kind = InstanceKind::constrained_multi_ls;
  Matrix rows(x.rows(), x.cols() + 1);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (std::size_t k = 0; k < x.cols(); ++k) rows(i, k) = x(i, k);
    rows(i, x.cols()) = 1.0;
  }
  inst.objective_rows = rows;
  inst.objective_targets.assign(y.begin(), y.end());
  inst.constraint_rows = rows;
  inst.constraint_targets.assign(y.begin(), y.end());
  if (epsilon.size() == 1)
    inst.epsilon.assign(y.size(), epsilon[0]);
  else
    inst.epsilon.assign(epsilon.begin(), epsilon.end());
  return inst;
}

DualityReport verify_duality(std::size_t n_instances, std::uint64_t seed,
                             std::size_t weak_trials, double h) {
  DualityReport report;
  report.step = h;
  report.passed = true;
  for (std::size_t k = 0; k < n_instances; ++k) {
    InstanceReport ir;
    ir.seed = derive_seed(seed, k);
    ir.dim = 2 + k % 3;
    const std::size_t q = 3 + k % 4;
    const auto inst = random_instance(ir.seed, ir.dim, ir.dim + 3, q);
    ir.constraints = q;
    const auto sol = solve_instance(inst);
    ir.p_star = sol.p_star;
    ir.d_star = sol.d_star;
    ir.duality_gap = std::abs(sol.p_star - sol.d_star);
    ir.complementarity_residual = sol.complementarity_residual;
    ir.lambda_star = sol.dual_opt;
    ir.passed = ir.duality_gap <= 1e-8 && ir.complementarity_residual <= 1e-8;

    double lam_scale = 1.0;
    for (double l : sol.dual_opt) lam_scale = std::max(lam_scale, l);
    Rng rng(derive_seed(ir.seed, 0x3eafULL));
    ir.weak_duality_max_excess = -std::numeric_limits<double>::infinity();
    std::vector<double> trial(q);
    for (std::size_t t = 0; t < weak_trials; ++t) {
      for (double& l : trial) l = 2.0 * lam_scale * uniform01(rng);
      ir.weak_duality_max_excess =
          std::max(ir.weak_duality_max_excess, dual_function(inst, trial) - sol.p_star);
    }
    if (ir.weak_duality_max_excess > 1e-10) ir.passed = false;

    for (std::size_t i = 0; i < q; ++i) {
      const auto s = sensitivity_check(inst, i, h);
      ir.numeric_derivative.push_back(s.numeric_derivative);
      ir.sensitivity_error.push_back(s.abs_error);
      if (s.lambda_star > 0.0) {
        const double rel = s.abs_error / std::max(1.0, s.lambda_star);
        report.max_active_sensitivity_error = std::max(report.max_active_sensitivity_error, rel);
        if (rel > 1e-3) ir.passed = false;
      } else {
        report.max_inactive_sensitivity_error =
            std::max(report.max_inactive_sensitivity_error, std::abs(s.numeric_derivative));
        if (std::abs(s.numeric_derivative) > 1e-6) ir.passed = false;
      }
    }
    report.max_duality_gap = std::max(report.max_duality_gap, ir.duality_gap);
    report.max_complementarity = std::max(report.max_complementarity, ir.complementarity_residual);
    report.max_weak_duality_excess =
        k == 0 ? ir.weak_duality_max_excess
               : std::max(report.max_weak_duality_excess, ir.weak_duality_max_excess);
    report.passed = report.passed && ir.passed;
    report.instances.push_back(std::move(ir));
  }
  return report;
}

}  // namespace ally
