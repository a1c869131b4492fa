#include "rnls/regemm.h"

#include <algorithm>
#include <cmath>

#include "rnls/ba.h"

namespace rnls {

namespace {

Eigen::VectorXd weights_at_sigma(const RobustKernel& k, const Eigen::VectorXd& norms,
                                 double sigma, bool kernel_value_weights) {
  Eigen::VectorXd u(norms.size());
  for (Eigen::Index i = 0; i < norms.size(); ++i)
    u[i] = kernel_value_weights
               ? std::clamp(psi(k, norms[i] / sigma), 0.0, 1.0)
               : omega(k, norms[i] / sigma);
  return u;
}

double lifted_cost(const RobustKernel& k, const Eigen::VectorXd& norms,
                   const Eigen::VectorXd& u) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < norms.size(); ++i)
    total += lifted_value(k, u[i], norms[i]);
  return total;
}

LoopControls make_controls(const SolveOptions& o) {
  LoopControls c;
  c.max_iter = o.max_iter;
  c.stall_limit = o.stall_limit;
  c.rel_decrease_stop = false;  // gap-based convergence governs instead
  c.rel_decrease_tol = o.rel_decrease_tol;
  c.rel_window = o.rel_window;
  return c;
}

}  // namespace

WeightUpdateResult regemm_weight_update(const RobustKernel& kernel,
                                        const Eigen::VectorXd& norms,
                                        double current_j, double bound_prev,
                                        const RegemmOptions& options) {
  if (!kernel.liftable())
    throw NotLiftableError("regemm: kernel kind has no lifted form");
  if (!(options.eta > 0.0) || !(options.eta < 1.0))
    throw std::invalid_argument("regemm: eta must be in (0, 1)");

  WeightUpdateResult out;
  out.bound = options.eta * current_j + (1.0 - options.eta) * bound_prev;
  auto cost_at = [&](double sigma) {
    return lifted_cost(kernel, norms,
                       weights_at_sigma(kernel, norms, sigma,
                                        options.kernel_value_weights));
  };

  double lo = 1.0;
  // Touching weights satisfy the bound whenever bound_prev >= current_j; a
  // violated bound (broken invariant upstream) degrades to the full update.
  if (cost_at(lo) > out.bound) {
    out.sigma = 1.0;
    out.weights = weights_at_sigma(kernel, norms, 1.0, options.kernel_value_weights);
    out.lifted_at_theta = cost_at(1.0);
    return out;
  }

  double hi = std::max(options.sigma_bracket, 1.0 + 1e-12);
  while (cost_at(hi) <= out.bound && hi < options.sigma_cap) {
    lo = hi;
    hi = std::min(2.0 * hi, options.sigma_cap);
  }
  if (cost_at(hi) <= out.bound) {
    out.sigma = hi;  // satisfied all the way to the cap
    out.capped = true;
  } else {
    while (hi - lo > options.bisect_rel_tol * lo) {
      const double mid = 0.5 * (lo + hi);
      if (cost_at(mid) <= out.bound)
        lo = mid;
      else
        hi = mid;
    }
    out.sigma = lo;
    // The lifted cost is treated as non-decreasing in sigma; make sure the
    // returned sigma actually brackets the boundary.
    if (cost_at(lo) > out.bound + 1e-9 * std::max(1.0, std::abs(out.bound)))
      throw std::logic_error("regemm_weight_update: bisection lost the bracket");
  }
  out.weights =
      weights_at_sigma(kernel, norms, out.sigma, options.kernel_value_weights);
  out.lifted_at_theta = lifted_cost(kernel, norms, out.weights);
  return out;
}

SolverTrace regemm_solve(const Problem& problem, const Eigen::VectorXd& theta0,
                         const RegemmOptions& options) {
  problem.validate();
  if (!problem.kernel().liftable())
    throw NotLiftableError("regemm: kernel kind has no lifted form");
  const SolveOptions& o = options.base;
  const RobustKernel& kernel = problem.kernel();

  Eigen::VectorXd theta = theta0;
  Eigen::VectorXd u = Eigen::VectorXd::Ones(problem.num_residuals());
  double lambda = o.lm.initial_lambda;
  // Relaxed bound carried across iterations; initialized at the all-ones
  // weights so the first update is maximally exploratory.
  double bound_prev = problem.evaluate_weighted_sq(theta, u);

  auto initial = [&]() {
    IterationRecord r;
    const Objective obj = problem.evaluate_objective(theta);
    r.psi = obj.value;
    r.aux = bound_prev;
    r.gap = bound_prev - obj.value;
    r.inlier_rate = inlier_rate(obj.norms, o.inlier_threshold);
    r.grad_inf = problem.robust_gradient(theta).lpNorm<Eigen::Infinity>();
    r.lambda = lambda;
    return r;
  };

  auto body = [&](int) {
    StepOutcome out;
    const Objective obj = problem.evaluate_objective(theta);
    const double grad =
        problem.robust_gradient(theta).lpNorm<Eigen::Infinity>();
    const double gap_now = problem.evaluate_weighted_sq(theta, u) - obj.value;
    if (grad < o.grad_tol && gap_now < options.gap_tol) {
      out.stationary = true;
      return out;
    }

    const double bound_base =
        options.strict_gemm ? problem.evaluate_weighted_sq(theta, u) : bound_prev;
    const WeightUpdateResult wu =
        regemm_weight_update(kernel, obj.norms, obj.value, bound_base, options);
    u = wu.weights;
    bound_prev = wu.lifted_at_theta;  // discard old latent variables

    const LMStepResult step = lm_step(problem, theta, u, lambda, o.lm);
    lambda = step.lambda;
    theta = step.theta;
    out.step_failed = !step.accepted;

    const Objective after = problem.evaluate_objective(theta);
    IterationRecord& r = out.record;
    r.psi = after.value;
    r.aux = problem.evaluate_weighted_sq(theta, u);
    r.gap = r.aux - r.psi;
    r.sigma = wu.sigma;
    r.crit_lhs = wu.lifted_at_theta;
    r.crit_rhs = wu.bound;
    r.inlier_rate = inlier_rate(after.norms, o.inlier_threshold);
    r.step_kind = StepKind::lm;
    r.accepted = step.accepted;
    r.lambda = lambda;
    r.grad_inf = problem.robust_gradient(theta).lpNorm<Eigen::Infinity>();
    return out;
  };

  SolverTrace trace = run_loop(initial, body, make_controls(o));
  trace.final_state = theta;
  trace.final_theta = theta;
  trace.final_psi = problem.evaluate_objective(theta).value;
  return trace;
}

}  // namespace rnls
