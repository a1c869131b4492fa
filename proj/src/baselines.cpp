#include "rnls/baselines.h"

#include <cmath>
#include <numbers>

#include "rnls/ba.h"

namespace rnls {

namespace {

LoopControls make_controls(const SolveOptions& o, bool rel_decrease_stop) {
  LoopControls c;
  c.max_iter = o.max_iter;
  c.stall_limit = o.stall_limit;
  c.rel_decrease_stop = rel_decrease_stop;
  c.rel_decrease_tol = o.rel_decrease_tol;
  c.rel_window = o.rel_window;
  return c;
}

double scaled_objective(const RobustKernel& k, const Eigen::VectorXd& norms,
                        double s) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < norms.size(); ++i)
    total += scaled_psi(k, norms[i], s);
  return total;
}

// Scaled lifted surrogate sum_i (u_i/2) rho_i^2 + s^2 kappa(u_i), the upper
// bound the inner weighted step decreases; falls back to the weighted
// half-squared objective for non-liftable kernels.
double scaled_weighted_sq(const Problem& p, const Eigen::VectorXd& theta,
                          const Eigen::VectorXd& u, double s) {
  if (!p.kernel().liftable()) return p.evaluate_weighted_halfsq(theta, u);
  double total = 0.0;
  Eigen::VectorXd r;
  for (int i = 0; i < p.num_residuals(); ++i) {
    p.evaluate_block(i, theta, r, nullptr);
    total += 0.5 * u[i] * r.squaredNorm() + s * s * kappa(p.kernel(), u[i]);
  }
  return total;
}

}  // namespace

SolverTrace irls_solve(const Problem& problem, const Eigen::VectorXd& theta0,
                       const IrlsOptions& options) {
  problem.validate();
  const SolveOptions& o = options.base;
  Eigen::VectorXd theta = theta0;
  double lambda = o.lm.initial_lambda;

  auto initial = [&]() {
    IterationRecord r;
    const Objective obj = problem.evaluate_objective(theta);
    r.psi = obj.value;
    // Touching weights make the surrogate tight at the initial point.
    r.aux = scaled_weighted_sq(problem, theta, omega(problem.kernel(), obj.norms), 1.0);
    r.inlier_rate = inlier_rate(obj.norms, o.inlier_threshold);
    r.grad_inf = problem.robust_gradient(theta).lpNorm<Eigen::Infinity>();
    r.lambda = lambda;
    return r;
  };

  auto body = [&](int) {
    StepOutcome out;
    const Objective obj = problem.evaluate_objective(theta);
    if (problem.robust_gradient(theta).lpNorm<Eigen::Infinity>() < o.grad_tol) {
      out.stationary = true;
      return out;
    }
    const Eigen::VectorXd u = omega(problem.kernel(), obj.norms);
    const LMStepResult step = lm_step(problem, theta, u, lambda, o.lm);
    lambda = step.lambda;
    theta = step.theta;
    out.step_failed = !step.accepted;

    const Objective after = problem.evaluate_objective(theta);
    IterationRecord& r = out.record;
    r.psi = after.value;
    r.aux = scaled_weighted_sq(problem, theta, u, 1.0);
    r.inlier_rate = inlier_rate(after.norms, o.inlier_threshold);
    r.step_kind = StepKind::lm;
    r.accepted = step.accepted;
    r.lambda = lambda;
    r.grad_inf = problem.robust_gradient(theta).lpNorm<Eigen::Infinity>();
    return out;
  };

  SolverTrace trace = run_loop(initial, body, make_controls(o, true));
  trace.final_state = theta;
  trace.final_theta = theta;
  trace.final_psi = problem.evaluate_objective(theta).value;
  return trace;
}

std::vector<double> GncSchedule::scales() const {
  if (levels < 1) throw std::invalid_argument("GncSchedule: need levels >= 1");
  if (!(factor > 1.0)) throw std::invalid_argument("GncSchedule: factor must be > 1");
  std::vector<double> s(levels);
  for (int j = 0; j < levels; ++j) s[j] = std::pow(factor, levels - 1 - j);
  s.back() = 1.0;
  return s;
}

SolverTrace gnc_solve(const Problem& problem, const Eigen::VectorXd& theta0,
                      const GncOptions& options) {
  problem.validate();
  const SolveOptions& o = options.base;
  const std::vector<double> scales = options.schedule.scales();
  const RobustKernel& kernel = problem.kernel();

  Eigen::VectorXd theta = theta0;
  double lambda = o.lm.initial_lambda;
  size_t level = 0;

  auto initial = [&]() {
    IterationRecord r;
    const Objective obj = problem.evaluate_objective(theta);
    r.psi = obj.value;
    const Eigen::VectorXd u0 = omega(kernel, obj.norms / scales[level]);
    r.aux = scaled_weighted_sq(problem, theta, u0, scales[level]);
    r.sigma = scales[level];
    r.inlier_rate = inlier_rate(obj.norms, o.inlier_threshold);
    r.grad_inf =
        problem.robust_gradient(theta, scales[level]).lpNorm<Eigen::Infinity>();
    r.lambda = lambda;
    return r;
  };

  auto body = [&](int) {
    StepOutcome out;
    // Skip levels that are already stationary.
    while (true) {
      const double g =
          problem.robust_gradient(theta, scales[level]).lpNorm<Eigen::Infinity>();
      if (g >= o.grad_tol) break;
      if (level + 1 == scales.size()) {
        out.stationary = true;
        return out;
      }
      ++level;
    }
    const double s = scales[level];
    const bool last = level + 1 == scales.size();

    const Objective obj = problem.evaluate_objective(theta);
    const double scaled_before = scaled_objective(kernel, obj.norms, s);
    Eigen::VectorXd u(obj.norms.size());
    for (Eigen::Index i = 0; i < u.size(); ++i)
      u[i] = omega(kernel, obj.norms[i] / s);

    const LMStepResult step = lm_step(problem, theta, u, lambda, o.lm);
    lambda = step.lambda;
    theta = step.theta;

    const Objective after = problem.evaluate_objective(theta);
    const double scaled_after = scaled_objective(kernel, after.norms, s);

    IterationRecord& r = out.record;
    r.psi = after.value;
    r.aux = scaled_weighted_sq(problem, theta, u, s);
    r.sigma = s;
    r.inlier_rate = inlier_rate(after.norms, o.inlier_threshold);
    r.step_kind = StepKind::lm;
    r.accepted = step.accepted;
    r.lambda = lambda;
    r.grad_inf = problem.robust_gradient(theta, s).lpNorm<Eigen::Infinity>();

    if (step.accepted) {
      const double rel =
          (scaled_before - scaled_after) / std::max(1.0, scaled_before);
      if (!last && rel < options.schedule.switch_tol) ++level;
    } else if (!last) {
      ++level;  // level exhausted, move on instead of stalling
    } else {
      out.step_failed = true;
    }
    out.suppress_rel_window = level + 1 < scales.size();
    return out;
  };

  SolverTrace trace = run_loop(initial, body, make_controls(o, true));
  trace.final_state = theta;
  trace.final_theta = theta;
  trace.final_psi = problem.evaluate_objective(theta).value;
  return trace;
}

namespace {

class LiftedResidual : public ResidualFunction {
 public:
  explicit LiftedResidual(std::shared_ptr<const ResidualFunction> base)
      : base_(std::move(base)) {}
  int dimension() const override { return base_->dimension(); }
  bool evaluate(const std::vector<Eigen::Ref<const Eigen::VectorXd>>& params,
                Eigen::VectorXd& residual,
                std::vector<Eigen::MatrixXd>* jacobians) const override {
    const size_t nb = params.size() - 1;  // last attached block is w
    const double w = params[nb][0];
    std::vector<Eigen::Ref<const Eigen::VectorXd>> base_params(params.begin(),
                                                               params.begin() + nb);
    std::vector<Eigen::MatrixXd> base_jacs;
    if (jacobians) base_jacs.resize(nb);
    if (!base_->evaluate(base_params, residual, jacobians ? &base_jacs : nullptr))
      return false;
    if (jacobians) {
      for (size_t k = 0; k < nb; ++k) (*jacobians)[k] = w * base_jacs[k];
      (*jacobians)[nb] = residual;  // d(w r)/dw, before scaling the residual
    }
    residual *= w;
    return true;
  }

 private:
  std::shared_ptr<const ResidualFunction> base_;
};

// (tau/sqrt(2)) (w^2 - 1); its half-squared norm is kappa(w^2).
class BiasResidual : public ResidualFunction {
 public:
  explicit BiasResidual(double tau) : tau_(tau) {}
  int dimension() const override { return 1; }
  bool evaluate(const std::vector<Eigen::Ref<const Eigen::VectorXd>>& params,
                Eigen::VectorXd& residual,
                std::vector<Eigen::MatrixXd>* jacobians) const override {
    const double w = params[0][0];
    residual[0] = tau_ / std::numbers::sqrt2 * (w * w - 1.0);
    if (jacobians)
      (*jacobians)[0] = Eigen::MatrixXd::Constant(1, 1, std::numbers::sqrt2 * tau_ * w);
    return true;
  }

 private:
  double tau_;
};

}  // namespace

Problem make_mhq_problem(const Problem& problem) {
  if (!problem.kernel().liftable())
    throw NotLiftableError("mhq: kernel kind has no lifted form");
  Problem lifted{RobustKernel(KernelKind::quadratic, 1.0)};
  for (int b = 0; b < problem.num_blocks(); ++b)
    lifted.add_block(problem.block(b).values);
  Eigen::VectorXd one = Eigen::VectorXd::Ones(1);
  for (int i = 0; i < problem.num_residuals(); ++i) {
    const ResidualBlock& rb = problem.residual(i);
    const int w_block = lifted.add_block(one);
    std::vector<int> attached = rb.blocks;
    attached.push_back(w_block);
    lifted.add_residual(std::make_shared<LiftedResidual>(rb.fn), attached);
    lifted.add_residual(std::make_shared<BiasResidual>(problem.kernel().tau),
                        {w_block});
  }
  return lifted;
}

SolverTrace mhq_solve(const Problem& problem, const Eigen::VectorXd& theta0,
                      const MhqOptions& options) {
  problem.validate();
  const SolveOptions& o = options.base;
  const int d = problem.dimension();
  const int n = problem.num_residuals();

  Problem lifted = make_mhq_problem(problem);
  // Layout: original blocks occupy [0, d), then one scalar w per residual.
  Eigen::VectorXd x(lifted.dimension());
  x.head(d) = theta0;
  if (options.touching_init) {
    const Objective obj = problem.evaluate_objective(theta0);
    for (int i = 0; i < n; ++i)
      x[d + i] = std::sqrt(omega(problem.kernel(), obj.norms[i]));
  } else {
    x.tail(n).setOnes();
  }

  double lambda = o.lm.initial_lambda;
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(lifted.num_residuals());
  lifted.set_state_normalizer([&problem, d](Eigen::VectorXd& state) {
    Eigen::VectorXd theta = state.head(d);
    problem.normalize_state(theta);
    state.head(d) = theta;
  });

  auto initial = [&]() {
    IterationRecord r;
    const Objective obj = problem.evaluate_objective(x.head(d));
    r.psi = obj.value;
    r.aux = lifted.evaluate_objective(x).value;  // lifted cost
    r.inlier_rate = inlier_rate(obj.norms, o.inlier_threshold);
    r.grad_inf = lifted.weighted_gradient(x, ones).lpNorm<Eigen::Infinity>();
    r.lambda = lambda;
    return r;
  };

  auto body = [&](int) {
    StepOutcome out;
    if (lifted.weighted_gradient(x, ones).lpNorm<Eigen::Infinity>() < o.grad_tol) {
      out.stationary = true;
      return out;
    }
    const LMStepResult step = lm_step(lifted, x, ones, lambda, o.lm);
    lambda = step.lambda;
    x = step.theta;
    out.step_failed = !step.accepted;

    const Objective obj = problem.evaluate_objective(x.head(d));
    IterationRecord& r = out.record;
    r.psi = obj.value;
    r.aux = lifted.evaluate_objective(x).value;
    r.inlier_rate = inlier_rate(obj.norms, o.inlier_threshold);
    r.step_kind = StepKind::lm;
    r.accepted = step.accepted;
    r.lambda = lambda;
    r.grad_inf = lifted.weighted_gradient(x, ones).lpNorm<Eigen::Infinity>();
    return out;
  };

  SolverTrace trace = run_loop(initial, body, make_controls(o, true));
  trace.final_state = x;
  trace.final_theta = x.head(d);
  trace.final_psi = problem.evaluate_objective(trace.final_theta).value;
  return trace;
}

}  // namespace rnls
