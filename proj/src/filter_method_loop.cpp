#include "filter_method_loop.h"

#include <cmath>
#include <limits>

#include "rnls/errors.h"

namespace rnls {
namespace detail {

SolverTrace filter_method_solve(const FilterStepper& stepper, Eigen::VectorXd x0,
                                const FilterLoopOptions& options) {
  const SolveOptions& o = options.base;
  Filter filter(options.alpha);
  Eigen::VectorXd x = std::move(x0);
  double lambda = o.lm.initial_lambda;

  auto initial = [&]() {
    IterationRecord r;
    const FilterPair p = stepper.eval_fh(x);
    r.psi = stepper.psi_unscaled(x);
    r.aux = p.f;
    r.h = p.h;
    r.inlier_rate = stepper.inlier(x, o.inlier_threshold);
    r.grad_inf = stepper.stationarity_gradient(x).lpNorm<Eigen::Infinity>();
    r.lambda = lambda;
    return r;
  };

  double prev_f = std::numeric_limits<double>::quiet_NaN();
  int feasible_stagnation = 0;
  auto body = [&](int) {
    StepOutcome out;
    const FilterPair current = stepper.eval_fh(x);
    const double grad_inf =
        stepper.stationarity_gradient(x).lpNorm<Eigen::Infinity>();
    if (grad_inf < o.grad_tol && current.h < options.h_feasible_tol) {
      out.stationary = true;
      return out;
    }
    // Sustained objective stagnation at feasibility also counts as
    // stationary; the non-monotone window is only disabled while infeasible.
    if (current.h < options.h_feasible_tol && std::isfinite(prev_f) &&
        std::abs(current.f - prev_f) <=
            o.rel_decrease_tol * std::max(1.0, std::abs(current.f))) {
      if (++feasible_stagnation >= o.rel_window) {
        out.stationary = true;
        return out;
      }
    } else {
      feasible_stagnation = 0;
    }
    prev_f = current.f;

    const Filter::Handle handle = filter.push_temporary(current.f, current.h);

    bool coop_accepted = false;
    Eigen::VectorXd candidate;
    FilterPair pair{std::numeric_limits<double>::infinity(),
                    std::numeric_limits<double>::infinity()};
    try {
      candidate = stepper.cooperative(x, lambda);
      pair = stepper.eval_fh(candidate);
      coop_accepted = filter.accepts(pair);
    } catch (const SingularSystemError&) {
    } catch (const EvaluationError&) {
    }

    bool moved = false;
    if (coop_accepted) {
      x = std::move(candidate);
      stepper.normalize(x);
      pair = stepper.eval_fh(x);  // normalization-invariant, evaluated once more
      lambda = std::max(lambda / o.lm.lambda_factor, o.lm.lambda_min);
      moved = true;
    } else {
      // Restoration moves the auxiliary variables toward feasibility and is
      // taken unconditionally; the damping is raised either way.
      candidate = stepper.restoration(x);
      moved = (candidate - x).squaredNorm() > 0.0;
      x = std::move(candidate);
      pair = stepper.eval_fh(x);
      lambda = std::min(lambda * o.lm.lambda_factor,
                        std::max(options.restoration_lambda_cap, o.lm.initial_lambda));
    }

    filter.resolve_temporary(handle, pair.f < current.f);

    // A feasible iterate that neither step can improve is a dead point of
    // the constrained problem, not a stall.
    if (!moved && current.h < options.h_feasible_tol) {
      out.stationary = true;
      return out;
    }
    out.step_failed = !moved;
    IterationRecord& r = out.record;
    r.psi = stepper.psi_unscaled(x);
    r.aux = pair.f;
    r.h = pair.h;
    r.inlier_rate = stepper.inlier(x, o.inlier_threshold);
    r.step_kind = coop_accepted ? StepKind::cooperative : StepKind::restoration;
    r.accepted = coop_accepted;
    r.lambda = lambda;
    r.grad_inf = grad_inf;
    return out;
  };

  LoopControls controls;
  controls.max_iter = o.max_iter;
  controls.stall_limit = o.stall_limit;
  controls.rel_decrease_stop = false;  // the iteration is non-monotone by design
  SolverTrace trace = run_loop(initial, body, controls);
  trace.final_state = x;
  return trace;
}

}  // namespace detail
}  // namespace rnls
