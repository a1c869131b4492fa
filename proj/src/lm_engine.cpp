#include "rnls/lm_engine.h"

#include <chrono>
#include <cmath>

namespace rnls {

std::string to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::converged: return "converged";
    case SolveStatus::max_iter_reached: return "max_iter";
    case SolveStatus::stalled: return "stalled";
  }
  return "unknown";
}

std::string to_string(StepKind k) {
  switch (k) {
    case StepKind::none: return "";
    case StepKind::lm: return "lm";
    case StepKind::cooperative: return "cooperative";
    case StepKind::restoration: return "restoration";
  }
  return "";
}

LMStepResult lm_step(const Problem& problem, const Eigen::VectorXd& theta,
                     const Eigen::VectorXd& weights, double lambda,
                     const LMConfig& config) {
  LMStepResult out;
  out.theta = theta;
  out.lambda = lambda;
  out.obj_before = problem.evaluate_weighted_halfsq(theta, weights);
  out.obj_after = out.obj_before;

  BlockSparseSystem system = assemble(problem, theta, weights, 0.0);
  for (int attempt = 0; attempt <= config.max_retries; ++attempt) {
    out.attempts = attempt + 1;
    system.set_damping(out.lambda);
    Eigen::VectorXd delta;
    bool solved = true;
    try {
      delta = solve_system(system, config.dense_threshold, config.pcg_max_iter,
                           config.pcg_forcing);
    } catch (const SingularSystemError&) {
      solved = false;
    }
    if (solved) {
      Eigen::VectorXd candidate = theta - delta;
      double obj = std::numeric_limits<double>::infinity();
      try {
        obj = problem.evaluate_weighted_halfsq(candidate, weights);
      } catch (const EvaluationError&) {
        // unreachable candidate, treat as an objective increase
      }
      if (obj < out.obj_before) {
        problem.normalize_state(candidate);
        out.theta = std::move(candidate);
        out.obj_after = obj;
        out.accepted = true;
        out.lambda = std::max(out.lambda / config.lambda_factor, config.lambda_min);
        return out;
      }
    }
    out.lambda = std::min(out.lambda * config.lambda_factor, config.lambda_max);
  }
  return out;
}

namespace {

class Stopwatch {
 public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  // Strictly increasing timestamps even at clock resolution.
  double next() {
    const double t = std::chrono::duration<double>(
                         std::chrono::steady_clock::now() - start_)
                         .count();
    last_ = std::max(t, last_ + 1e-9);
    return last_;
  }

 private:
  std::chrono::steady_clock::time_point start_;
  double last_ = -1e-9;
};

}  // namespace

SolverTrace run_loop(const std::function<IterationRecord()>& initial_record,
                     const IterationBody& body, const LoopControls& controls) {
  SolverTrace trace;
  Stopwatch clock;

  IterationRecord first = initial_record();
  first.iter = 0;
  first.seconds = clock.next();
  trace.records.push_back(first);

  double prev_psi = first.psi;
  int fail_streak = 0;
  int small_decrease_streak = 0;

  for (int t = 1; t <= controls.max_iter; ++t) {
    StepOutcome out = body(t);
    if (out.stationary) {
      trace.status = SolveStatus::converged;
      return trace;
    }
    out.record.iter = t;
    out.record.seconds = clock.next();
    trace.records.push_back(out.record);

    if (out.step_failed) {
      if (++fail_streak >= controls.stall_limit) {
        trace.status = SolveStatus::stalled;
        return trace;
      }
    } else {
      fail_streak = 0;
    }

    if (out.suppress_rel_window) {
      small_decrease_streak = 0;
      prev_psi = out.record.psi;
    } else if (controls.rel_decrease_stop && std::isfinite(out.record.psi)) {
      const double rel = std::abs(out.record.psi - prev_psi) /
                         std::max(1.0, std::abs(out.record.psi));
      small_decrease_streak = rel < controls.rel_decrease_tol
                                  ? small_decrease_streak + 1
                                  : 0;
      prev_psi = out.record.psi;
      if (small_decrease_streak >= controls.rel_window) {
        trace.status = SolveStatus::converged;
        return trace;
      }
    }
  }
  trace.status = SolveStatus::max_iter_reached;
  return trace;
}

}  // namespace rnls
