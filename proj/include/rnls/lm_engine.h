#pragma once

#include <Eigen/Core>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "rnls/linear_solvers.h"
#include "rnls/problem.h"

namespace rnls {

struct LMConfig {
  double initial_lambda = 1e-3;
  double lambda_factor = 10.0;  // exact up/down factor per attempt
  double lambda_min = 1e-12;
  double lambda_max = 1e12;
  int max_retries = 15;         // damping bumps within one lm_step
  int dense_threshold = 2000;   // direct solve at or below this dimension
  double pcg_forcing = 0.1;
  int pcg_max_iter = 1000;
};

// Shared outer-loop controls. One trace row is one outer iteration of the
// respective solver; wall clock is sampled after each iteration.
struct SolveOptions {
  int max_iter = 50;
  double grad_tol = 1e-8;           // infinity norm of the stationarity gradient
  double rel_decrease_tol = 1e-10;  // relative objective decrease ...
  int rel_window = 3;               // ... sustained over this many iterations
  int stall_limit = 2;              // consecutive failed steps before stalling
  double inlier_threshold = 1.0;    // pixels, for the trace inlier-rate column
  LMConfig lm;
};

enum class SolveStatus { converged, max_iter_reached, stalled };
enum class StepKind { none, lm, cooperative, restoration };

std::string to_string(SolveStatus s);
std::string to_string(StepKind k);

struct IterationRecord {
  static constexpr double kUnset = std::numeric_limits<double>::quiet_NaN();
  int iter = 0;
  double seconds = 0.0;
  double psi = kUnset;          // robust objective of the original problem
  double aux = kUnset;          // solver-specific auxiliary objective (J-bar, f, ...)
  double h = kUnset;            // constraint violation, where defined
  double inlier_rate = kUnset;
  StepKind step_kind = StepKind::none;
  bool accepted = false;
  double lambda = kUnset;
  double sigma = kUnset;        // kernel scale, where defined
  double gap = kUnset;          // surrogate-objective gap, where defined
  double grad_inf = kUnset;
  double crit_lhs = kUnset;     // sufficient-decrease criterion sides, where defined
  double crit_rhs = kUnset;
};

struct SolverTrace {
  std::vector<IterationRecord> records;
  SolveStatus status = SolveStatus::max_iter_reached;
  Eigen::VectorXd final_state;  // full solver state (may be augmented)
  Eigen::VectorXd final_theta;  // original-problem parameters
  double final_psi = IterationRecord::kUnset;
};

struct LMStepResult {
  Eigen::VectorXd theta;  // candidate when accepted, input otherwise
  double lambda = 0.0;    // updated damping
  bool accepted = false;
  double obj_before = 0.0;  // weighted half-squared objective
  double obj_after = 0.0;
  int attempts = 0;
};

// One damped Gauss-Newton step on the fixed-weight problem
// min_theta sum_i (u_i/2) ||r_i(theta)||^2. The candidate is accepted iff the
// weighted objective strictly decreases; rejected attempts multiply lambda by
// the damping factor and retry up to LMConfig::max_retries.
LMStepResult lm_step(const Problem& problem, const Eigen::VectorXd& theta,
                     const Eigen::VectorXd& weights, double lambda,
                     const LMConfig& config);

struct StepOutcome {
  IterationRecord record;
  bool stationary = false;   // current iterate already stationary; stop before stepping
  bool step_failed = false;  // no acceptable candidate was produced
  bool suppress_rel_window = false;  // skip the relative-decrease stop this iteration
};

using IterationBody = std::function<StepOutcome(int iter)>;

struct LoopControls {
  int max_iter = 50;
  int stall_limit = 2;
  bool rel_decrease_stop = true;  // monotone solvers only
  double rel_decrease_tol = 1e-10;
  int rel_window = 3;
};

// Shared outer loop: records the initial state, then one body call per
// iteration until stationarity, max_iter, sustained relative decrease below
// tolerance, or stall_limit consecutive failed steps.
SolverTrace run_loop(const std::function<IterationRecord()>& initial_record,
                     const IterationBody& body, const LoopControls& controls);

}  // namespace rnls
