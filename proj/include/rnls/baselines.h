#pragma once

#include "rnls/lm_engine.h"
#include "rnls/problem.h"

namespace rnls {

struct IrlsOptions {
  SolveOptions base;
};

// Alternates the touching weight update u_i = omega(||r_i(theta)||) with one
// accepted LM step on the weighted problem; a descent method on the robust
// objective.
SolverTrace irls_solve(const Problem& problem, const Eigen::VectorXd& theta0,
                       const IrlsOptions& options = {});

// Descending kernel scales factor^(levels-1), ..., factor, 1.
struct GncSchedule {
  int levels = 5;
  double factor = 2.0;
  double switch_tol = 1e-4;  // relative scaled-objective decrease per iteration

  std::vector<double> scales() const;
};

struct GncOptions {
  SolveOptions base;
  GncSchedule schedule;
};

// Graduated non-convexity: IRLS-style iterations under the scaled kernel
// s^2 psi(r/s), advancing to the next (smaller) scale when progress at the
// current level falls below switch_tol. The trace psi column is always the
// unscaled objective; aux holds the scaled objective.
SolverTrace gnc_solve(const Problem& problem, const Eigen::VectorXd& theta0,
                      const GncOptions& options = {});

struct MhqOptions {
  SolveOptions base;
  bool touching_init = false;  // start w_i^2 at omega(||r_i(theta0)||) instead of 1
};

// Multiplicative half-quadratic lifting: joint LM over (theta, w) on the
// least-squares form with residual blocks (w_i r_i(theta), (tau/sqrt2)(w_i^2-1)),
// whose half-squared-norm sum equals the lifted cost with u_i = w_i^2.
SolverTrace mhq_solve(const Problem& problem, const Eigen::VectorXd& theta0,
                      const MhqOptions& options = {});

// The lifted least-squares problem used by mhq_solve, exposed for tests:
// parameter blocks are the original ones plus one scalar w per residual.
Problem make_mhq_problem(const Problem& problem);

}  // namespace rnls
